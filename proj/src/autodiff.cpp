#include "irsce/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace irsce::tl {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

Graph* same_graph(std::initializer_list<Value> vs) {
  Graph* g = nullptr;
  for (Value v : vs) {
    require(v.valid(), "op on invalid value");
    if (!g) g = v.graph;
    require(g == v.graph, "values from different graphs");
  }
  return g;
}

struct LeafNode final : Node {
  void backward(Graph&) override {}
  const char* name() const override { return "leaf"; }
};

struct AddNode final : Node {
  void backward(Graph& g) override {
    for (auto id : in) {
      if (!g.node(id).requires_grad) continue;
      Tensor& dst = g.grad_buf(id);
      for (std::int64_t i = 0; i < adj.numel(); ++i) dst[i] += adj[i];
    }
  }
  const char* name() const override { return "add"; }
};

struct SubNode final : Node {
  void backward(Graph& g) override {
    if (g.node(in[0]).requires_grad) {
      Tensor& da = g.grad_buf(in[0]);
      for (std::int64_t i = 0; i < adj.numel(); ++i) da[i] += adj[i];
    }
    if (g.node(in[1]).requires_grad) {
      Tensor& db = g.grad_buf(in[1]);
      for (std::int64_t i = 0; i < adj.numel(); ++i) db[i] -= adj[i];
    }
  }
  const char* name() const override { return "sub"; }
};

struct NegNode final : Node {
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& da = g.grad_buf(in[0]);
    for (std::int64_t i = 0; i < adj.numel(); ++i) da[i] -= adj[i];
  }
  const char* name() const override { return "neg"; }
};

struct MulNode final : Node {
  void backward(Graph& g) override {
    const Tensor& a = g.node(in[0]).val;
    const Tensor& b = g.node(in[1]).val;
    if (g.node(in[0]).requires_grad) {
      Tensor& da = g.grad_buf(in[0]);
      for (std::int64_t i = 0; i < adj.numel(); ++i) da[i] += adj[i] * b[i];
    }
    if (g.node(in[1]).requires_grad) {
      Tensor& db = g.grad_buf(in[1]);
      for (std::int64_t i = 0; i < adj.numel(); ++i) db[i] += adj[i] * a[i];
    }
  }
  const char* name() const override { return "mul"; }
};

struct ScaleNode final : Node {
  double c = 1.0;
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& da = g.grad_buf(in[0]);
    for (std::int64_t i = 0; i < adj.numel(); ++i) da[i] += c * adj[i];
  }
  const char* name() const override { return "scale"; }
};

struct ScaleByNode final : Node {
  void backward(Graph& g) override {
    const Tensor& a = g.node(in[0]).val;
    const double s = g.node(in[1]).val[0];
    if (g.node(in[0]).requires_grad) {
      Tensor& da = g.grad_buf(in[0]);
      for (std::int64_t i = 0; i < adj.numel(); ++i) da[i] += s * adj[i];
    }
    if (g.node(in[1]).requires_grad) {
      Tensor& ds = g.grad_buf(in[1]);
      double acc = 0.0;
      for (std::int64_t i = 0; i < adj.numel(); ++i) acc += adj[i] * a[i];
      ds[0] += acc;
    }
  }
  const char* name() const override { return "scale_by"; }
};

struct MatmulNode final : Node {
  void backward(Graph& g) override {
    const Tensor& a = g.node(in[0]).val;
    const Tensor& b = g.node(in[1]).val;
    const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    ConstMatMap A(a.data(), m, k), B(b.data(), k, n), dC(adj.data(), m, n);
    if (g.node(in[0]).requires_grad) {
      MatMap dA(g.grad_buf(in[0]).mutable_data(), m, k);
      dA.noalias() += dC * B.transpose();
    }
    if (g.node(in[1]).requires_grad) {
      MatMap dB(g.grad_buf(in[1]).mutable_data(), k, n);
      dB.noalias() += A.transpose() * dC;
    }
  }
  const char* name() const override { return "matmul"; }
};

struct DenseNode final : Node {
  void backward(Graph& g) override {
    const Tensor& x = g.node(in[0]).val;
    const Tensor& w = g.node(in[1]).val;
    const auto m = w.shape()[0], n = w.shape()[1];
    ConstMatMap W(w.data(), m, n);
    Eigen::Map<const Eigen::VectorXd> X(x.data(), n), dY(adj.data(), m);
    if (g.node(in[0]).requires_grad) {
      Eigen::Map<Eigen::VectorXd> dX(g.grad_buf(in[0]).mutable_data(), n);
      dX.noalias() += W.transpose() * dY;
    }
    if (g.node(in[1]).requires_grad) {
      MatMap dW(g.grad_buf(in[1]).mutable_data(), m, n);
      dW.noalias() += dY * X.transpose();
    }
    if (g.node(in[2]).requires_grad) {
      Eigen::Map<Eigen::VectorXd> dB(g.grad_buf(in[2]).mutable_data(), m);
      dB.noalias() += dY;
    }
  }
  const char* name() const override { return "dense"; }
};

// Geometry shared by forward and backward conv kernels.
struct ConvDims {
  std::int64_t parts, cin, h, w, cout, kh, kw, ph, pw;
  bool rank4;
};

ConvDims conv_dims(const Shape& xs, const Shape& ks, bool depthwise) {
  ConvDims d{};
  d.rank4 = xs.rank == 4;
  require(xs.rank == 3 || xs.rank == 4, "conv input must be [C,H,W] or [P,C,H,W]");
  d.parts = d.rank4 ? xs[0] : 1;
  d.cin = d.rank4 ? xs[1] : xs[0];
  d.h = d.rank4 ? xs[2] : xs[1];
  d.w = d.rank4 ? xs[3] : xs[2];
  if (depthwise) {
    require(ks.rank == 3, "depthwise kernels must be [C,kh,kw]");
    require(ks[0] == d.cin, "depthwise kernel channel count mismatch");
    d.cout = d.cin;
    d.kh = ks[1];
    d.kw = ks[2];
  } else {
    require(ks.rank == 4, "conv kernels must be [Cout,Cin,kh,kw]");
    require(ks[1] == d.cin, "conv kernel input-channel mismatch");
    d.cout = ks[0];
    d.kh = ks[2];
    d.kw = ks[3];
  }
  require(d.kh % 2 == 1 && d.kw % 2 == 1, "conv kernel extents must be odd");
  d.ph = d.kh / 2;
  d.pw = d.kw / 2;
  return d;
}

struct Conv2dNode final : Node {
  ConvDims dims{};

  static Tensor forward(const Tensor& x, const Tensor& k, const Tensor& b,
                        const ConvDims& d) {
    Shape os = d.rank4 ? Shape{d.parts, d.cout, d.h, d.w} : Shape{d.cout, d.h, d.w};
    Tensor out(os);
    const std::int64_t xpart = d.cin * d.h * d.w, opart = d.cout * d.h * d.w;
    for (std::int64_t p = 0; p < d.parts; ++p) {
      const double* xp = x.data() + p * xpart;
      double* op = out.mutable_data() + p * opart;
      for (std::int64_t f = 0; f < d.cout; ++f) {
        double* oc = op + f * d.h * d.w;
        const double bias = b[f];
        for (std::int64_t i = 0; i < d.h * d.w; ++i) oc[i] = bias;
        for (std::int64_t c = 0; c < d.cin; ++c) {
          const double* xc = xp + c * d.h * d.w;
          const double* kf = k.data() + (f * d.cin + c) * d.kh * d.kw;
          for (std::int64_t dy = 0; dy < d.kh; ++dy) {
            const std::int64_t oy = dy - d.ph;
            for (std::int64_t dx = 0; dx < d.kw; ++dx) {
              const std::int64_t ox = dx - d.pw;
              const double kv = kf[dy * d.kw + dx];
              if (kv == 0.0) continue;
              const std::int64_t y0 = std::max<std::int64_t>(0, -oy);
              const std::int64_t y1 = std::min(d.h, d.h - oy);
              const std::int64_t x0 = std::max<std::int64_t>(0, -ox);
              const std::int64_t x1 = std::min(d.w, d.w - ox);
              for (std::int64_t y = y0; y < y1; ++y) {
                const double* xr = xc + (y + oy) * d.w + ox;
                double* orow = oc + y * d.w;
                for (std::int64_t xx = x0; xx < x1; ++xx) orow[xx] += kv * xr[xx];
              }
            }
          }
        }
      }
    }
    return out;
  }

  void backward(Graph& g) override {
    const ConvDims& d = dims;
    const Tensor& x = g.node(in[0]).val;
    const Tensor& k = g.node(in[1]).val;
    const std::int64_t xpart = d.cin * d.h * d.w, opart = d.cout * d.h * d.w;
    const bool need_dx = g.node(in[0]).requires_grad;
    const bool need_dk = g.node(in[1]).requires_grad;
    const bool need_db = g.node(in[2]).requires_grad;
    Tensor* dx = need_dx ? &g.grad_buf(in[0]) : nullptr;
    Tensor* dk = need_dk ? &g.grad_buf(in[1]) : nullptr;
    Tensor* db = need_db ? &g.grad_buf(in[2]) : nullptr;
    for (std::int64_t p = 0; p < d.parts; ++p) {
      for (std::int64_t f = 0; f < d.cout; ++f) {
        const double* ac = adj.data() + p * opart + f * d.h * d.w;
        if (need_db) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < d.h * d.w; ++i) acc += ac[i];
          (*db)[f] += acc;
        }
        for (std::int64_t c = 0; c < d.cin; ++c) {
          const double* xc = x.data() + p * xpart + c * d.h * d.w;
          const double* kf = k.data() + (f * d.cin + c) * d.kh * d.kw;
          double* dxc = need_dx ? dx->mutable_data() + p * xpart + c * d.h * d.w : nullptr;
          double* dkf = need_dk ? dk->mutable_data() + (f * d.cin + c) * d.kh * d.kw : nullptr;
          for (std::int64_t dy = 0; dy < d.kh; ++dy) {
            const std::int64_t oy = dy - d.ph;
            for (std::int64_t dx2 = 0; dx2 < d.kw; ++dx2) {
              const std::int64_t ox = dx2 - d.pw;
              const std::int64_t y0 = std::max<std::int64_t>(0, -oy);
              const std::int64_t y1 = std::min(d.h, d.h - oy);
              const std::int64_t x0 = std::max<std::int64_t>(0, -ox);
              const std::int64_t x1 = std::min(d.w, d.w - ox);
              const double kv = kf[dy * d.kw + dx2];
              double kacc = 0.0;
              for (std::int64_t y = y0; y < y1; ++y) {
                const double* arow = ac + y * d.w;
                const std::int64_t roff = (y + oy) * d.w + ox;
                if (need_dk) {
                  const double* xr = xc + roff;
                  for (std::int64_t xx = x0; xx < x1; ++xx) kacc += arow[xx] * xr[xx];
                }
                if (need_dx && kv != 0.0) {
                  double* dxr = dxc + roff;
                  for (std::int64_t xx = x0; xx < x1; ++xx) dxr[xx] += kv * arow[xx];
                }
              }
              if (need_dk) dkf[dy * d.kw + dx2] += kacc;
            }
          }
        }
      }
    }
  }
  const char* name() const override { return "conv2d"; }
};

struct DepthwiseConv2dNode final : Node {
  ConvDims dims{};

  static Tensor forward(const Tensor& x, const Tensor& k, const Tensor& b,
                        const ConvDims& d) {
    Shape os = d.rank4 ? Shape{d.parts, d.cin, d.h, d.w} : Shape{d.cin, d.h, d.w};
    Tensor out(os);
    const std::int64_t plane = d.h * d.w, xpart = d.cin * plane;
    for (std::int64_t p = 0; p < d.parts; ++p) {
      for (std::int64_t c = 0; c < d.cin; ++c) {
        const double* xc = x.data() + p * xpart + c * plane;
        double* oc = out.mutable_data() + p * xpart + c * plane;
        const double* kc = k.data() + c * d.kh * d.kw;
        const double bias = b[c];
        for (std::int64_t i = 0; i < plane; ++i) oc[i] = bias;
        for (std::int64_t dy = 0; dy < d.kh; ++dy) {
          const std::int64_t oy = dy - d.ph;
          for (std::int64_t dx = 0; dx < d.kw; ++dx) {
            const std::int64_t ox = dx - d.pw;
            const double kv = kc[dy * d.kw + dx];
            if (kv == 0.0) continue;
            const std::int64_t y0 = std::max<std::int64_t>(0, -oy);
            const std::int64_t y1 = std::min(d.h, d.h - oy);
            const std::int64_t x0 = std::max<std::int64_t>(0, -ox);
            const std::int64_t x1 = std::min(d.w, d.w - ox);
            for (std::int64_t y = y0; y < y1; ++y) {
              const double* xr = xc + (y + oy) * d.w + ox;
              double* orow = oc + y * d.w;
              for (std::int64_t xx = x0; xx < x1; ++xx) orow[xx] += kv * xr[xx];
            }
          }
        }
      }
    }
    return out;
  }

  void backward(Graph& g) override {
    const ConvDims& d = dims;
    const Tensor& x = g.node(in[0]).val;
    const Tensor& k = g.node(in[1]).val;
    const std::int64_t plane = d.h * d.w, xpart = d.cin * plane;
    const bool need_dx = g.node(in[0]).requires_grad;
    const bool need_dk = g.node(in[1]).requires_grad;
    const bool need_db = g.node(in[2]).requires_grad;
    Tensor* dx = need_dx ? &g.grad_buf(in[0]) : nullptr;
    Tensor* dk = need_dk ? &g.grad_buf(in[1]) : nullptr;
    Tensor* db = need_db ? &g.grad_buf(in[2]) : nullptr;
    for (std::int64_t p = 0; p < d.parts; ++p) {
      for (std::int64_t c = 0; c < d.cin; ++c) {
        const double* ac = adj.data() + p * xpart + c * plane;
        const double* xc = x.data() + p * xpart + c * plane;
        const double* kc = k.data() + c * d.kh * d.kw;
        if (need_db) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < plane; ++i) acc += ac[i];
          (*db)[c] += acc;
        }
        for (std::int64_t dy = 0; dy < d.kh; ++dy) {
          const std::int64_t oy = dy - d.ph;
          for (std::int64_t dx2 = 0; dx2 < d.kw; ++dx2) {
            const std::int64_t ox = dx2 - d.pw;
            const std::int64_t y0 = std::max<std::int64_t>(0, -oy);
            const std::int64_t y1 = std::min(d.h, d.h - oy);
            const std::int64_t x0 = std::max<std::int64_t>(0, -ox);
            const std::int64_t x1 = std::min(d.w, d.w - ox);
            const double kv = kc[dy * d.kw + dx2];
            double kacc = 0.0;
            for (std::int64_t y = y0; y < y1; ++y) {
              const double* arow = ac + y * d.w;
              const std::int64_t roff = (y + oy) * d.w + ox;
              if (need_dk) {
                const double* xr = xc + roff;
                for (std::int64_t xx = x0; xx < x1; ++xx) kacc += arow[xx] * xr[xx];
              }
              if (need_dx && kv != 0.0) {
                double* dxr = dx->mutable_data() + p * xpart + c * plane + roff;
                for (std::int64_t xx = x0; xx < x1; ++xx) dxr[xx] += kv * arow[xx];
              }
            }
            if (need_dk) dk->mutable_data()[c * d.kh * d.kw + dy * d.kw + dx2] += kacc;
          }
        }
      }
    }
  }
  const char* name() const override { return "depthwise_conv2d"; }
};

struct LeakyReluNode final : Node {
  double slope = 0.01;
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    const Tensor& x = g.node(in[0]).val;
    Tensor& dx = g.grad_buf(in[0]);
    // gradient at the kink taken from the positive branch
    for (std::int64_t i = 0; i < adj.numel(); ++i)
      dx[i] += adj[i] * (x[i] >= 0.0 ? 1.0 : slope);
  }
  const char* name() const override { return "leaky_relu"; }
};

struct PoolNode final : Node {
  std::vector<int> axes;
  PoolMode mode = PoolMode::kAvg;
  std::vector<std::int64_t> argmax;  // flat input index per output element
  std::int64_t group = 1;            // reduced-element count per output

  // Decomposes a flat input index into (output flat index, within-group idx).
  // Precomputed strides make forward/backward symmetrical.
  std::vector<std::int64_t> out_index_of_in;

  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& dx = g.grad_buf(in[0]);
    if (mode == PoolMode::kMax) {
      for (std::int64_t o = 0; o < adj.numel(); ++o) dx[argmax[static_cast<size_t>(o)]] += adj[o];
    } else {
      const double inv = 1.0 / static_cast<double>(group);
      for (std::int64_t i = 0; i < dx.numel(); ++i)
        dx[i] += adj[out_index_of_in[static_cast<size_t>(i)]] * inv;
    }
  }
  const char* name() const override { return "pool_reduce"; }
};

struct SoftThresholdNode final : Node {
  void backward(Graph& g) override {
    const Tensor& re = g.node(in[0]).val;
    const Tensor& im = g.node(in[1]).val;
    const double l1 = g.node(in[2]).val[0];
    const double l2 = g.node(in[3]).val[0];
    const double sg = g.node(in[4]).val[0];
    const double t = l2 * sg;
    const std::int64_t n = re.numel();
    const double* ar = adj.data();
    const double* ai = adj.data() + n;
    const bool need_re = g.node(in[0]).requires_grad;
    const bool need_im = g.node(in[1]).requires_grad;
    const bool need_l1 = g.node(in[2]).requires_grad;
    const bool need_l2 = g.node(in[3]).requires_grad;
    const bool need_sg = g.node(in[4]).requires_grad;
    Tensor* dre = need_re ? &g.grad_buf(in[0]) : nullptr;
    Tensor* dim = need_im ? &g.grad_buf(in[1]) : nullptr;
    double acc_l1 = 0.0, acc_t = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double r = re[i], m = std::hypot(r, im[i]);
      if (m <= t || m == 0.0) continue;  // subgradient 0 below/at the kink
      const double q = im[i];
      const double inv_m = 1.0 / m;
      const double inv_m3 = inv_m * inv_m * inv_m;
      if (need_re || need_im) {
        const double drr = l1 * (1.0 - t * inv_m + t * r * r * inv_m3);
        const double dri = l1 * t * r * q * inv_m3;
        const double dii = l1 * (1.0 - t * inv_m + t * q * q * inv_m3);
        if (need_re) (*dre)[i] += ar[i] * drr + ai[i] * dri;
        if (need_im) (*dim)[i] += ar[i] * dri + ai[i] * dii;
      }
      if (need_l1) acc_l1 += (ar[i] * r + ai[i] * q) * (1.0 - t * inv_m);
      if (need_l2 || need_sg) acc_t += -(ar[i] * r + ai[i] * q) * l1 * inv_m;
    }
    if (need_l1) g.grad_buf(in[2])[0] += acc_l1;
    if (need_l2) g.grad_buf(in[3])[0] += acc_t * sg;
    if (need_sg) g.grad_buf(in[4])[0] += acc_t * l2;
  }
  const char* name() const override { return "soft_threshold"; }
};

struct ActiveCountNode final : Node {
  void backward(Graph&) override {}  // piecewise constant
  const char* name() const override { return "shrink_active_count"; }
};

struct SoftThresholdRowsNode final : Node {
  void backward(Graph& g) override {
    const Tensor& re = g.node(in[0]).val;
    const Tensor& im = g.node(in[1]).val;
    const double l1 = g.node(in[2]).val[0];
    const double l2 = g.node(in[3]).val[0];
    const double sg = g.node(in[4]).val[0];
    const double t = l2 * sg;
    const std::int64_t rows = re.shape()[0], cols = re.shape()[1];
    const std::int64_t n = rows * cols;
    const double* ar = adj.data();
    const double* ai = adj.data() + n;
    const bool need_re = g.node(in[0]).requires_grad;
    const bool need_im = g.node(in[1]).requires_grad;
    const bool need_l1 = g.node(in[2]).requires_grad;
    const bool need_l2 = g.node(in[3]).requires_grad;
    const bool need_sg = g.node(in[4]).requires_grad;
    Tensor* dre = need_re ? &g.grad_buf(in[0]) : nullptr;
    Tensor* dim = need_im ? &g.grad_buf(in[1]) : nullptr;
    double acc_l1 = 0.0, acc_t = 0.0;
    for (std::int64_t j = 0; j < rows; ++j) {
      double m2 = 0.0;
      for (std::int64_t k = 0; k < cols; ++k) {
        const std::int64_t idx = j * cols + k;
        m2 += re[idx] * re[idx] + im[idx] * im[idx];
      }
      const double m = std::sqrt(m2);
      if (m <= t || m == 0.0) continue;
      const double c = 1.0 - t / m;
      const double inv_m3 = 1.0 / (m2 * m);
      double dot = 0.0;  // sum over the row of adj . r (both components)
      for (std::int64_t k = 0; k < cols; ++k) {
        const std::int64_t idx = j * cols + k;
        dot += ar[idx] * re[idx] + ai[idx] * im[idx];
      }
      if (need_re || need_im) {
        const double common = l1 * t * inv_m3 * dot;
        for (std::int64_t k = 0; k < cols; ++k) {
          const std::int64_t idx = j * cols + k;
          if (need_re) (*dre)[idx] += l1 * c * ar[idx] + common * re[idx];
          if (need_im) (*dim)[idx] += l1 * c * ai[idx] + common * im[idx];
        }
      }
      if (need_l1) acc_l1 += c * dot;
      if (need_l2 || need_sg) acc_t += -l1 / m * dot;
    }
    if (need_l1) g.grad_buf(in[2])[0] += acc_l1;
    if (need_l2) g.grad_buf(in[3])[0] += acc_t * sg;
    if (need_sg) g.grad_buf(in[4])[0] += acc_t * l2;
  }
  const char* name() const override { return "soft_threshold_rows"; }
};

struct PartNode final : Node {
  std::int64_t index = 0;
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& dx = g.grad_buf(in[0]);
    const std::int64_t block = adj.numel();
    double* dst = dx.mutable_data() + index * block;
    for (std::int64_t i = 0; i < block; ++i) dst[i] += adj[i];
  }
  const char* name() const override { return "part"; }
};

struct ReshapeNode final : Node {
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& dx = g.grad_buf(in[0]);
    for (std::int64_t i = 0; i < adj.numel(); ++i) dx[i] += adj[i];
  }
  const char* name() const override { return "reshape"; }
};

struct Concat2Node final : Node {
  int axis = 0;
  std::int64_t outer = 1, block_a = 1, block_b = 1;
  void backward(Graph& g) override {
    const std::int64_t bo = block_a + block_b;
    if (g.node(in[0]).requires_grad) {
      Tensor& da = g.grad_buf(in[0]);
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < block_a; ++i) da[o * block_a + i] += adj[o * bo + i];
    }
    if (g.node(in[1]).requires_grad) {
      Tensor& db = g.grad_buf(in[1]);
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < block_b; ++i)
          db[o * block_b + i] += adj[o * bo + block_a + i];
    }
  }
  const char* name() const override { return "concat2"; }
};

struct FNormNode final : Node {
  void backward(Graph& g) override {
    const double nrm = val[0];
    if (nrm <= 0.0) return;
    const double s = adj[0] / nrm;
    const Tensor& re = g.node(in[0]).val;
    const Tensor& im = g.node(in[1]).val;
    if (g.node(in[0]).requires_grad) {
      Tensor& d = g.grad_buf(in[0]);
      for (std::int64_t i = 0; i < re.numel(); ++i) d[i] += s * re[i];
    }
    if (g.node(in[1]).requires_grad) {
      Tensor& d = g.grad_buf(in[1]);
      for (std::int64_t i = 0; i < im.numel(); ++i) d[i] += s * im[i];
    }
  }
  const char* name() const override { return "fnorm"; }
};

struct SumSqNode final : Node {
  void backward(Graph& g) override {
    const double s = 2.0 * adj[0];
    for (auto id : in) {
      if (!g.node(id).requires_grad) continue;
      const Tensor& x = g.node(id).val;
      Tensor& d = g.grad_buf(id);
      for (std::int64_t i = 0; i < x.numel(); ++i) d[i] += s * x[i];
    }
  }
  const char* name() const override { return "sumsq"; }
};

struct CorrToPlanesNode final : Node {
  std::int64_t rows = 1, cols = 1;
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& dx = g.grad_buf(in[0]);
    const std::int64_t kk = adj.shape()[0];
    for (std::int64_t k = 0; k < kk; ++k)
      for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j)
          dx.at(j * rows + i, k) += adj.at(k, i, j);
  }
  const char* name() const override { return "corr_to_planes"; }
};

struct PlanesToCorrNode final : Node {
  void backward(Graph& g) override {
    if (!g.node(in[0]).requires_grad) return;
    Tensor& dx = g.grad_buf(in[0]);
    const Shape& s = g.node(in[0]).val.shape();
    const std::int64_t kk = s[0], rows = s[1], cols = s[2];
    for (std::int64_t k = 0; k < kk; ++k)
      for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j)
          dx.at(k, i, j) += adj.at(j * rows + i, k);
  }
  const char* name() const override { return "planes_to_corr"; }
};

struct ScalePlanesNode final : Node {
  void backward(Graph& g) override {
    const Tensor& x = g.node(in[0]).val;
    const Tensor& s = g.node(in[1]).val;
    const Shape& xs = x.shape();
    const std::int64_t P = xs[0], K = xs[1], plane = xs[2] * xs[3];
    const bool need_dx = g.node(in[0]).requires_grad;
    const bool need_ds = g.node(in[1]).requires_grad;
    Tensor* dx = need_dx ? &g.grad_buf(in[0]) : nullptr;
    Tensor* ds = need_ds ? &g.grad_buf(in[1]) : nullptr;
    for (std::int64_t p = 0; p < P; ++p)
      for (std::int64_t k = 0; k < K; ++k) {
        const std::int64_t off = (p * K + k) * plane;
        const double sv = s.at(k, p);
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) {
          if (need_dx) (*dx)[off + i] += adj[off + i] * sv;
          if (need_ds) acc += adj[off + i] * x[off + i];
        }
        if (need_ds) ds->at(k, p) += acc;
      }
  }
  const char* name() const override { return "scale_planes"; }
};

struct ScaleSpatialNode final : Node {
  void backward(Graph& g) override {
    const Tensor& x = g.node(in[0]).val;
    const Tensor& m = g.node(in[1]).val;
    const Shape& xs = x.shape();
    const std::int64_t P = xs[0], K = xs[1], plane = xs[2] * xs[3];
    const bool need_dx = g.node(in[0]).requires_grad;
    const bool need_dm = g.node(in[1]).requires_grad;
    Tensor* dx = need_dx ? &g.grad_buf(in[0]) : nullptr;
    Tensor* dm = need_dm ? &g.grad_buf(in[1]) : nullptr;
    for (std::int64_t p = 0; p < P; ++p) {
      const double* mp = m.data() + p * plane;
      double* dmp = need_dm ? dm->mutable_data() + p * plane : nullptr;
      for (std::int64_t k = 0; k < K; ++k) {
        const std::int64_t off = (p * K + k) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          if (need_dx) (*dx)[off + i] += adj[off + i] * mp[i];
          if (need_dm) dmp[i] += adj[off + i] * x[off + i];
        }
      }
    }
  }
  const char* name() const override { return "scale_spatial"; }
};

}  // namespace

Value Graph::append(std::unique_ptr<Node> n) {
  for (auto id : n->in)
    if (node(id).requires_grad) n->requires_grad = true;
  if (check_finite && !n->val.all_finite())
    throw NumericalError(std::string("non-finite values produced by ") + n->name());
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Graph::append_leaf(Tensor t, bool requires) {
  auto n = std::make_unique<LeafNode>();
  n->val = std::move(t);
  n->requires_grad = requires;
  if (check_finite && !n->val.all_finite())
    throw NumericalError("non-finite values in leaf tensor");
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Graph::backward(Value loss) {
  require(loss.valid() && loss.graph == this, "backward on foreign value");
  Node& l = node(loss.id);
  if (l.val.numel() != 1)
    throw std::logic_error("backward requires a scalar loss");
  l.adj = Tensor(l.val.shape(), 1.0);
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = *nodes_[static_cast<size_t>(i)];
    if (n.adj.empty() || !n.requires_grad) continue;
    n.backward(*this);
  }
}

namespace {

template <typename NodeT>
Value make_node(Graph* g, std::vector<Value> ins, Tensor out) {
  auto n = std::make_unique<NodeT>();
  n->val = std::move(out);
  for (Value v : ins) n->in.push_back(v.id);
  return g->append(std::move(n));
}

}  // namespace

Value add(Value a, Value b) {
  Graph* g = same_graph({a, b});
  const Tensor& ta = g->value(a);
  const Tensor& tb = g->value(b);
  require(ta.shape() == tb.shape(), "add shape mismatch");
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] + tb[i];
  return make_node<AddNode>(g, {a, b}, std::move(out));
}

Value sub(Value a, Value b) {
  Graph* g = same_graph({a, b});
  const Tensor& ta = g->value(a);
  const Tensor& tb = g->value(b);
  require(ta.shape() == tb.shape(), "sub shape mismatch");
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] - tb[i];
  return make_node<SubNode>(g, {a, b}, std::move(out));
}

Value neg(Value a) {
  Graph* g = same_graph({a});
  const Tensor& ta = g->value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = -ta[i];
  return make_node<NegNode>(g, {a}, std::move(out));
}

Value mul(Value a, Value b) {
  Graph* g = same_graph({a, b});
  const Tensor& ta = g->value(a);
  const Tensor& tb = g->value(b);
  require(ta.shape() == tb.shape(), "mul shape mismatch");
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = ta[i] * tb[i];
  return make_node<MulNode>(g, {a, b}, std::move(out));
}

Value scale(Value a, double c) {
  Graph* g = same_graph({a});
  const Tensor& ta = g->value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = c * ta[i];
  auto v = make_node<ScaleNode>(g, {a}, std::move(out));
  static_cast<ScaleNode&>(g->node(v.id)).c = c;
  return v;
}

Value scale_by(Value a, Value s) {
  Graph* g = same_graph({a, s});
  const Tensor& ta = g->value(a);
  const Tensor& ts = g->value(s);
  require(ts.numel() == 1, "scale_by expects scalar node");
  Tensor out(ta.shape());
  const double sv = ts[0];
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = sv * ta[i];
  return make_node<ScaleByNode>(g, {a, s}, std::move(out));
}

Value matmul(Value a, Value b) {
  Graph* g = same_graph({a, b});
  const Tensor& ta = g->value(a);
  const Tensor& tb = g->value(b);
  require(ta.shape().rank == 2 && tb.shape().rank == 2, "matmul expects rank-2 operands");
  require(ta.shape()[1] == tb.shape()[0], "matmul inner dimension mismatch");
  const auto m = ta.shape()[0], k = ta.shape()[1], n = tb.shape()[1];
  Tensor out(Shape{m, n});
  ConstMatMap A(ta.data(), m, k), B(tb.data(), k, n);
  MatMap C(out.mutable_data(), m, n);
  C.noalias() = A * B;
  return make_node<MatmulNode>(g, {a, b}, std::move(out));
}

Value dense(Value x, Value w, Value b) {
  Graph* g = same_graph({x, w, b});
  const Tensor& tx = g->value(x);
  const Tensor& tw = g->value(w);
  const Tensor& tb = g->value(b);
  require(tw.shape().rank == 2, "dense weights must be a matrix");
  const auto m = tw.shape()[0], n = tw.shape()[1];
  require(tx.numel() == n, "dense input length mismatch");
  require(tb.numel() == m, "dense bias length mismatch");
  Tensor out(Shape{m});
  ConstMatMap W(tw.data(), m, n);
  Eigen::Map<const Eigen::VectorXd> X(tx.data(), n), B(tb.data(), m);
  Eigen::Map<Eigen::VectorXd> Y(out.mutable_data(), m);
  Y.noalias() = W * X + B;
  return make_node<DenseNode>(g, {x, w, b}, std::move(out));
}

Value conv2d(Value x, Value kernels, Value bias) {
  Graph* g = same_graph({x, kernels, bias});
  const ConvDims d = conv_dims(g->value(x).shape(), g->value(kernels).shape(), false);
  require(g->value(bias).numel() == d.cout, "conv bias length mismatch");
  Tensor out = Conv2dNode::forward(g->value(x), g->value(kernels), g->value(bias), d);
  auto v = make_node<Conv2dNode>(g, {x, kernels, bias}, std::move(out));
  static_cast<Conv2dNode&>(g->node(v.id)).dims = d;
  return v;
}

Value depthwise_conv2d(Value x, Value kernels, Value bias) {
  Graph* g = same_graph({x, kernels, bias});
  const ConvDims d = conv_dims(g->value(x).shape(), g->value(kernels).shape(), true);
  require(g->value(bias).numel() == d.cin, "depthwise bias length mismatch");
  Tensor out = DepthwiseConv2dNode::forward(g->value(x), g->value(kernels), g->value(bias), d);
  auto v = make_node<DepthwiseConv2dNode>(g, {x, kernels, bias}, std::move(out));
  static_cast<DepthwiseConv2dNode&>(g->node(v.id)).dims = d;
  return v;
}

Value leaky_relu(Value x, double slope) {
  Graph* g = same_graph({x});
  const Tensor& tx = g->value(x);
  Tensor out(tx.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = tx[i] >= 0.0 ? tx[i] : slope * tx[i];
  auto v = make_node<LeakyReluNode>(g, {x}, std::move(out));
  static_cast<LeakyReluNode&>(g->node(v.id)).slope = slope;
  return v;
}

Value pool_reduce(Value x, const std::vector<int>& axes, PoolMode mode) {
  Graph* g = same_graph({x});
  const Tensor& tx = g->value(x);
  const Shape& s = tx.shape();
  bool reduce[4] = {false, false, false, false};
  for (int a : axes) {
    require(a >= 0 && a < s.rank, "pool axis out of range");
    reduce[a] = true;
  }
  Shape os;
  os.rank = 0;
  for (int i = 0; i < s.rank; ++i)
    if (!reduce[i]) os.d[static_cast<size_t>(os.rank++)] = s[i];
  if (os.rank == 0) os = Shape{1};

  std::int64_t group = 1;
  for (int i = 0; i < s.rank; ++i)
    if (reduce[i]) group *= s[i];

  // map each input flat index to its output flat index
  std::vector<std::int64_t> out_of_in(static_cast<size_t>(tx.numel()));
  {
    std::int64_t strides[4] = {0, 0, 0, 0};
    std::int64_t acc = 1;
    for (int i = s.rank - 1; i >= 0; --i) {
      strides[i] = acc;
      acc *= s[i];
    }
    std::int64_t ostrides[4] = {0, 0, 0, 0};
    acc = 1;
    for (int i = s.rank - 1; i >= 0; --i) {
      if (reduce[i]) continue;
      ostrides[i] = acc;
      acc *= s[i];
    }
    for (std::int64_t flat = 0; flat < tx.numel(); ++flat) {
      std::int64_t rem = flat, o = 0;
      for (int i = 0; i < s.rank; ++i) {
        const std::int64_t c = rem / strides[i];
        rem %= strides[i];
        if (!reduce[i]) o += c * ostrides[i];
      }
      out_of_in[static_cast<size_t>(flat)] = o;
    }
  }

  Tensor out(os);
  std::vector<std::int64_t> argmax;
  if (mode == PoolMode::kAvg) {
    for (std::int64_t i = 0; i < tx.numel(); ++i) out[out_of_in[static_cast<size_t>(i)]] += tx[i];
    const double inv = 1.0 / static_cast<double>(group);
    for (std::int64_t o = 0; o < out.numel(); ++o) out[o] *= inv;
  } else {
    argmax.assign(static_cast<size_t>(out.numel()), -1);
    // ties resolved toward the lowest flat index by strict inequality
    for (std::int64_t i = 0; i < tx.numel(); ++i) {
      const std::int64_t o = out_of_in[static_cast<size_t>(i)];
      if (argmax[static_cast<size_t>(o)] < 0 || tx[i] > out[o]) {
        out[o] = tx[i];
        argmax[static_cast<size_t>(o)] = i;
      }
    }
  }
  auto v = make_node<PoolNode>(g, {x}, std::move(out));
  auto& n = static_cast<PoolNode&>(g->node(v.id));
  n.axes = axes;
  n.mode = mode;
  n.group = group;
  n.argmax = std::move(argmax);
  if (mode == PoolMode::kAvg) n.out_index_of_in = std::move(out_of_in);
  return v;
}

Value soft_threshold(Value re, Value im, Value l1, Value l2, Value sigma) {
  Graph* g = same_graph({re, im, l1, l2, sigma});
  const Tensor& tr = g->value(re);
  const Tensor& ti = g->value(im);
  require(tr.shape() == ti.shape(), "soft_threshold re/im shape mismatch");
  require(g->value(l1).numel() == 1 && g->value(l2).numel() == 1 &&
              g->value(sigma).numel() == 1,
          "soft_threshold parameters must be scalars");
  const double a1 = g->value(l1)[0];
  const double t = g->value(l2)[0] * g->value(sigma)[0];
  if (g->value(sigma)[0] < 0.0) throw std::invalid_argument("soft_threshold sigma < 0");
  const std::int64_t n = tr.numel();
  Shape os;
  os.rank = std::min(4, tr.shape().rank + 1);
  require(tr.shape().rank + 1 <= 4, "soft_threshold output rank > 4");
  os.d[0] = 2;
  for (int i = 0; i < tr.shape().rank; ++i) os.d[static_cast<size_t>(i + 1)] = tr.shape()[i];
  Tensor out(os);
  for (std::int64_t i = 0; i < n; ++i) {
    const double m = std::hypot(tr[i], ti[i]);
    double s = 0.0;
    if (m > 0.0) s = a1 * std::max(m - t, 0.0) / m;
    out[i] = s * tr[i];
    out[n + i] = s * ti[i];
  }
  return make_node<SoftThresholdNode>(g, {re, im, l1, l2, sigma}, std::move(out));
}

Value shrink_active_count(Value re, Value im, Value l2, Value sigma) {
  Graph* g = same_graph({re, im, l2, sigma});
  const Tensor& tr = g->value(re);
  const Tensor& ti = g->value(im);
  const double t = g->value(l2)[0] * g->value(sigma)[0];
  double count = 0.0;
  for (std::int64_t i = 0; i < tr.numel(); ++i)
    if (std::hypot(tr[i], ti[i]) > t) count += 1.0;
  return make_node<ActiveCountNode>(g, {re, im, l2, sigma}, Tensor::scalar(count));
}

Value soft_threshold_rows(Value re, Value im, Value l1, Value l2, Value sigma) {
  Graph* g = same_graph({re, im, l1, l2, sigma});
  const Tensor& tr = g->value(re);
  const Tensor& ti = g->value(im);
  require(tr.shape() == ti.shape() && tr.shape().rank == 2,
          "soft_threshold_rows expects matching [G,K] inputs");
  if (g->value(sigma)[0] < 0.0) throw std::invalid_argument("soft_threshold sigma < 0");
  const double a1 = g->value(l1)[0];
  const double t = g->value(l2)[0] * g->value(sigma)[0];
  const std::int64_t rows = tr.shape()[0], cols = tr.shape()[1], n = rows * cols;
  Tensor out(Shape{2, rows, cols});
  for (std::int64_t j = 0; j < rows; ++j) {
    double m2 = 0.0;
    for (std::int64_t k = 0; k < cols; ++k) {
      const std::int64_t idx = j * cols + k;
      m2 += tr[idx] * tr[idx] + ti[idx] * ti[idx];
    }
    const double m = std::sqrt(m2);
    const double s = (m > 0.0) ? a1 * std::max(m - t, 0.0) / m : 0.0;
    for (std::int64_t k = 0; k < cols; ++k) {
      const std::int64_t idx = j * cols + k;
      out[idx] = s * tr[idx];
      out[n + idx] = s * ti[idx];
    }
  }
  return make_node<SoftThresholdRowsNode>(g, {re, im, l1, l2, sigma}, std::move(out));
}

Value shrink_active_count_rows(Value re, Value im, Value l2, Value sigma) {
  Graph* g = same_graph({re, im, l2, sigma});
  const Tensor& tr = g->value(re);
  const Tensor& ti = g->value(im);
  require(tr.shape().rank == 2, "shrink_active_count_rows expects [G,K]");
  const double t = g->value(l2)[0] * g->value(sigma)[0];
  const std::int64_t rows = tr.shape()[0], cols = tr.shape()[1];
  double count = 0.0;
  for (std::int64_t j = 0; j < rows; ++j) {
    double m2 = 0.0;
    for (std::int64_t k = 0; k < cols; ++k) {
      const std::int64_t idx = j * cols + k;
      m2 += tr[idx] * tr[idx] + ti[idx] * ti[idx];
    }
    if (std::sqrt(m2) > t) count += 1.0;
  }
  return make_node<ActiveCountNode>(g, {re, im, l2, sigma}, Tensor::scalar(count));
}

Value part(Value x, std::int64_t index) {
  Graph* g = same_graph({x});
  const Tensor& tx = g->value(x);
  const Shape& s = tx.shape();
  require(s.rank >= 2, "part requires rank >= 2");
  require(index >= 0 && index < s[0], "part index out of range");
  Shape os;
  os.rank = s.rank - 1;
  for (int i = 1; i < s.rank; ++i) os.d[static_cast<size_t>(i - 1)] = s[i];
  Tensor out(os);
  const std::int64_t block = out.numel();
  const double* src = tx.data() + index * block;
  std::copy(src, src + block, out.mutable_data());
  auto v = make_node<PartNode>(g, {x}, std::move(out));
  static_cast<PartNode&>(g->node(v.id)).index = index;
  return v;
}

Value reshape(Value x, Shape s) {
  Graph* g = same_graph({x});
  Tensor out = g->value(x).reshape(s);
  return make_node<ReshapeNode>(g, {x}, std::move(out));
}

Value concat2(Value a, Value b, int axis) {
  Graph* g = same_graph({a, b});
  const Tensor& ta = g->value(a);
  const Tensor& tb = g->value(b);
  const Shape& sa = ta.shape();
  const Shape& sb = tb.shape();
  require(sa.rank == sb.rank, "concat rank mismatch");
  require(axis >= 0 && axis < sa.rank, "concat axis out of range");
  for (int i = 0; i < sa.rank; ++i)
    if (i != axis) require(sa[i] == sb[i], "concat extent mismatch");
  Shape os = sa;
  os.d[static_cast<size_t>(axis)] = sa[axis] + sb[axis];
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= sa[i];
  for (int i = axis + 1; i < sa.rank; ++i) inner *= sa[i];
  const std::int64_t block_a = sa[axis] * inner, block_b = sb[axis] * inner;
  Tensor out(os);
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy(ta.data() + o * block_a, ta.data() + (o + 1) * block_a,
              out.mutable_data() + o * (block_a + block_b));
    std::copy(tb.data() + o * block_b, tb.data() + (o + 1) * block_b,
              out.mutable_data() + o * (block_a + block_b) + block_a);
  }
  auto v = make_node<Concat2Node>(g, {a, b}, std::move(out));
  auto& n = static_cast<Concat2Node&>(g->node(v.id));
  n.axis = axis;
  n.outer = outer;
  n.block_a = block_a;
  n.block_b = block_b;
  return v;
}

Value fnorm(Value re, Value im) {
  Graph* g = same_graph({re, im});
  const Tensor& tr = g->value(re);
  const Tensor& ti = g->value(im);
  require(tr.shape() == ti.shape(), "fnorm shape mismatch");
  double ss = 0.0;
  for (std::int64_t i = 0; i < tr.numel(); ++i) ss += tr[i] * tr[i] + ti[i] * ti[i];
  return make_node<FNormNode>(g, {re, im}, Tensor::scalar(std::sqrt(ss)));
}

Value sumsq(Value a) {
  Graph* g = same_graph({a});
  const Tensor& ta = g->value(a);
  double ss = 0.0;
  for (std::int64_t i = 0; i < ta.numel(); ++i) ss += ta[i] * ta[i];
  return make_node<SumSqNode>(g, {a}, Tensor::scalar(ss));
}

Value sumsq2(Value a, Value b) {
  Graph* g = same_graph({a, b});
  const Tensor& ta = g->value(a);
  const Tensor& tb = g->value(b);
  double ss = 0.0;
  for (std::int64_t i = 0; i < ta.numel(); ++i) ss += ta[i] * ta[i];
  for (std::int64_t i = 0; i < tb.numel(); ++i) ss += tb[i] * tb[i];
  return make_node<SumSqNode>(g, {a, b}, Tensor::scalar(ss));
}

Value corr_to_planes(Value x, std::int64_t rows, std::int64_t cols) {
  Graph* g = same_graph({x});
  const Tensor& tx = g->value(x);
  require(tx.shape().rank == 2, "corr_to_planes expects [G,K]");
  require(tx.shape()[0] == rows * cols, "corr_to_planes rows*cols != G");
  const std::int64_t K = tx.shape()[1];
  Tensor out(Shape{K, rows, cols});
  for (std::int64_t k = 0; k < K; ++k)
    for (std::int64_t i = 0; i < rows; ++i)
      for (std::int64_t j = 0; j < cols; ++j)
        out.at(k, i, j) = tx.at(j * rows + i, k);
  auto v = make_node<CorrToPlanesNode>(g, {x}, std::move(out));
  auto& n = static_cast<CorrToPlanesNode&>(g->node(v.id));
  n.rows = rows;
  n.cols = cols;
  return v;
}

Value planes_to_corr(Value x) {
  Graph* g = same_graph({x});
  const Tensor& tx = g->value(x);
  require(tx.shape().rank == 3, "planes_to_corr expects [K,rows,cols]");
  const std::int64_t K = tx.shape()[0], rows = tx.shape()[1], cols = tx.shape()[2];
  Tensor out(Shape{rows * cols, K});
  for (std::int64_t k = 0; k < K; ++k)
    for (std::int64_t i = 0; i < rows; ++i)
      for (std::int64_t j = 0; j < cols; ++j)
        out.at(j * rows + i, k) = tx.at(k, i, j);
  return make_node<PlanesToCorrNode>(g, {x}, std::move(out));
}

Value scale_planes(Value x, Value s) {
  Graph* g = same_graph({x, s});
  const Tensor& tx = g->value(x);
  const Tensor& ts = g->value(s);
  require(tx.shape().rank == 4, "scale_planes expects [P,K,H,W]");
  require(ts.shape().rank == 2 && ts.shape()[0] == tx.shape()[1] &&
              ts.shape()[1] == tx.shape()[0],
          "scale_planes expects factors [K,P]");
  const std::int64_t P = tx.shape()[0], K = tx.shape()[1],
                     plane = tx.shape()[2] * tx.shape()[3];
  Tensor out(tx.shape());
  for (std::int64_t p = 0; p < P; ++p)
    for (std::int64_t k = 0; k < K; ++k) {
      const double sv = ts.at(k, p);
      const std::int64_t off = (p * K + k) * plane;
      for (std::int64_t i = 0; i < plane; ++i) out[off + i] = tx[off + i] * sv;
    }
  return make_node<ScalePlanesNode>(g, {x, s}, std::move(out));
}

Value scale_spatial(Value x, Value m) {
  Graph* g = same_graph({x, m});
  const Tensor& tx = g->value(x);
  const Tensor& tm = g->value(m);
  require(tx.shape().rank == 4, "scale_spatial expects [P,K,H,W]");
  require(tm.numel() == tx.shape()[0] * tx.shape()[2] * tx.shape()[3],
          "scale_spatial map extent mismatch");
  const std::int64_t P = tx.shape()[0], K = tx.shape()[1],
                     plane = tx.shape()[2] * tx.shape()[3];
  Tensor out(tx.shape());
  for (std::int64_t p = 0; p < P; ++p) {
    const double* mp = tm.data() + p * plane;
    for (std::int64_t k = 0; k < K; ++k) {
      const std::int64_t off = (p * K + k) * plane;
      for (std::int64_t i = 0; i < plane; ++i) out[off + i] = tx[off + i] * mp[i];
    }
  }
  return make_node<ScaleSpatialNode>(g, {x, m}, std::move(out));
}

}  // namespace irsce::tl
