#include "irsce/net_da.hpp"

#include <cmath>
#include <stdexcept>

namespace irsce {

namespace {

tl::Tensor he_tensor(tl::Shape shape, std::int64_t fan_in, Rng& rng) {
  tl::Tensor t(shape);
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = sd * rng.normal();
  return t;
}

}  // namespace

DaParams DaParams::zeros(int n_sc, int layers) {
  if (layers < 1) throw std::invalid_argument("DnCNN needs at least one layer");
  DaParams p;
  p.n_sc = n_sc;
  p.layers = layers;
  const std::int64_t k = n_sc;
  for (int l = 0; l < layers; ++l) {
    p.conv_k.emplace_back(tl::Shape{k, k, 3, 3});
    p.conv_b.emplace_back(tl::Shape{k});
  }
  p.f1_w = tl::Tensor(tl::Shape{2 * k, 4 * k});
  p.f1_b = tl::Tensor(tl::Shape{2 * k});
  p.f2_w = tl::Tensor(tl::Shape{2 * k, 2 * k});
  p.f2_b = tl::Tensor(tl::Shape{2 * k});
  p.s1_k = tl::Tensor(tl::Shape{k, k, 3, 3});
  p.s1_b = tl::Tensor(tl::Shape{k});
  p.s2_k = tl::Tensor(tl::Shape{1, 2, 3, 3});
  p.s2_b = tl::Tensor(tl::Shape{1});
  return p;
}

DaParams DaParams::he_init(int n_sc, int layers, Rng& rng) {
  DaParams p = zeros(n_sc, layers);
  const std::int64_t k = n_sc;
  for (int l = 0; l < layers; ++l) p.conv_k[static_cast<size_t>(l)] = he_tensor(tl::Shape{k, k, 3, 3}, k * 9, rng);
  p.f1_w = he_tensor(tl::Shape{2 * k, 4 * k}, 4 * k, rng);
  p.f2_w = he_tensor(tl::Shape{2 * k, 2 * k}, 2 * k, rng);
  p.s1_k = he_tensor(tl::Shape{k, k, 3, 3}, k * 9, rng);
  p.s2_k = he_tensor(tl::Shape{1, 2, 3, 3}, 2 * 9, rng);
  return p;
}

std::int64_t DaParams::param_count() const {
  std::int64_t n = 0;
  for (const auto& t : conv_k) n += t.numel();
  for (const auto& t : conv_b) n += t.numel();
  n += f1_w.numel() + f1_b.numel() + f2_w.numel() + f2_b.numel();
  n += s1_k.numel() + s1_b.numel() + s2_k.numel() + s2_b.numel();
  return n;
}

std::int64_t DaParams::dncnn_conv_param_count() const {
  std::int64_t n = 0;
  for (const auto& t : conv_k) n += t.numel();
  for (const auto& t : conv_b) n += t.numel();
  return n;
}

void DaParams::collect(const std::string& prefix, ParamRefs& out) {
  for (size_t l = 0; l < conv_k.size(); ++l) {
    out.emplace_back(prefix + "dncnn" + std::to_string(l) + ".k", &conv_k[l]);
    out.emplace_back(prefix + "dncnn" + std::to_string(l) + ".b", &conv_b[l]);
  }
  out.emplace_back(prefix + "fan1.w", &f1_w);
  out.emplace_back(prefix + "fan1.b", &f1_b);
  out.emplace_back(prefix + "fan2.w", &f2_w);
  out.emplace_back(prefix + "fan2.b", &f2_b);
  out.emplace_back(prefix + "san1.k", &s1_k);
  out.emplace_back(prefix + "san1.b", &s1_b);
  out.emplace_back(prefix + "san2.k", &s2_k);
  out.emplace_back(prefix + "san2.b", &s2_b);
}

MdaParams MdaParams::zeros(int n_sc, int blocks) {
  if (blocks < 1) throw std::invalid_argument("MDA needs at least one block");
  MdaParams p;
  p.n_sc = n_sc;
  p.blocks = blocks;
  const std::int64_t k = n_sc;
  for (int j = 0; j < blocks; ++j) {
    p.dw_k.emplace_back(tl::Shape{k, 3, 3});
    p.dw_b.emplace_back(tl::Shape{k});
    p.pw_k.emplace_back(tl::Shape{k, k, 1, 1});
    p.pw_b.emplace_back(tl::Shape{k});
  }
  p.sa_k = tl::Tensor(tl::Shape{1, 2, 1, 1});
  p.sa_b = tl::Tensor(tl::Shape{1});
  return p;
}

MdaParams MdaParams::he_init(int n_sc, int blocks, Rng& rng) {
  MdaParams p = zeros(n_sc, blocks);
  const std::int64_t k = n_sc;
  for (int j = 0; j < blocks; ++j) {
    p.dw_k[static_cast<size_t>(j)] = he_tensor(tl::Shape{k, 3, 3}, 9, rng);
    p.pw_k[static_cast<size_t>(j)] = he_tensor(tl::Shape{k, k, 1, 1}, k, rng);
  }
  p.sa_k = he_tensor(tl::Shape{1, 2, 1, 1}, 2, rng);
  return p;
}

std::int64_t MdaParams::param_count() const {
  std::int64_t n = 0;
  for (const auto& t : dw_k) n += t.numel();
  for (const auto& t : dw_b) n += t.numel();
  for (const auto& t : pw_k) n += t.numel();
  for (const auto& t : pw_b) n += t.numel();
  n += sa_k.numel() + sa_b.numel();
  return n;
}

std::int64_t MdaParams::block_conv_param_count() const {
  std::int64_t n = 0;
  for (const auto& t : dw_k) n += t.numel();
  for (const auto& t : dw_b) n += t.numel();
  for (const auto& t : pw_k) n += t.numel();
  for (const auto& t : pw_b) n += t.numel();
  return n;
}

void MdaParams::collect(const std::string& prefix, ParamRefs& out) {
  for (size_t j = 0; j < dw_k.size(); ++j) {
    out.emplace_back(prefix + "mda" + std::to_string(j) + ".dw.k", &dw_k[j]);
    out.emplace_back(prefix + "mda" + std::to_string(j) + ".dw.b", &dw_b[j]);
    out.emplace_back(prefix + "mda" + std::to_string(j) + ".pw.k", &pw_k[j]);
    out.emplace_back(prefix + "mda" + std::to_string(j) + ".pw.b", &pw_b[j]);
  }
  out.emplace_back(prefix + "sa.k", &sa_k);
  out.emplace_back(prefix + "sa.b", &sa_b);
}

DaVars bind_da(tl::Graph& g, const DaParams& p, bool trainable) {
  auto put = [&](const tl::Tensor& t) { return trainable ? g.leaf(t) : g.constant(t); };
  DaVars v;
  for (const auto& t : p.conv_k) v.conv_k.push_back(put(t));
  for (const auto& t : p.conv_b) v.conv_b.push_back(put(t));
  v.f1_w = put(p.f1_w);
  v.f1_b = put(p.f1_b);
  v.f2_w = put(p.f2_w);
  v.f2_b = put(p.f2_b);
  v.s1_k = put(p.s1_k);
  v.s1_b = put(p.s1_b);
  v.s2_k = put(p.s2_k);
  v.s2_b = put(p.s2_b);
  return v;
}

MdaVars bind_mda(tl::Graph& g, const MdaParams& p, bool trainable) {
  auto put = [&](const tl::Tensor& t) { return trainable ? g.leaf(t) : g.constant(t); };
  MdaVars v;
  for (const auto& t : p.dw_k) v.dw_k.push_back(put(t));
  for (const auto& t : p.dw_b) v.dw_b.push_back(put(t));
  for (const auto& t : p.pw_k) v.pw_k.push_back(put(t));
  for (const auto& t : p.pw_b) v.pw_b.push_back(put(t));
  v.sa_k = put(p.sa_k);
  v.sa_b = put(p.sa_b);
  return v;
}

tl::Value complex_to_planes(CVal c, std::int64_t rows, std::int64_t cols) {
  using namespace tl;
  Value re_p = corr_to_planes(c.re, rows, cols);  // [K, rows, cols]
  Value im_p = corr_to_planes(c.im, rows, cols);
  const Shape& s = c.re.graph->value(re_p).shape();
  const Shape s4{1, s[0], s[1], s[2]};
  return concat2(reshape(re_p, s4), reshape(im_p, s4), 0);
}

CVal planes_to_complex(tl::Value planes) {
  using namespace tl;
  return {planes_to_corr(part(planes, 0)), planes_to_corr(part(planes, 1))};
}

tl::Value dncnn(tl::Value ca, const DaVars& v, double slope) {
  using namespace tl;
  Value t = ca;
  const size_t ld = v.conv_k.size();
  for (size_t l = 0; l + 1 < ld; ++l)
    t = leaky_relu(conv2d(t, v.conv_k[l], v.conv_b[l]), slope);
  Value residual = conv2d(t, v.conv_k[ld - 1], v.conv_b[ld - 1]);  // no activation
  return sub(ca, residual);
}

FanOut fan(tl::Value gd, const DaVars& v, double slope) {
  using namespace tl;
  const Shape& s = gd.graph->value(gd).shape();  // [2, K, H, W]
  const std::int64_t k = s[1];
  Value zavg = pool_reduce(gd, {2, 3}, PoolMode::kAvg);  // [2, K]
  Value zmax = pool_reduce(gd, {2, 3}, PoolMode::kMax);
  Value stacked = concat2(reshape(zavg, Shape{2 * k}), reshape(zmax, Shape{2 * k}), 0);
  Value h = leaky_relu(dense(stacked, v.f1_w, v.f1_b), slope);
  Value z = dense(h, v.f2_w, v.f2_b);            // linear output stage
  Value weights = reshape(z, Shape{k, 2});       // z'_c[k] in R^2
  Value maps = add(gd, scale_planes(gd, weights));
  return {maps, weights};
}

tl::Value san(tl::Value zc, tl::Value gd, const DaVars& v, double slope) {
  using namespace tl;
  const Shape& s = zc.graph->value(zc).shape();  // [2, K, H, W]
  Value zs = leaky_relu(conv2d(zc, v.s1_k, v.s1_b), slope);
  Value savg = pool_reduce(zs, {1}, PoolMode::kAvg);  // [2, H, W]
  Value smax = pool_reduce(zs, {1}, PoolMode::kMax);
  const Shape s4{2, 1, s[2], s[3]};
  Value cat = concat2(reshape(savg, s4), reshape(smax, s4), 1);  // [2, 2, H, W]
  Value zss = leaky_relu(conv2d(cat, v.s2_k, v.s2_b), slope);    // [2, 1, H, W]
  return add(gd, scale_spatial(zc, zss));
}

CVal da_block(CVal c, const DaVars& v, std::int64_t rows, std::int64_t cols, double slope) {
  tl::Value ca = complex_to_planes(c, rows, cols);
  tl::Value gd = dncnn(ca, v, slope);
  FanOut f = fan(gd, v, slope);
  tl::Value gm = san(f.maps, gd, v, slope);
  return planes_to_complex(gm);
}

tl::Value mda(tl::Value ca, const MdaVars& v, double slope) {
  using namespace tl;
  Value t = ca;
  Value acc;
  for (size_t j = 0; j < v.dw_k.size(); ++j) {
    t = leaky_relu(depthwise_conv2d(t, v.dw_k[j], v.dw_b[j]), slope);
    t = leaky_relu(conv2d(t, v.pw_k[j], v.pw_b[j]), slope);
    acc = j == 0 ? t : add(acc, t);
  }
  Value gd = sub(ca, acc);
  // lightweight spatial attention: subcarrier pooling and one 1x1 conv
  const Shape& s = gd.graph->value(gd).shape();
  Value savg = pool_reduce(gd, {1}, PoolMode::kAvg);
  Value smax = pool_reduce(gd, {1}, PoolMode::kMax);
  const Shape s4{2, 1, s[2], s[3]};
  Value cat = concat2(reshape(savg, s4), reshape(smax, s4), 1);
  Value map = leaky_relu(conv2d(cat, v.sa_k, v.sa_b), slope);
  return add(gd, scale_spatial(gd, map));
}

CVal mda_block(CVal c, const MdaVars& v, double slope) {
  const std::int64_t g = c.re.graph->value(c.re).shape()[0];
  const auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(g))));
  if (side * side != g)
    throw std::invalid_argument("MDA requires G_i to be a perfect square");
  tl::Value ca = complex_to_planes(c, side, side);
  return planes_to_complex(mda(ca, v, slope));
}

}  // namespace irsce
