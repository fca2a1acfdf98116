#include "irsce/net_rlamp.hpp"

#include <cmath>
#include <stdexcept>

#include "irsce/snapshot.hpp"

namespace irsce {

std::string net_kind_name(NetKind k) {
  switch (k) {
    case NetKind::kLamp: return "lamp";
    case NetKind::kDaRlamp: return "da-rlamp";
    case NetKind::kMdaRlamp: return "mda-rlamp";
  }
  return "lamp";
}

NetKind net_kind_from(const std::string& name) {
  if (name == "lamp") return NetKind::kLamp;
  if (name == "da-rlamp") return NetKind::kDaRlamp;
  if (name == "mda-rlamp") return NetKind::kMdaRlamp;
  throw std::invalid_argument("unknown network type: " + name);
}

void NetworkParams::collect(ParamRefs& out) {
  for (size_t i = 0; i < beta.size(); ++i) {
    out.emplace_back("beta" + std::to_string(i) + ".re", &beta[i].re);
    out.emplace_back("beta" + std::to_string(i) + ".im", &beta[i].im);
  }
  for (size_t n = 0; n < lambda.size(); ++n) {
    out.emplace_back("lambda" + std::to_string(n) + ".1", &lambda[n].l1);
    out.emplace_back("lambda" + std::to_string(n) + ".2", &lambda[n].l2);
    out.emplace_back("lambda" + std::to_string(n) + ".b", &lambda[n].lb);
  }
  if (kind == NetKind::kDaRlamp) da.collect("da.", out);
  if (kind == NetKind::kMdaRlamp) mda.collect("mda.", out);
}

NetworkParams NetworkParams::init(NetKind kind, int layers, int block_layers,
                                  const MatrixXcd& upsilon, int grid_rows, int grid_cols,
                                  int grid_ue, int n_sc, std::uint64_t seed) {
  if (layers < 1) throw std::invalid_argument("network needs at least one layer");
  NetworkParams p;
  p.kind = kind;
  p.layers = layers;
  p.grid_rows = grid_rows;
  p.grid_cols = grid_cols;
  p.grid_ue = grid_ue;
  p.n_sc = n_sc;
  p.m = static_cast<int>(upsilon.rows());
  if (upsilon.cols() != p.dict_cols())
    throw std::invalid_argument("Upsilon column count does not match the grid dimensions");

  const MatrixXcd beta0 = upsilon.adjoint();
  const int beta_count = (kind == NetKind::kMdaRlamp) ? 1 : layers;
  for (int i = 0; i < beta_count; ++i) p.beta.push_back(ctensor_from(beta0));
  p.lambda.assign(static_cast<size_t>(layers), LayerLambda{});

  Rng rng(substream(seed, "block-init"));
  if (kind == NetKind::kDaRlamp) p.da = DaParams::he_init(n_sc, block_layers, rng);
  if (kind == NetKind::kMdaRlamp) p.mda = MdaParams::he_init(n_sc, block_layers, rng);
  return p;
}

BoundNet bind_network(tl::Graph& g, const NetworkParams& p, const TrainSelection& sel) {
  BoundNet b;
  for (size_t i = 0; i < p.beta.size(); ++i) {
    const bool train = i < sel.beta.size() && sel.beta[i];
    b.beta.push_back({train ? g.leaf(p.beta[i].re) : g.constant(p.beta[i].re),
                      train ? g.leaf(p.beta[i].im) : g.constant(p.beta[i].im)});
  }
  for (size_t n = 0; n < p.lambda.size(); ++n) {
    const bool train = n < sel.lambda.size() && sel.lambda[n];
    auto put = [&](const tl::Tensor& t) { return train ? g.leaf(t) : g.constant(t); };
    b.lambda.push_back({put(p.lambda[n].l1), put(p.lambda[n].l2), put(p.lambda[n].lb)});
  }
  if (p.kind == NetKind::kDaRlamp) b.da = bind_da(g, p.da, sel.block_weights);
  if (p.kind == NetKind::kMdaRlamp) b.mda = bind_mda(g, p.mda, sel.block_weights);
  return b;
}

namespace {

// Complex shrinkage on the tape plus the Onsager coefficient; entries with
// |r| = 0 map to 0.
struct ShrinkResult {
  CVal eta;
  tl::Value b;
};

ShrinkResult shrink_on_tape(tl::Graph& g, const NetworkParams& p, CVal r,
                            const std::array<tl::Value, 3>& lam, tl::Value sigma) {
  using namespace tl;
  Value stacked, count;
  if (p.shrink_mode == ShrinkMode::kEntrywise) {
    stacked = soft_threshold(r.re, r.im, lam[0], lam[1], sigma);
    count = shrink_active_count(r.re, r.im, lam[1], sigma);
  } else {
    stacked = soft_threshold_rows(r.re, r.im, lam[0], lam[1], sigma);
    count = shrink_active_count_rows(r.re, r.im, lam[1], sigma);
  }
  const double den = p.onsager == OnsagerNorm::kSqrtM ? std::sqrt(static_cast<double>(p.m))
                                                      : static_cast<double>(p.m);
  Value b = scale(mul(mul(lam[2], lam[0]), count), 1.0 / den);
  (void)g;
  return {{part(stacked, 0), part(stacked, 1)}, b};
}

}  // namespace

ForwardTrace rlamp_forward(tl::Graph& g, const NetworkParams& p, const BoundNet& b,
                           CVal y, CVal upsilon, int depth, bool want_next_r) {
  using namespace tl;
  if (depth < 0 || depth > p.layers)
    throw std::invalid_argument("forward depth out of range");
  ForwardTrace t;
  t.corr = cmatmul(b.beta[0], y);  // C = beta_1 Y via the real block form
  CVal r1 = t.corr;
  if (p.kind == NetKind::kDaRlamp)
    r1 = da_block(t.corr, b.da, p.grid_rows, p.grid_cols, p.leaky_slope);
  else if (p.kind == NetKind::kMdaRlamp)
    r1 = mda_block(t.corr, b.mda, p.leaky_slope);
  t.r.push_back(r1);
  t.v.push_back(y);

  CVal xprev{};
  bool have_x = false;
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(p.m));
  for (int n = 1; n <= depth; ++n) {
    try {
      Value sigma = scale(fnorm(t.v.back().re, t.v.back().im), inv_sqrt_m);
      ShrinkResult s = shrink_on_tape(g, p, t.r.back(), b.lambda[static_cast<size_t>(n - 1)], sigma);
      CVal xn = (p.residual && have_x) ? cadd(s.eta, xprev) : s.eta;
      CVal vn = cadd(csub(y, cmatmul(upsilon, xn)), cscale_by(t.v.back(), s.b));
      t.xhat.push_back(xn);
      t.v.push_back(vn);
      xprev = xn;
      have_x = true;
      const bool more = n < depth || (want_next_r && n < p.layers);
      if (more) {
        const CVal& beta_next = b.beta[p.shared_beta() ? 0 : static_cast<size_t>(n)];
        t.r.push_back(cadd(xn, cmatmul(beta_next, vn)));
      }
    } catch (const tl::NumericalError& e) {
      throw tl::NumericalError("layer " + std::to_string(n) + ": " + e.what());
    }
  }
  return t;
}

CVal reconstruct(CVal psi, CVal x) { return cmatmul(psi, x); }

MatrixXcd estimate_coefficients(const NetworkParams& p, const MatrixXcd& y,
                                const MatrixXcd& upsilon, int depth) {
  if (depth < 0) depth = p.layers;
  tl::Graph g;
  BoundNet b = bind_network(g, p, TrainSelection::none(p));
  ForwardTrace t = rlamp_forward(g, p, b, cconstant(g, y), cconstant(g, upsilon), depth, false);
  if (depth == 0) return cvalue(g, t.r[0]);
  return cvalue(g, t.xhat.back());
}

MatrixXcd estimate_channel(const NetworkParams& p, const MatrixXcd& y,
                           const MatrixXcd& upsilon, const MatrixXcd& psi, int depth) {
  if (depth < 0) depth = p.layers;
  tl::Graph g;
  BoundNet b = bind_network(g, p, TrainSelection::none(p));
  ForwardTrace t = rlamp_forward(g, p, b, cconstant(g, y), cconstant(g, upsilon), depth, false);
  CVal x = depth == 0 ? t.r[0] : t.xhat.back();
  return cvalue(g, reconstruct(cconstant(g, psi), x));
}

namespace {
constexpr char kManifest[] = "manifest";
}

void save_model(const NetworkParams& p, const std::string& path) {
  Snapshot snap;
  tl::Tensor manifest(tl::Shape{12});
  manifest[0] = static_cast<double>(static_cast<int>(p.kind));
  manifest[1] = p.layers;
  manifest[2] = p.grid_rows;
  manifest[3] = p.grid_cols;
  manifest[4] = p.grid_ue;
  manifest[5] = p.n_sc;
  manifest[6] = p.m;
  manifest[7] = p.residual ? 1.0 : 0.0;
  manifest[8] = p.onsager == OnsagerNorm::kSqrtM ? 0.0 : 1.0;
  manifest[9] = p.shrink_mode == ShrinkMode::kEntrywise ? 0.0 : 1.0;
  manifest[10] = p.leaky_slope;
  manifest[11] = p.kind == NetKind::kDaRlamp
                     ? p.da.layers
                     : (p.kind == NetKind::kMdaRlamp ? p.mda.blocks : 0);
  snap.add(kManifest, manifest);
  ParamRefs refs;
  const_cast<NetworkParams&>(p).collect(refs);
  for (auto& [name, tensor] : refs) snap.add(name, *tensor);
  save_snapshot(snap, path);
}

NetworkParams load_model(const std::string& path) {
  const Snapshot snap = load_snapshot(path);
  const tl::Tensor& manifest = snap.require(kManifest);
  if (manifest.numel() < 12) throw std::runtime_error("model manifest too short");
  NetworkParams p;
  p.kind = static_cast<NetKind>(static_cast<int>(manifest[0]));
  p.layers = static_cast<int>(manifest[1]);
  p.grid_rows = static_cast<int>(manifest[2]);
  p.grid_cols = static_cast<int>(manifest[3]);
  p.grid_ue = static_cast<int>(manifest[4]);
  p.n_sc = static_cast<int>(manifest[5]);
  p.m = static_cast<int>(manifest[6]);
  p.residual = manifest[7] != 0.0;
  p.onsager = manifest[8] == 0.0 ? OnsagerNorm::kSqrtM : OnsagerNorm::kM;
  p.shrink_mode = manifest[9] == 0.0 ? ShrinkMode::kEntrywise : ShrinkMode::kRowGroup;
  p.leaky_slope = manifest[10];
  const int block_layers = static_cast<int>(manifest[11]);

  const int beta_count = p.kind == NetKind::kMdaRlamp ? 1 : p.layers;
  p.beta.resize(static_cast<size_t>(beta_count));
  p.lambda.assign(static_cast<size_t>(p.layers), LayerLambda{});
  if (p.kind == NetKind::kDaRlamp) p.da = DaParams::zeros(p.n_sc, block_layers);
  if (p.kind == NetKind::kMdaRlamp) p.mda = MdaParams::zeros(p.n_sc, block_layers);

  // placeholder shapes for beta before filling from records
  for (auto& b : p.beta) {
    b.re = tl::Tensor(tl::Shape{p.dict_cols(), p.m});
    b.im = tl::Tensor(tl::Shape{p.dict_cols(), p.m});
  }
  ParamRefs refs;
  p.collect(refs);
  for (auto& [name, tensor] : refs) {
    const tl::Tensor& rec = snap.require(name);
    if (rec.shape() != tensor->shape())
      throw std::runtime_error("model record shape mismatch for " + name);
    *tensor = rec;
  }
  return p;
}

}  // namespace irsce
