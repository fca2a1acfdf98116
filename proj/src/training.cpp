#include "irsce/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include "irsce/config.hpp"

namespace irsce {

using nlohmann::json;

Dataset Dataset::slice(int begin, int end) const {
  Dataset out;
  out.cfg = cfg;
  out.seed = seed;
  out.split = split;
  for (int i = begin; i < end && i < count(); ++i) {
    out.y.push_back(y[static_cast<size_t>(i)]);
    out.h.push_back(h[static_cast<size_t>(i)]);
  }
  return out;
}

Dataset gen_dataset(const SystemConfig& cfg, int count, std::uint64_t seed,
                    const std::string& split) {
  cfg.validate();
  const Dictionary dict = build_dictionary(cfg);
  Dataset ds;
  ds.cfg = cfg;
  ds.seed = seed;
  ds.split = split;
  ds.y.reserve(static_cast<size_t>(count));
  ds.h.reserve(static_cast<size_t>(count));
  for (int j = 0; j < count; ++j) {
    Rng rng(substream(seed, "channel", static_cast<std::uint64_t>(j)));
    const ChannelRealization cr = realize_channel(cfg, rng);
    const int ue = j % cfg.n_ue;
    const SensingProblem sp = assemble_problem(cfg, cr, dict, ue, seed,
                                               substream(seed, "sample", static_cast<std::uint64_t>(j)));
    ds.y.push_back(sp.y);
    ds.h.push_back(sp.h_true);
  }
  return ds;
}

namespace {

constexpr char kDatasetMagic[4] = {'I', 'R', 'S', 'D'};
constexpr std::uint16_t kDatasetVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<char*>(b), 4);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f32(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

float get_f32(std::istream& is) {
  const std::uint32_t v = get_u32(is);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

void write_complex_matrix(std::ostream& os, const MatrixXcd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      put_f32(os, static_cast<float>(m(r, c).real()));
      put_f32(os, static_cast<float>(m(r, c).imag()));
    }
}

MatrixXcd read_complex_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  MatrixXcd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = get_f32(is);
      const double im = get_f32(is);
      m(r, c) = {re, im};
    }
  return m;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open dataset for writing: " + path);
  os.write(kDatasetMagic, 4);
  put_u16(os, kDatasetVersion);
  const Eigen::Index y_rows = ds.count() ? ds.y.front().rows() : 0;
  const Eigen::Index h_rows = ds.count() ? ds.h.front().rows() : 0;
  json header;
  header["config"] = system_to_json(ds.cfg);
  header["seed"] = ds.seed;
  header["count"] = ds.count();
  header["split"] = ds.split;
  header["dims"] = {{"y_rows", y_rows}, {"h_rows", h_rows}, {"cols", ds.cfg.n_sc}};
  const std::string text = header.dump();
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (int j = 0; j < ds.count(); ++j) {
    write_complex_matrix(os, ds.y[static_cast<size_t>(j)]);
    write_complex_matrix(os, ds.h[static_cast<size_t>(j)]);
  }
  if (!os) throw std::runtime_error("dataset write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kDatasetMagic, 4) != 0)
    throw std::runtime_error("not a dataset file: " + path);
  const std::uint16_t version = get_u16(is);
  if (version != kDatasetVersion)
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  const std::uint32_t len = get_u32(is);
  std::string text(len, '\0');
  is.read(text.data(), len);
  const json header = json::parse(text);
  Dataset ds;
  ds.cfg = system_from_json(header.at("config"));
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.split = header.at("split").get<std::string>();
  const int count = header.at("count").get<int>();
  const Eigen::Index y_rows = header.at("dims").at("y_rows").get<Eigen::Index>();
  const Eigen::Index h_rows = header.at("dims").at("h_rows").get<Eigen::Index>();
  const Eigen::Index cols = header.at("dims").at("cols").get<Eigen::Index>();
  for (int j = 0; j < count; ++j) {
    ds.y.push_back(read_complex_matrix(is, y_rows, cols));
    ds.h.push_back(read_complex_matrix(is, h_rows, cols));
  }
  if (!is) throw std::runtime_error("truncated dataset: " + path);
  return ds;
}

ProblemMatrices problem_matrices(const SystemConfig& cfg, std::uint64_t seed) {
  const Dictionary dict = build_dictionary(cfg);
  ProblemMatrices pm;
  pm.phi = cfg.hybrid ? build_phi_hybrid(cfg, seed) : build_phi(cfg, seed);
  pm.psi = cfg.hybrid ? dict.psi_hybrid : dict.psi;
  pm.upsilon = pm.phi * pm.psi;
  return pm;
}

double nmse_loss(const MatrixXcd& psi, const std::vector<MatrixXcd>& z,
                 const std::vector<MatrixXcd>& h, int* skipped) {
  if (z.size() != h.size()) throw std::invalid_argument("batch size mismatch");
  double acc = 0.0;
  int used = 0, skip = 0;
  for (size_t j = 0; j < z.size(); ++j) {
    const double denom = h[j].squaredNorm();
    if (denom == 0.0) {
      ++skip;
      continue;
    }
    acc += (psi * z[j] - h[j]).squaredNorm() / denom;
    ++used;
  }
  if (skipped) *skipped = skip;
  return used ? acc / used : 0.0;
}

double loss_linear(const MatrixXcd& psi, const std::vector<MatrixXcd>& r_n,
                   const std::vector<MatrixXcd>& h) {
  return nmse_loss(psi, r_n, h);
}

double loss_nonlinear(const MatrixXcd& psi, const std::vector<MatrixXcd>& x_n,
                      const std::vector<MatrixXcd>& h) {
  return nmse_loss(psi, x_n, h);
}

void adam_step(tl::Tensor& param, const tl::Tensor& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (param.shape() != grad.shape()) throw std::invalid_argument("adam shape mismatch");
  if (state.m.empty()) {
    state.m = tl::Tensor(param.shape(), 0.0);
    state.v = tl::Tensor(param.shape(), 0.0);
    state.t = 0;
  }
  state.t += 1;
  tl::Tensor next = param.clone();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mh = state.m[i] / c1;
    const double vh = state.v[i] / c2;
    next[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
  param = next;
}

namespace {

struct StagedSample {
  tl::CTensorData y, h;
  double h_norm2 = 0.0;
};

struct StagedData {
  std::vector<StagedSample> samples;
  tl::CTensorData psi, upsilon;
};

StagedData stage(const Dataset& ds, const ProblemMatrices& pm) {
  StagedData sd;
  sd.psi = ctensor_from(pm.psi);
  sd.upsilon = ctensor_from(pm.upsilon);
  sd.samples.reserve(static_cast<size_t>(ds.count()));
  for (int j = 0; j < ds.count(); ++j) {
    StagedSample s;
    s.y = ctensor_from(ds.y[static_cast<size_t>(j)]);
    s.h = ctensor_from(ds.h[static_cast<size_t>(j)]);
    s.h_norm2 = ds.h[static_cast<size_t>(j)].squaredNorm();
    sd.samples.push_back(std::move(s));
  }
  return sd;
}

// One optimization phase of the layer-by-layer schedule: the loss is
// ||Psi R_n||-based when `linear` (depth n-1 plus the next R) or
// ||Psi Xhat_n||-based otherwise (depth n).
struct Phase {
  int n = 1;
  bool linear = false;
  TrainSelection sel;
  int epochs = 0;
};

std::vector<tl::Value> values_in_collect_order(const NetworkParams& p, const BoundNet& b) {
  std::vector<tl::Value> v;
  for (const auto& beta : b.beta) {
    v.push_back(beta.re);
    v.push_back(beta.im);
  }
  for (const auto& lam : b.lambda) {
    v.push_back(lam[0]);
    v.push_back(lam[1]);
    v.push_back(lam[2]);
  }
  if (p.kind == NetKind::kDaRlamp) {
    for (size_t l = 0; l < b.da.conv_k.size(); ++l) {
      v.push_back(b.da.conv_k[l]);
      v.push_back(b.da.conv_b[l]);
    }
    v.push_back(b.da.f1_w);
    v.push_back(b.da.f1_b);
    v.push_back(b.da.f2_w);
    v.push_back(b.da.f2_b);
    v.push_back(b.da.s1_k);
    v.push_back(b.da.s1_b);
    v.push_back(b.da.s2_k);
    v.push_back(b.da.s2_b);
  }
  if (p.kind == NetKind::kMdaRlamp) {
    for (size_t j = 0; j < b.mda.dw_k.size(); ++j) {
      v.push_back(b.mda.dw_k[j]);
      v.push_back(b.mda.dw_b[j]);
      v.push_back(b.mda.pw_k[j]);
      v.push_back(b.mda.pw_b[j]);
    }
    v.push_back(b.mda.sa_k);
    v.push_back(b.mda.sa_b);
  }
  return v;
}

std::vector<char> selected_mask(const NetworkParams& p, const TrainSelection& sel) {
  std::vector<char> mask;
  for (size_t i = 0; i < p.beta.size(); ++i) {
    const char on = i < sel.beta.size() && sel.beta[i];
    mask.push_back(on);
    mask.push_back(on);
  }
  for (size_t n = 0; n < p.lambda.size(); ++n) {
    const char on = n < sel.lambda.size() && sel.lambda[n];
    mask.push_back(on);
    mask.push_back(on);
    mask.push_back(on);
  }
  ParamRefs refs;
  const size_t block_count = [&] {
    ParamRefs tmp;
    if (p.kind == NetKind::kDaRlamp) const_cast<DaParams&>(p.da).collect("da.", tmp);
    if (p.kind == NetKind::kMdaRlamp) const_cast<MdaParams&>(p.mda).collect("mda.", tmp);
    return tmp.size();
  }();
  for (size_t i = 0; i < block_count; ++i) mask.push_back(sel.block_weights ? 1 : 0);
  return mask;
}

// Builds the per-sample loss value for a phase.
tl::Value phase_loss(tl::Graph& g, const NetworkParams& p, const BoundNet& b,
                     const StagedData& sd, const StagedSample& s, const Phase& ph) {
  CVal y{g.constant(s.y.re), g.constant(s.y.im)};
  CVal ups{g.constant(sd.upsilon.re), g.constant(sd.upsilon.im)};
  CVal psi{g.constant(sd.psi.re), g.constant(sd.psi.im)};
  const int depth = ph.linear ? ph.n - 1 : ph.n;
  ForwardTrace t = rlamp_forward(g, p, b, y, ups, depth, ph.linear);
  CVal z = ph.linear ? t.r[static_cast<size_t>(ph.n - 1)]
                     : t.xhat[static_cast<size_t>(ph.n - 1)];
  CVal diff = csub(cmatmul(psi, z), CVal{g.constant(s.h.re), g.constant(s.h.im)});
  return tl::scale(tl::sumsq2(diff.re, diff.im), 1.0 / s.h_norm2);
}

double phase_objective(const NetworkParams& p, const StagedData& sd, const Phase& ph) {
  double acc = 0.0;
  int used = 0;
  const TrainSelection none = TrainSelection::none(p);
  for (const StagedSample& s : sd.samples) {
    if (s.h_norm2 == 0.0) continue;
    tl::Graph g;
    BoundNet b = bind_network(g, p, none);
    acc += g.value(phase_loss(g, p, b, sd, s, ph))[0];
    ++used;
  }
  return used ? acc / used : 0.0;
}

struct PhaseOutcome {
  std::vector<double> curve;  // validation objective after each epoch
  bool aborted = false;
};

PhaseOutcome run_phase(NetworkParams& net, const StagedData& train, const StagedData& val,
                       const Phase& ph, const TrainOptions& opt, std::uint64_t& shuffle_tick,
                       int* skipped_total) {
  PhaseOutcome out;
  ParamRefs refs;
  net.collect(refs);
  const std::vector<char> mask = selected_mask(net, ph.sel);
  std::vector<size_t> active;
  for (size_t i = 0; i < refs.size(); ++i)
    if (mask[i]) active.push_back(i);

  std::vector<AdamState> adam(active.size());
  double best_obj = phase_objective(net, val, ph);
  out.curve.push_back(best_obj);
  std::vector<tl::Tensor> best;
  for (size_t a : active) best.push_back(refs[a].second->clone());

  std::vector<int> order(train.samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < ph.epochs; ++epoch) {
    Rng shuffle(substream(opt.seed, "shuffle", shuffle_tick++));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.index(i)]);
    bool aborted = false;
    for (size_t start = 0; start < order.size() && !aborted;
         start += static_cast<size_t>(opt.batch)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(opt.batch));
      std::vector<tl::Tensor> grads;
      for (size_t a : active) grads.emplace_back(refs[a].second->shape(), 0.0);
      int used = 0;
      for (size_t i = start; i < stop; ++i) {
        const StagedSample& s = train.samples[static_cast<size_t>(order[i])];
        if (s.h_norm2 == 0.0) {
          if (skipped_total) ++*skipped_total;
          continue;
        }
        try {
          tl::Graph g;
          BoundNet b = bind_network(g, net, ph.sel);
          const std::vector<tl::Value> vals = values_in_collect_order(net, b);
          tl::Value loss = phase_loss(g, net, b, train, s, ph);
          g.backward(loss);
          for (size_t a = 0; a < active.size(); ++a) {
            const tl::Tensor adj = g.adjoint(vals[active[a]]);
            for (std::int64_t e = 0; e < adj.numel(); ++e) grads[a][e] += adj[e];
          }
          ++used;
        } catch (const tl::NumericalError&) {
          aborted = true;
          break;
        }
      }
      if (aborted || used == 0) continue;
      for (size_t a = 0; a < active.size(); ++a) {
        for (std::int64_t e = 0; e < grads[a].numel(); ++e)
          grads[a][e] /= static_cast<double>(used);
        adam_step(*refs[active[a]].second, grads[a], adam[a], opt.lr);
        // threshold scale must stay a scale
        if (refs[active[a]].first.size() > 2 &&
            refs[active[a]].first.compare(refs[active[a]].first.size() - 2, 2, ".2") == 0) {
          tl::Tensor& l2 = *refs[active[a]].second;
          if (l2[0] < 0.0) {
            tl::Tensor clipped = l2.clone();
            clipped[0] = 0.0;
            l2 = clipped;
          }
        }
      }
    }
    if (aborted) {
      out.aborted = true;
      break;
    }
    double obj;
    try {
      obj = phase_objective(net, val, ph);
    } catch (const tl::NumericalError&) {
      out.aborted = true;
      break;
    }
    out.curve.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      for (size_t a = 0; a < active.size(); ++a) best[a] = refs[active[a]].second->clone();
    }
    if (opt.verbose)
      std::cerr << "    phase n=" << ph.n << (ph.linear ? " L" : " NL") << " epoch "
                << epoch + 1 << "/" << ph.epochs << " val " << obj << "\n";
  }
  // keep the best iterate (also restores the last finite state after aborts)
  for (size_t a = 0; a < active.size(); ++a) *refs[active[a]].second = best[a];
  return out;
}

TrainSelection select_beta(const NetworkParams& p, int idx) {
  TrainSelection s = TrainSelection::none(p);
  s.beta[static_cast<size_t>(idx)] = 1;
  return s;
}

TrainSelection select_lambda(const NetworkParams& p, int n) {
  TrainSelection s = TrainSelection::none(p);
  s.lambda[static_cast<size_t>(n)] = 1;
  return s;
}

TrainSelection select_upto(const NetworkParams& p, int n_layers, bool include_lambda_n,
                           bool block) {
  TrainSelection s = TrainSelection::none(p);
  s.block_weights = block;
  for (int i = 0; i < static_cast<int>(p.beta.size()) && i < n_layers; ++i)
    s.beta[static_cast<size_t>(i)] = 1;
  for (int i = 0; i < n_layers; ++i)
    s.lambda[static_cast<size_t>(i)] = (i < n_layers - 1 || include_lambda_n) ? 1 : 0;
  return s;
}

}  // namespace

double validation_nmse_db(const NetworkParams& net, const Dataset& data,
                          const ProblemMatrices& pm, int depth) {
  const StagedData sd = stage(data, pm);
  double acc = 0.0;
  int used = 0;
  const TrainSelection none = TrainSelection::none(net);
  for (const StagedSample& s : sd.samples) {
    if (s.h_norm2 == 0.0) continue;
    tl::Graph g;
    BoundNet b = bind_network(g, net, none);
    CVal y{g.constant(s.y.re), g.constant(s.y.im)};
    CVal ups{g.constant(sd.upsilon.re), g.constant(sd.upsilon.im)};
    ForwardTrace t = rlamp_forward(g, net, b, y, ups, depth, false);
    CVal x = depth == 0 ? t.r[0] : t.xhat.back();
    CVal psi{g.constant(sd.psi.re), g.constant(sd.psi.im)};
    CVal diff = csub(cmatmul(psi, x), CVal{g.constant(s.h.re), g.constant(s.h.im)});
    acc += g.value(tl::sumsq2(diff.re, diff.im))[0] / s.h_norm2;
    ++used;
  }
  const double mean = used ? acc / used : 1.0;
  return std::max(10.0 * std::log10(std::max(mean, 1e-30)), -300.0);
}

TrainReport train_da_rlamp(NetworkParams& net, const Dataset& train, const Dataset& val,
                           const ProblemMatrices& pm, const TrainOptions& opt) {
  if (net.kind == NetKind::kMdaRlamp)
    throw std::invalid_argument("use train_mda_rlamp for MDA networks");
  const StagedData tr = stage(train, pm);
  const StagedData va = stage(val, pm);
  TrainReport report;
  std::uint64_t tick = 0;
  int skipped = 0;

  for (int n = 1; n <= net.layers; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    StageRecord lin;
    lin.stage = n;
    lin.phase = "linear";
    if (n == 1) {
      // Learn {beta_1, Theta} on the linear loss of layer 1
      Phase ph{1, true, TrainSelection::none(net), opt.epochs_learn};
      ph.sel = select_beta(net, 0);
      ph.sel.block_weights = net.kind == NetKind::kDaRlamp;
      auto o = run_phase(net, tr, va, ph, opt, tick, &skipped);
      lin.loss_curve = o.curve;
    } else {
      net.beta[static_cast<size_t>(n - 1)] = tl::CTensorData(
          net.beta[static_cast<size_t>(n - 2)].re.clone(),
          net.beta[static_cast<size_t>(n - 2)].im.clone());
      net.lambda[static_cast<size_t>(n - 1)] =
          LayerLambda{net.lambda[static_cast<size_t>(n - 2)].l1.clone(),
                      net.lambda[static_cast<size_t>(n - 2)].l2.clone(),
                      net.lambda[static_cast<size_t>(n - 2)].lb.clone()};
      Phase learn{n, true, select_beta(net, n - 1), opt.epochs_learn};
      auto o1 = run_phase(net, tr, va, learn, opt, tick, &skipped);
      Phase refine{n, true, select_upto(net, n, false, net.kind == NetKind::kDaRlamp),
                   opt.epochs_refine};
      auto o2 = run_phase(net, tr, va, refine, opt, tick, &skipped);
      lin.loss_curve = o1.curve;
      lin.loss_curve.insert(lin.loss_curve.end(), o2.curve.begin(), o2.curve.end());
    }
    lin.val_nmse_db = validation_nmse_db(net, val, pm, n);
    lin.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.stages.push_back(lin);

    const auto t1 = std::chrono::steady_clock::now();
    StageRecord nl;
    nl.stage = n;
    nl.phase = "nonlinear";
    {
      Phase learn{n, false, select_lambda(net, n - 1), opt.epochs_learn};
      auto o1 = run_phase(net, tr, va, learn, opt, tick, &skipped);
      Phase refine{n, false, select_upto(net, n, true, net.kind == NetKind::kDaRlamp),
                   opt.epochs_refine};
      auto o2 = run_phase(net, tr, va, refine, opt, tick, &skipped);
      nl.loss_curve = o1.curve;
      nl.loss_curve.insert(nl.loss_curve.end(), o2.curve.begin(), o2.curve.end());
    }
    nl.val_nmse_db = validation_nmse_db(net, val, pm, n);
    nl.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    report.stages.push_back(nl);
    if (opt.verbose)
      std::cerr << "  stage " << n << " val NMSE " << nl.val_nmse_db << " dB\n";
  }
  if (skipped > 0)
    std::cerr << "warning: skipped " << skipped << " degenerate samples (||H|| = 0)\n";
  report.final_val_nmse_db = validation_nmse_db(net, val, pm, net.layers);
  return report;
}

TrainReport train_mda_rlamp(NetworkParams& net, const Dataset& train, const Dataset& val,
                            const ProblemMatrices& pm, const TrainOptions& opt) {
  if (net.kind != NetKind::kMdaRlamp)
    throw std::invalid_argument("train_mda_rlamp expects an MDA network");
  const StagedData tr = stage(train, pm);
  const StagedData va = stage(val, pm);
  TrainReport report;
  std::uint64_t tick = 0;
  int skipped = 0;

  for (int n = 1; n <= net.layers; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    StageRecord rec;
    rec.stage = n;
    rec.phase = "linear";
    if (n == 1) {
      Phase ph{1, false, TrainSelection::none(net), opt.epochs_learn};
      ph.sel.beta[0] = 1;
      ph.sel.block_weights = true;
      auto o = run_phase(net, tr, va, ph, opt, tick, &skipped);
      rec.loss_curve = o.curve;
    } else {
      net.lambda[static_cast<size_t>(n - 1)] =
          LayerLambda{net.lambda[static_cast<size_t>(n - 2)].l1.clone(),
                      net.lambda[static_cast<size_t>(n - 2)].l2.clone(),
                      net.lambda[static_cast<size_t>(n - 2)].lb.clone()};
      Phase learn{n, false, select_lambda(net, n - 1), opt.epochs_learn};
      auto o1 = run_phase(net, tr, va, learn, opt, tick, &skipped);
      Phase relearn{n, false, TrainSelection::none(net), opt.epochs_refine};
      relearn.sel.beta[0] = 1;
      relearn.sel.block_weights = true;
      for (int i = 0; i < n; ++i) relearn.sel.lambda[static_cast<size_t>(i)] = 1;
      auto o2 = run_phase(net, tr, va, relearn, opt, tick, &skipped);
      rec.loss_curve = o1.curve;
      rec.loss_curve.insert(rec.loss_curve.end(), o2.curve.begin(), o2.curve.end());
    }
    rec.val_nmse_db = validation_nmse_db(net, val, pm, n);
    rec.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.stages.push_back(rec);
    if (opt.verbose)
      std::cerr << "  stage " << n << " val NMSE " << rec.val_nmse_db << " dB\n";
  }
  if (skipped > 0)
    std::cerr << "warning: skipped " << skipped << " degenerate samples (||H|| = 0)\n";
  report.final_val_nmse_db = validation_nmse_db(net, val, pm, net.layers);
  return report;
}

}  // namespace irsce
