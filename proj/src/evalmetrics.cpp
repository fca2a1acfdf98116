#include "irsce/evalmetrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace irsce {

double nmse_ratio(const MatrixXcd& h, const MatrixXcd& hhat) {
  const double denom = h.squaredNorm();
  if (denom == 0.0) return std::nan("");
  return (h - hhat).squaredNorm() / denom;
}

double nmse_db(const MatrixXcd& h, const MatrixXcd& hhat) {
  const double r = nmse_ratio(h, hhat);
  if (std::isnan(r)) return std::nan("");
  return std::max(10.0 * std::log10(std::max(r, 0.0)), -300.0);
}

double nmse_db_mean(const std::vector<double>& ratios) {
  double acc = 0.0;
  int used = 0;
  for (double r : ratios)
    if (!std::isnan(r)) {
      acc += r;
      ++used;
    }
  if (!used) return std::nan("");
  return std::max(10.0 * std::log10(std::max(acc / used, 0.0)), -300.0);
}

std::complex<double> best_scale(const MatrixXcd& h, const MatrixXcd& hhat) {
  const double denom = hhat.squaredNorm();
  if (denom == 0.0) return 0.0;
  std::complex<double> dot = 0.0;
  for (Eigen::Index c = 0; c < h.cols(); ++c)
    for (Eigen::Index r = 0; r < h.rows(); ++r) dot += std::conj(hhat(r, c)) * h(r, c);
  return dot / denom;
}

double spectral_efficiency(const MatrixXcd& g_k, const VectorXcd& f_k, const VectorXcd& r,
                           const MatrixXcd& w_b, double sigma2) {
  const VectorXcd h_eff = g_k * (r.asDiagonal() * f_k);
  const Eigen::RowVectorXcd x = h_eff.transpose() * w_b;
  return std::log2(1.0 + x.squaredNorm() / sigma2);
}

std::string method_name(EvalMethod m) {
  switch (m) {
    case EvalMethod::kZero: return "zero";
    case EvalMethod::kSwomp: return "swomp";
    case EvalMethod::kAmpUntrained: return "amp";
    case EvalMethod::kNetwork: return "network";
  }
  return "unknown";
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = run_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

MatrixXcd run_method(const MethodSpec& spec, const SensingProblem& sp, double swomp_eps,
                     int iterations_axis) {
  switch (spec.method) {
    case EvalMethod::kZero:
      return MatrixXcd::Zero(sp.h_true.rows(), sp.h_true.cols());
    case EvalMethod::kSwomp: {
      SwompOptions opt;
      opt.eps = swomp_eps < 0.0 ? sp.noise_var * static_cast<double>(sp.y.size()) : swomp_eps;
      const SolverReport rep = swomp(sp.y, sp.upsilon, opt);
      return sp.psi * rep.x_hat;
    }
    case EvalMethod::kAmpUntrained: {
      AmpOptions opt;
      opt.iterations = iterations_axis > 0 ? iterations_axis : spec.amp_iterations;
      const SolverReport rep = amp_untrained(sp.y, sp.upsilon, opt);
      return sp.psi * rep.x_hat;
    }
    case EvalMethod::kNetwork: {
      if (!spec.model) throw DimensionError("network method needs a model");
      const NetworkParams& p = *spec.model;
      if (p.m != sp.upsilon.rows() || p.dict_cols() != sp.upsilon.cols() ||
          p.n_sc != sp.y.cols())
        throw DimensionError("model dimensions do not match the problem");
      int depth = -1;
      if (iterations_axis > 0) {
        if (iterations_axis > p.layers)
          throw DimensionError("iteration axis exceeds trained depth");
        depth = iterations_axis;
      }
      return estimate_channel(p, sp.y, sp.upsilon, sp.psi, depth);
    }
  }
  throw std::logic_error("unreachable");
}

// index-sliced parallel loop with deterministic per-index outputs
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace

SweepResult sweep(const RunConfig& cfg, const std::vector<MethodSpec>& methods,
                  const SweepSpec& spec) {
  SweepResult result;
  result.axis = spec.axis;
  result.config_hash = config_hash(cfg);
  if (spec.axis != "snr_db" && spec.axis != "pilots" && spec.axis != "iterations")
    throw std::invalid_argument("sweep axis must be snr_db, pilots or iterations");

  for (double value : spec.values) {
    SystemConfig sys = cfg.system;
    int iterations_axis = 0;
    if (spec.axis == "snr_db") {
      sys.snr_db = value;
    } else if (spec.axis == "pilots") {
      if (sys.hybrid)
        sys.pilots_irs = static_cast<int>(value);
      else
        sys.pilots = static_cast<int>(value);
    } else {
      iterations_axis = static_cast<int>(value);
    }
    sys.validate();
    const Dictionary dict = build_dictionary(sys);

    std::vector<std::vector<double>> ratios(methods.size(),
                                            std::vector<double>(static_cast<size_t>(spec.trials)));
    std::vector<std::vector<double>> scales(methods.size(),
                                            std::vector<double>(static_cast<size_t>(spec.trials)));
    std::exception_ptr error;
    std::mutex error_mu;
    parallel_for(spec.trials, spec.threads, [&](int j) {
      try {
        Rng ch(substream(cfg.seed, "trial-ch", static_cast<std::uint64_t>(j)));
        const ChannelRealization cr = realize_channel(sys, ch);
        const SensingProblem sp =
            assemble_problem(sys, cr, dict, j % sys.n_ue, cfg.seed,
                             substream(cfg.seed, "trial-noise", static_cast<std::uint64_t>(j)));
        for (size_t m = 0; m < methods.size(); ++m) {
          const MatrixXcd hhat = run_method(methods[m], sp, cfg.swomp_eps, iterations_axis);
          ratios[m][static_cast<size_t>(j)] = nmse_ratio(sp.h_true, hhat);
          scales[m][static_cast<size_t>(j)] = std::abs(best_scale(sp.h_true, hhat));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
    if (error) std::rethrow_exception(error);

    for (size_t m = 0; m < methods.size(); ++m) {
      SweepRow row;
      row.method = methods[m].name();
      row.axis_value = value;
      row.mean_nmse_db = nmse_db_mean(ratios[m]);
      double mean_db = 0.0, mean_scale = 0.0;
      int used = 0;
      std::vector<double> dbs;
      for (size_t j = 0; j < ratios[m].size(); ++j) {
        if (std::isnan(ratios[m][j])) continue;
        dbs.push_back(std::max(10.0 * std::log10(std::max(ratios[m][j], 1e-30)), -300.0));
        mean_scale += scales[m][j];
        ++used;
      }
      for (double d : dbs) mean_db += d;
      mean_db = dbs.empty() ? 0.0 : mean_db / static_cast<double>(dbs.size());
      double var = 0.0;
      for (double d : dbs) var += (d - mean_db) * (d - mean_db);
      row.std_db = dbs.size() > 1 ? std::sqrt(var / static_cast<double>(dbs.size() - 1)) : 0.0;
      row.trials = used;
      row.opt_scale = used ? mean_scale / used : 0.0;
      result.rows.push_back(row);
    }
  }
  return result;
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open CSV for writing: " + path);
  os << "method,axis,mean_nmse_db,std_db,trials,opt_scale\n";
  for (const SweepRow& r : result.rows)
    os << r.method << ',' << fmt(r.axis_value) << ',' << fmt(r.mean_nmse_db) << ','
       << fmt(r.std_db) << ',' << r.trials << ',' << fmt(r.opt_scale) << '\n';
}

SweepResult parse_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "method,axis,mean_nmse_db,std_db,trials,opt_scale")
    throw std::runtime_error("unexpected CSV header in " + path);
  SweepResult result;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    SweepRow r;
    std::getline(ls, r.method, ',');
    std::getline(ls, field, ',');
    r.axis_value = std::stod(field);
    std::getline(ls, field, ',');
    r.mean_nmse_db = std::stod(field);
    std::getline(ls, field, ',');
    r.std_db = std::stod(field);
    std::getline(ls, field, ',');
    r.trials = std::stoi(field);
    std::getline(ls, field, ',');
    r.opt_scale = std::stod(field);
    result.rows.push_back(r);
  }
  return result;
}

void emit_svg(const SweepResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open SVG for writing: " + path);
  const int width = 640, height = 420, ml = 60, mr = 150, mt = 30, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::vector<std::string> methods;
  for (const SweepRow& r : result.rows) {
    xmin = std::min(xmin, r.axis_value);
    xmax = std::max(xmax, r.axis_value);
    ymin = std::min(ymin, r.mean_nmse_db);
    ymax = std::max(ymax, r.mean_nmse_db);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
  }
  if (result.rows.empty()) {
    xmin = 0;
    xmax = 1;
    ymin = -1;
    ymax = 0;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b"};
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "  <line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
     << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << height - mb << "\" stroke=\"black\"/>\n";
  os << "  <text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">"
     << (result.axis.empty() ? "axis" : result.axis) << "</text>\n";
  os << "  <text x=\"16\" y=\"" << (mt + height - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + height - mb) / 2 << ")\">NMSE (dB)</text>\n";
  for (size_t m = 0; m < methods.size(); ++m) {
    std::ostringstream pts;
    for (const SweepRow& r : result.rows)
      if (r.method == methods[m]) pts << px(r.axis_value) << ',' << py(r.mean_nmse_db) << ' ';
    os << "  <polyline fill=\"none\" stroke=\"" << colors[m % 6]
       << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    os << "  <text x=\"" << width - mr + 10 << "\" y=\"" << mt + 16 * (m + 1)
       << "\" font-size=\"12\" fill=\"" << colors[m % 6] << "\">" << methods[m]
       << "</text>\n";
  }
  // axis tick labels at the extremes
  os << "  <text x=\"" << ml << "\" y=\"" << height - mb + 16
     << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xmin) << "</text>\n";
  os << "  <text x=\"" << width - mr << "\" y=\"" << height - mb + 16
     << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xmax) << "</text>\n";
  os << "  <text x=\"" << ml - 6 << "\" y=\"" << height - mb
     << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(ymin) << "</text>\n";
  os << "  <text x=\"" << ml - 6 << "\" y=\"" << mt + 4
     << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(ymax) << "</text>\n";
  os << "</svg>\n";
}

std::vector<SeRow> spectral_efficiency_proxy(const RunConfig& cfg,
                                             const std::vector<MethodSpec>& methods,
                                             int trials, int threads) {
  const SystemConfig& sys = cfg.system;
  if (sys.hybrid)
    throw std::invalid_argument("spectral-efficiency proxy applies to the passive problem");
  const Dictionary dict = build_dictionary(sys);
  std::vector<std::vector<double>> se_mf(methods.size(),
                                         std::vector<double>(static_cast<size_t>(trials)));
  std::vector<std::vector<double>> se_rand(methods.size(),
                                           std::vector<double>(static_cast<size_t>(trials)));
  std::exception_ptr error;
  std::mutex error_mu;
  parallel_for(trials, threads, [&](int j) {
    try {
      Rng ch(substream(cfg.seed, "trial-ch", static_cast<std::uint64_t>(j)));
      const ChannelRealization cr = realize_channel(sys, ch);
      const int ue = j % sys.n_ue;
      const SensingProblem sp =
          assemble_problem(sys, cr, dict, ue, cfg.seed,
                           substream(cfg.seed, "trial-noise", static_cast<std::uint64_t>(j)));
      Rng wrng(substream(cfg.seed, "trial-prec", static_cast<std::uint64_t>(j)));
      MatrixXcd w_rand(sys.n_bs, sys.streams());
      for (int c = 0; c < w_rand.cols(); ++c) {
        for (int r = 0; r < w_rand.rows(); ++r) w_rand(r, c) = wrng.cnormal();
        w_rand.col(c) /= w_rand.col(c).norm();
      }
      for (size_t m = 0; m < methods.size(); ++m) {
        const MatrixXcd hvec = run_method(methods[m], sp, cfg.swomp_eps, 0);
        double acc_mf = 0.0, acc_rand = 0.0;
        // r phases aligned to the estimate's dominant row
        for (int k = 0; k < sys.n_sc; ++k) {
          const MatrixXcd hc = Eigen::Map<const MatrixXcd>(hvec.col(k).data(), sys.n_bs,
                                                           sys.n_irs());
          Eigen::Index irow = 0;
          hc.rowwise().norm().maxCoeff(&irow);
          VectorXcd r(sys.n_irs());
          for (int n = 0; n < sys.n_irs(); ++n) {
            const std::complex<double> v = hc(irow, n);
            r(n) = std::abs(v) > 0.0 ? std::conj(v) / std::abs(v) : 1.0;
          }
          const VectorXcd h_eff_hat = hc * r;
          MatrixXcd w_mf(sys.n_bs, 1);
          w_mf.col(0) = h_eff_hat.conjugate();
          const double nrm = w_mf.col(0).norm();
          if (nrm > 0.0) w_mf.col(0) /= nrm;
          const MatrixXcd& g_k = cr.g[static_cast<size_t>(k)];
          const VectorXcd f_k = cr.f[static_cast<size_t>(ue)].col(k);
          acc_mf += spectral_efficiency(g_k, f_k, r, w_mf, sp.noise_var);
          acc_rand += spectral_efficiency(g_k, f_k, r, w_rand, sp.noise_var);
        }
        se_mf[m][static_cast<size_t>(j)] = acc_mf / sys.n_sc;
        se_rand[m][static_cast<size_t>(j)] = acc_rand / sys.n_sc;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
  std::vector<SeRow> rows;
  for (size_t m = 0; m < methods.size(); ++m) {
    SeRow row;
    row.method = methods[m].name();
    row.trials = trials;
    for (int j = 0; j < trials; ++j) {
      row.mean_se_mf += se_mf[m][static_cast<size_t>(j)];
      row.mean_se_rand += se_rand[m][static_cast<size_t>(j)];
    }
    if (trials) {
      row.mean_se_mf /= trials;
      row.mean_se_rand /= trials;
    }
    rows.push_back(row);
  }
  return rows;
}

void emit_se_csv(const std::vector<SeRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open CSV for writing: " + path);
  os << "method,mean_se_mf,mean_se_rand,trials\n";
  for (const SeRow& r : rows)
    os << r.method << ',' << fmt(r.mean_se_mf) << ',' << fmt(r.mean_se_rand) << ','
       << r.trials << '\n';
}

}  // namespace irsce
