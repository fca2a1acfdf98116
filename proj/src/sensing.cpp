#include "irsce/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace irsce {

namespace {
constexpr double kPi = 3.14159265358979323846;

double grid_omega(int idx, int size) {
  return -kPi + 2.0 * kPi * static_cast<double>(idx) / static_cast<double>(size);
}
}  // namespace

Grids build_grids(const SystemConfig& cfg) {
  Grids g;
  g.bs.resize(static_cast<size_t>(cfg.grid_bs));
  for (int i = 0; i < cfg.grid_bs; ++i) g.bs[static_cast<size_t>(i)] = grid_omega(i, cfg.grid_bs);
  g.irs_x.resize(static_cast<size_t>(cfg.grid_irs_x));
  for (int i = 0; i < cfg.grid_irs_x; ++i)
    g.irs_x[static_cast<size_t>(i)] = grid_omega(i, cfg.grid_irs_x);
  g.irs_y.resize(static_cast<size_t>(cfg.grid_irs_y));
  for (int i = 0; i < cfg.grid_irs_y; ++i)
    g.irs_y[static_cast<size_t>(i)] = grid_omega(i, cfg.grid_irs_y);
  return g;
}

void build_dg(const SystemConfig& cfg, const MatrixXcd& irs_dict, MatrixXcd& dg_out,
              std::vector<std::vector<int>>& merge_out) {
  const int gi = cfg.grid_irs();
  const int gx = cfg.grid_irs_x, gy = cfg.grid_irs_y;
  const int ni = cfg.n_irs();
  if (irs_dict.rows() != ni || irs_dict.cols() != gi)
    throw std::invalid_argument("build_dg: dictionary shape mismatch");

  // D(p*G_i + q, n) = A(n, p) * conj(A(n, q)); its distinct rows are indexed
  // by the componentwise grid difference, and rows (0, q) hit every class.
  dg_out.resize(gi, ni);
  for (int q = 0; q < gi; ++q)
    for (int n = 0; n < ni; ++n)
      dg_out(q, n) = irs_dict(n, 0) * std::conj(irs_dict(n, q));

  merge_out.assign(static_cast<size_t>(gi), {});
  for (int p = 0; p < gi; ++p) {
    const int px = p / gy, py = p % gy;
    for (int q = 0; q < gi; ++q) {
      const int qx = q / gy, qy = q % gy;
      const int rx = ((qx - px) % gx + gx) % gx;
      const int ry = ((qy - py) % gy + gy) % gy;
      merge_out[static_cast<size_t>(rx * gy + ry)].push_back(p * gi + q);
    }
  }

  // Numerical check that every row of D coincides with its class row of D_g.
  // Exhaustive when D is small, sampled otherwise.
  const bool exhaustive = static_cast<long long>(gi) * gi * ni <= (1 << 26);
  Rng probe(substream(cfg.seed, "dg-probe"));
  const int samples = exhaustive ? gi * gi : 20000;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const int row = exhaustive ? s : static_cast<int>(probe.index(static_cast<std::uint64_t>(gi) *
                                                                  static_cast<std::uint64_t>(gi)));
    const int p = row / gi, q = row % gi;
    const int px = p / gy, py = p % gy, qx = q / gy, qy = q % gy;
    const int cls = (((qx - px) % gx + gx) % gx) * gy + (((qy - py) % gy + gy) % gy);
    for (int n = 0; n < ni; ++n) {
      const std::complex<double> v = irs_dict(n, p) * std::conj(irs_dict(n, q));
      worst = std::max(worst, std::abs(v - dg_out(cls, n)));
    }
  }
  if (worst > 1e-9)
    throw std::runtime_error(
        "IRS grid is not closed under differences: Khatri-Rao matrix has more than G_i "
        "distinct rows (max deviation " +
        std::to_string(worst) + ")");
}

namespace {

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

MatrixXcd build_psi(const Dictionary& dict) {
  return kron(dict.dg.transpose(), kron(dict.ue.conjugate(), dict.bs));
}

MatrixXcd build_psi_hybrid(const Dictionary& dict) {
  return kron(dict.ue.conjugate(), dict.irs);
}

Dictionary build_dictionary(const SystemConfig& cfg) {
  Dictionary d;
  d.grids = build_grids(cfg);
  d.bs.resize(cfg.n_bs, cfg.grid_bs);
  for (int c = 0; c < cfg.grid_bs; ++c)
    d.bs.col(c) = steer_ula_omega(d.grids.bs[static_cast<size_t>(c)], cfg.n_bs);
  const int gi = cfg.grid_irs();
  d.irs.resize(cfg.n_irs(), gi);
  for (int cx = 0; cx < cfg.grid_irs_x; ++cx)
    for (int cy = 0; cy < cfg.grid_irs_y; ++cy)
      d.irs.col(cx * cfg.grid_irs_y + cy) =
          steer_upa_omega(d.grids.irs_x[static_cast<size_t>(cx)],
                          d.grids.irs_y[static_cast<size_t>(cy)], cfg.n_irs_x, cfg.n_irs_y);
  d.ue = MatrixXcd::Ones(1, cfg.grid_ue);  // single-antenna UE steering
  build_dg(cfg, d.irs, d.dg, d.merge);
  d.psi = build_psi(d);
  d.psi_hybrid = build_psi_hybrid(d);
  return d;
}

VectorXcd draw_phases(const SystemConfig& cfg, std::uint64_t seed, int t) {
  Rng rng(substream(seed, "irs-phase", static_cast<std::uint64_t>(t)));
  VectorXcd r(cfg.n_irs());
  for (int i = 0; i < cfg.n_irs(); ++i)
    r(i) = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));
  return r;
}

MatrixXcd draw_combiner(const SystemConfig& cfg, std::uint64_t seed, int t) {
  Rng rng(substream(seed, "combiner", static_cast<std::uint64_t>(t)));
  MatrixXcd w(cfg.n_bs, cfg.streams());
  const double mag = 1.0 / std::sqrt(static_cast<double>(cfg.n_bs));
  for (int j = 0; j < w.cols(); ++j)
    for (int i = 0; i < w.rows(); ++i)
      w(i, j) = std::polar(mag, rng.uniform(0.0, 2.0 * kPi));
  return w;
}

Eigen::VectorXi draw_sensor_mask(const SystemConfig& cfg, std::uint64_t seed) {
  Rng rng(substream(seed, "sensors"));
  const int ni = cfg.n_irs();
  const int na = cfg.sensors();
  // Fisher-Yates prefix for a uniform random support
  std::vector<int> idx(static_cast<size_t>(ni));
  for (int i = 0; i < ni; ++i) idx[static_cast<size_t>(i)] = i;
  for (int i = 0; i < na; ++i) {
    const int j = i + static_cast<int>(rng.index(static_cast<std::uint64_t>(ni - i)));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  Eigen::VectorXi mask = Eigen::VectorXi::Zero(ni);
  for (int i = 0; i < na; ++i) mask(idx[static_cast<size_t>(i)]) = 1;
  return mask;
}

MatrixXcd build_phi(const SystemConfig& cfg, std::uint64_t seed) {
  const int ns = cfg.streams();
  const int ni = cfg.n_irs();
  MatrixXcd phi(cfg.pilots * ns, ni * cfg.n_bs);
  for (int t = 0; t < cfg.pilots; ++t) {
    const VectorXcd r = draw_phases(cfg, seed, t);
    const MatrixXcd wh = draw_combiner(cfg, seed, t).adjoint();  // N_s x N_b
    // Phi^(t) = s * (r^T  (kron)  W_b^H), pilot s = 1
    for (int i = 0; i < ni; ++i)
      phi.block(t * ns, i * cfg.n_bs, ns, cfg.n_bs) = r(i) * wh;
  }
  return phi;
}

MatrixXcd build_phi_hybrid(const SystemConfig& cfg, std::uint64_t seed) {
  const Eigen::VectorXi mask = draw_sensor_mask(cfg, seed);
  std::vector<int> support;
  for (int i = 0; i < mask.size(); ++i)
    if (mask(i)) support.push_back(i);
  if (support.empty()) throw std::invalid_argument("hybrid mode needs active sensors");
  MatrixXcd phi = MatrixXcd::Zero(cfg.pilots_irs, cfg.n_irs());
  for (int t = 0; t < cfg.pilots_irs; ++t)
    phi(t, support[static_cast<size_t>(t) % support.size()]) = 1.0;
  return phi;
}

MatrixXcd sparse_coefficients(const SystemConfig& cfg, const ChannelRealization& cr,
                              const Dictionary& dict, int ue) {
  const int gi = cfg.grid_irs();
  const int gb = cfg.grid_bs;
  const int gy = cfg.grid_irs_y;
  MatrixXcd x = MatrixXcd::Zero(static_cast<Eigen::Index>(gi) * gb * cfg.grid_ue, cfg.n_sc);
  const auto& fpaths = cr.paths.f[static_cast<size_t>(ue)];
  const double scale_f =
      std::sqrt(static_cast<double>(cfg.n_irs()) / static_cast<double>(fpaths.size()));
  const double scale_g = std::sqrt(static_cast<double>(cfg.n_irs() * cfg.n_bs) /
                                   static_cast<double>(cr.paths.g.size()));
  for (const Path& pf : fpaths) {
    if (pf.g_irs_x < 0) throw std::invalid_argument("sparse_coefficients needs on-grid paths");
    const int p = pf.g_irs_x * gy + pf.g_irs_y;
    const int px = pf.g_irs_x, py = pf.g_irs_y;
    for (const Path& pg : cr.paths.g) {
      if (pg.g_irs_x < 0 || pg.g_bs < 0)
        throw std::invalid_argument("sparse_coefficients needs on-grid paths");
      const int qx = pg.g_irs_x, qy = pg.g_irs_y;
      const int cls = (((qx - px) % cfg.grid_irs_x + cfg.grid_irs_x) % cfg.grid_irs_x) * gy +
                      (((qy - py) % gy + gy) % gy);
      for (int k = 1; k <= cfg.n_sc; ++k) {
        const std::complex<double> cf =
            scale_f * pf.gain * path_freq_response(cfg, pf.delay, k);
        const std::complex<double> cg =
            scale_g * pg.gain * path_freq_response(cfg, pg.delay, k);
        x(static_cast<Eigen::Index>(cls) * gb + pg.g_bs, k - 1) += cf * cg;
      }
    }
  }
  (void)dict;
  return x;
}

MatrixXcd sparse_coefficients_hybrid(const SystemConfig& cfg, const ChannelRealization& cr,
                                     int ue) {
  const int gy = cfg.grid_irs_y;
  MatrixXcd x = MatrixXcd::Zero(cfg.grid_irs(), cfg.n_sc);
  const auto& fpaths = cr.paths.f[static_cast<size_t>(ue)];
  const double scale_f =
      std::sqrt(static_cast<double>(cfg.n_irs()) / static_cast<double>(fpaths.size()));
  for (const Path& pf : fpaths) {
    if (pf.g_irs_x < 0) throw std::invalid_argument("sparse_coefficients needs on-grid paths");
    const int p = pf.g_irs_x * gy + pf.g_irs_y;
    for (int k = 1; k <= cfg.n_sc; ++k)
      x(p, k - 1) += scale_f * pf.gain * path_freq_response(cfg, pf.delay, k);
  }
  return x;
}

SensingProblem assemble_problem(const SystemConfig& cfg, const ChannelRealization& cr,
                                const Dictionary& dict, int ue, std::uint64_t phi_seed,
                                std::uint64_t noise_seed) {
  if (cfg.measurements() < 1) throw std::invalid_argument("T * N_s must be >= 1");
  SensingProblem sp;
  sp.hybrid = cfg.hybrid;
  const int k_count = cfg.n_sc;
  if (cfg.hybrid) {
    sp.phi = build_phi_hybrid(cfg, phi_seed);
    sp.psi = dict.psi_hybrid;
    sp.h_true = cr.f[static_cast<size_t>(ue)];  // N_i x K
    if (cfg.on_grid) sp.x_true = sparse_coefficients_hybrid(cfg, cr, ue);
  } else {
    sp.phi = build_phi(cfg, phi_seed);
    sp.psi = dict.psi;
    const int nbi = cfg.n_bs * cfg.n_irs();
    sp.h_true.resize(nbi, k_count);
    for (int k = 0; k < k_count; ++k) {
      const MatrixXcd& h = cr.h_casc[static_cast<size_t>(ue)][static_cast<size_t>(k)];
      sp.h_true.col(k) = Eigen::Map<const VectorXcd>(h.data(), h.size());
    }
    if (cfg.on_grid) sp.x_true = sparse_coefficients(cfg, cr, dict, ue);
  }
  sp.upsilon = sp.phi * sp.psi;

  const MatrixXcd clean = sp.phi * sp.h_true;  // M x K
  const double m = static_cast<double>(clean.rows());
  const double snr_lin = std::pow(10.0, cfg.snr_db / 10.0);
  sp.noise_var = clean.squaredNorm() / (m * static_cast<double>(k_count) * snr_lin);

  // noise substreams are keyed per training symbol so that growing T appends
  // rows without disturbing earlier ones, and changing the SNR only rescales
  MatrixXcd noise(clean.rows(), k_count);
  const double sd = std::sqrt(sp.noise_var);
  if (cfg.hybrid) {
    // one-hot selection keeps the white per-sensor noise white
    for (int t = 0; t < clean.rows(); ++t) {
      Rng rng(substream(noise_seed, "noise-sym", static_cast<std::uint64_t>(t)));
      for (int k = 0; k < k_count; ++k) noise(t, k) = sd * rng.cnormal();
    }
  } else {
    const int ns = cfg.streams();
    for (int t = 0; t < cfg.pilots; ++t) {
      Rng rng(substream(noise_seed, "noise-sym", static_cast<std::uint64_t>(t)));
      const MatrixXcd wh = draw_combiner(cfg, phi_seed, t).adjoint();
      for (int k = 0; k < k_count; ++k) {
        VectorXcd n(cfg.n_bs);
        for (int i = 0; i < cfg.n_bs; ++i) n(i) = sd * rng.cnormal();
        noise.block(t * ns, k, ns, 1) = wh * n;
      }
    }
  }
  sp.y = clean + noise;
  return sp;
}

}  // namespace irsce
