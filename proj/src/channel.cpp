#include "irsce/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace irsce {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Virtual-angle grids are uniform over [-pi, pi).
double grid_omega(int idx, int size) {
  return -kPi + 2.0 * kPi * static_cast<double>(idx) / static_cast<double>(size);
}
}  // namespace

int SystemConfig::n_taps() const {
  return static_cast<int>(std::ceil(tau_max / ts())) + pulse_halfwidth + 1;
}

void SystemConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  check(n_bs >= 1, "n_bs must be >= 1");
  check(n_irs_x >= 1 && n_irs_y >= 1, "IRS panel split must be >= 1");
  check(n_sc >= 1, "subcarrier count must be >= 1");
  check(n_ue >= 1, "UE count must be >= 1");
  check(pilots >= 1, "pilot count must be >= 1");
  check(pilots_irs >= 1, "hybrid pilot count must be >= 1");
  check(paths_f >= 1 && paths_g >= 1, "path counts must be >= 1");
  check(grid_bs >= 1, "grid_bs must be >= 1");
  check(grid_irs_x >= 1 && grid_irs_y >= 1, "IRS grid split must be >= 1");
  check(grid_ue >= 1, "grid_ue must be >= 1");
  check(!hybrid || grid_ue == 1, "hybrid mode requires grid_ue == 1");
  check(tau_max > 0.0, "tau_max must be positive");
  check(rolloff > 0.0 && rolloff <= 1.0, "rolloff must be in (0, 1]");
  check(pulse_halfwidth >= 0, "pulse_halfwidth must be >= 0");
  check(sensors() <= n_irs(), "active sensor count exceeds IRS elements");
}

VectorXcd steer_ula(double theta, int n) {
  return steer_ula_omega(kPi * std::sin(theta), n);
}

VectorXcd steer_ula_omega(double omega, int n) {
  VectorXcd a(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) a(i) = std::polar(norm, omega * i);
  return a;
}

VectorXcd steer_upa(double theta, double phi, int nx, int ny) {
  return steer_upa_omega(kPi * std::sin(theta) * std::cos(phi), kPi * std::sin(phi), nx, ny);
}

VectorXcd steer_upa_omega(double omega_x, double omega_y, int nx, int ny) {
  VectorXcd a(nx * ny);
  const double norm = 1.0 / std::sqrt(static_cast<double>(nx * ny));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      a(i * ny + j) = std::polar(norm, omega_x * i + omega_y * j);
  return a;
}

double raised_cosine(double tau, double ts, double rolloff) {
  const double t = tau / ts;
  const double denom = 1.0 - 4.0 * rolloff * rolloff * t * t;
  if (std::abs(denom) < 1e-8) {
    // limit at t = +-1/(2 rolloff)
    return 0.5 * rolloff * std::sin(kPi / (2.0 * rolloff));
  }
  const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
  return sinc * std::cos(kPi * rolloff * t) / denom;
}

namespace {

// Physical angles for an on-grid IRS point; requires |wx| <= pi*cos(phi).
bool grid_to_angles(double wx, double wy, double& theta, double& phi) {
  const double sp = wy / kPi;
  if (sp < -1.0 || sp > 1.0) return false;
  phi = std::asin(sp);
  const double cp = std::cos(phi);
  const double sx = wx / kPi;
  if (cp < 1e-12) {
    if (std::abs(sx) > 1e-12) return false;
    theta = 0.0;
    return true;
  }
  const double st = sx / cp;
  if (st < -1.0 || st > 1.0) return false;
  theta = std::asin(st);
  return true;
}

Path draw_irs_grid_point(const SystemConfig& cfg, Rng& rng) {
  Path p;
  for (;;) {
    const int gx = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.grid_irs_x)));
    const int gy = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.grid_irs_y)));
    double theta, phi;
    if (grid_to_angles(grid_omega(gx, cfg.grid_irs_x), grid_omega(gy, cfg.grid_irs_y),
                       theta, phi)) {
      p.g_irs_x = gx;
      p.g_irs_y = gy;
      p.aoa_az = theta;
      p.aoa_el = phi;
      return p;
    }
  }
}

}  // namespace

PathSet draw_paths(const SystemConfig& cfg, Rng& rng) {
  if (cfg.paths_f <= 0 || cfg.paths_g <= 0)
    throw std::invalid_argument("path count must be positive");
  PathSet ps;
  ps.f.resize(static_cast<size_t>(cfg.n_ue));
  for (int u = 0; u < cfg.n_ue; ++u) {
    ps.f[static_cast<size_t>(u)].reserve(static_cast<size_t>(cfg.paths_f));
    for (int l = 0; l < cfg.paths_f; ++l) {
      Path p;
      if (cfg.on_grid) {
        p = draw_irs_grid_point(cfg, rng);
      } else {
        p.aoa_az = rng.uniform(0.0, kPi);
        p.aoa_el = rng.uniform(-kPi / 2.0, kPi / 2.0);
      }
      p.gain = rng.cnormal();
      p.delay = rng.uniform(0.0, cfg.tau_max);
      p.aod_az = rng.uniform(0.0, kPi);  // UE side, single antenna
      ps.f[static_cast<size_t>(u)].push_back(p);
    }
  }
  ps.g.reserve(static_cast<size_t>(cfg.paths_g));
  for (int l = 0; l < cfg.paths_g; ++l) {
    Path p;
    if (cfg.on_grid) {
      p = draw_irs_grid_point(cfg, rng);  // fills the IRS AoD grid point
      p.aod_az = p.aoa_az;
      p.aod_el = p.aoa_el;
      p.g_bs = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.grid_bs)));
      p.aoa_az = std::asin(grid_omega(p.g_bs, cfg.grid_bs) / kPi);
      p.aoa_el = 0.0;
    } else {
      p.aoa_az = rng.uniform(0.0, kPi);  // BS AoA
      p.aod_az = rng.uniform(0.0, kPi);  // IRS AoD
      p.aod_el = rng.uniform(-kPi / 2.0, kPi / 2.0);
    }
    p.gain = rng.cnormal();
    p.delay = rng.uniform(0.0, cfg.tau_max);
    ps.g.push_back(p);
  }
  return ps;
}

VectorXcd delay_tap_f(const SystemConfig& cfg, const std::vector<Path>& paths, int d) {
  const int ni = cfg.n_irs();
  VectorXcd tap = VectorXcd::Zero(ni);
  const double scale = std::sqrt(static_cast<double>(ni) / static_cast<double>(paths.size()));
  for (const Path& p : paths) {
    const double pulse = raised_cosine(d * cfg.ts() - p.delay, cfg.ts(), cfg.rolloff);
    if (pulse == 0.0) continue;
    tap += (scale * pulse * p.gain) * steer_upa(p.aoa_az, p.aoa_el, cfg.n_irs_x, cfg.n_irs_y);
  }
  return tap;
}

MatrixXcd delay_tap_g(const SystemConfig& cfg, const std::vector<Path>& paths, int d) {
  const int ni = cfg.n_irs();
  MatrixXcd tap = MatrixXcd::Zero(cfg.n_bs, ni);
  const double scale =
      std::sqrt(static_cast<double>(ni * cfg.n_bs) / static_cast<double>(paths.size()));
  for (const Path& p : paths) {
    const double pulse = raised_cosine(d * cfg.ts() - p.delay, cfg.ts(), cfg.rolloff);
    if (pulse == 0.0) continue;
    const VectorXcd ab = steer_ula(p.aoa_az, cfg.n_bs);
    const VectorXcd ai = steer_upa(p.aod_az, p.aod_el, cfg.n_irs_x, cfg.n_irs_y);
    tap += (scale * pulse * p.gain) * (ab * ai.adjoint());
  }
  return tap;
}

std::complex<double> path_freq_response(const SystemConfig& cfg, double delay, int k) {
  std::complex<double> acc = 0.0;
  const int taps = cfg.n_taps();
  for (int d = 0; d < taps; ++d) {
    const double pulse = raised_cosine(d * cfg.ts() - delay, cfg.ts(), cfg.rolloff);
    if (pulse == 0.0) continue;
    const double phase = -2.0 * kPi * static_cast<double>(d) * static_cast<double>(k) /
                         static_cast<double>(cfg.n_sc);
    acc += pulse * std::polar(1.0, phase);
  }
  return acc;
}

void freq_channel(const SystemConfig& cfg, const PathSet& paths,
                  std::vector<MatrixXcd>& f_out, std::vector<MatrixXcd>& g_out) {
  const int ni = cfg.n_irs();
  f_out.assign(static_cast<size_t>(cfg.n_ue), MatrixXcd::Zero(ni, cfg.n_sc));
  g_out.assign(static_cast<size_t>(cfg.n_sc), MatrixXcd::Zero(cfg.n_bs, ni));
  // accumulate per path: the pulse transform factors out of the steering
  for (int u = 0; u < cfg.n_ue; ++u) {
    const double scale = std::sqrt(static_cast<double>(ni) /
                                   static_cast<double>(paths.f[static_cast<size_t>(u)].size()));
    for (const Path& p : paths.f[static_cast<size_t>(u)]) {
      const VectorXcd ai = steer_upa(p.aoa_az, p.aoa_el, cfg.n_irs_x, cfg.n_irs_y);
      for (int k = 1; k <= cfg.n_sc; ++k) {
        const std::complex<double> c = scale * p.gain * path_freq_response(cfg, p.delay, k);
        f_out[static_cast<size_t>(u)].col(k - 1) += c * ai;
      }
    }
  }
  const double scale_g = std::sqrt(static_cast<double>(ni * cfg.n_bs) /
                                   static_cast<double>(paths.g.size()));
  for (const Path& p : paths.g) {
    const VectorXcd ab = steer_ula(p.aoa_az, cfg.n_bs);
    const VectorXcd ai = steer_upa(p.aod_az, p.aod_el, cfg.n_irs_x, cfg.n_irs_y);
    const MatrixXcd outer = ab * ai.adjoint();
    for (int k = 1; k <= cfg.n_sc; ++k) {
      const std::complex<double> c = scale_g * p.gain * path_freq_response(cfg, p.delay, k);
      g_out[static_cast<size_t>(k - 1)] += c * outer;
    }
  }
}

MatrixXcd cascaded(const MatrixXcd& g_k, const VectorXcd& f_k) {
  if (g_k.cols() != f_k.size())
    throw std::invalid_argument("cascaded: G columns != f length");
  return g_k * f_k.asDiagonal();
}

ChannelRealization realize_channel(const SystemConfig& cfg, Rng& rng) {
  ChannelRealization cr;
  cr.cfg = cfg;
  cr.paths = draw_paths(cfg, rng);
  freq_channel(cfg, cr.paths, cr.f, cr.g);
  cr.h_casc.assign(static_cast<size_t>(cfg.n_ue),
                   std::vector<MatrixXcd>(static_cast<size_t>(cfg.n_sc)));
  for (int u = 0; u < cfg.n_ue; ++u)
    for (int k = 0; k < cfg.n_sc; ++k)
      cr.h_casc[static_cast<size_t>(u)][static_cast<size_t>(k)] =
          cascaded(cr.g[static_cast<size_t>(k)], cr.f[static_cast<size_t>(u)].col(k));
  return cr;
}

}  // namespace irsce
