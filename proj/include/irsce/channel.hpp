#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

#include "irsce/rng.hpp"

namespace irsce {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// System geometry and generation knobs. The IRS is an Nx-by-Ny planar array;
// dictionary grids live in the virtual-angle (spatial phase) domain.
struct SystemConfig {
  int n_bs = 8;          // BS antennas (ULA)
  int n_irs_x = 4;       // IRS panel split
  int n_irs_y = 4;
  int n_sc = 4;          // subcarriers K
  int n_ue = 1;          // users U (orthogonal pilots, processed per UE)
  int pilots = 8;        // training symbols T (passive problem)
  int pilots_irs = 8;    // training symbols T_i (hybrid problem)
  double carrier_hz = 100e9;
  double tau_max = 100e-9;
  int paths_f = 2;       // paths per UE-IRS link
  int paths_g = 2;       // paths on the IRS-BS link
  int grid_bs = 16;      // G_b
  int grid_irs_x = 8;    // G_i = grid_irs_x * grid_irs_y
  int grid_irs_y = 8;
  int grid_ue = 1;       // G_u (single-antenna UE: 1)
  double snr_db = 15.0;
  std::uint64_t seed = 1;

  double sample_period = 0.0;  // T_s seconds; 0 derives tau_max/(K-1)
  double rolloff = 0.8;        // raised-cosine roll-off
  int pulse_halfwidth = 4;     // taps kept past the nominal delay window
  bool on_grid = false;        // snap path angles to the dictionary grids
  bool hybrid = false;         // hybrid-IRS problem instead of cascaded
  int active_sensors = 0;      // N_i^a; 0 means pilots_irs

  int n_irs() const { return n_irs_x * n_irs_y; }
  int grid_irs() const { return grid_irs_x * grid_irs_y; }
  int streams() const { return n_ue; }  // N_s = N_RF^b = U
  int measurements() const { return pilots * streams(); }
  double ts() const {
    return sample_period > 0.0 ? sample_period
                               : tau_max / static_cast<double>(n_sc > 1 ? n_sc - 1 : 1);
  }
  int n_taps() const;
  int sensors() const { return active_sensors > 0 ? active_sensors : pilots_irs; }

  void validate() const;  // throws std::invalid_argument on bad extents
};

// One propagation path. Grid indices are -1 when drawn off-grid.
struct Path {
  std::complex<double> gain;
  double delay = 0.0;
  double aoa_az = 0.0, aoa_el = 0.0;  // at the receiving array of this link
  double aod_az = 0.0, aod_el = 0.0;
  int g_irs_x = -1, g_irs_y = -1;     // IRS grid point (AoA for f, AoD for g)
  int g_bs = -1;                      // BS grid point (g link only)
};

struct PathSet {
  std::vector<std::vector<Path>> f;  // [U][paths_f], UE-IRS
  std::vector<Path> g;               // [paths_g], IRS-BS
};

struct ChannelRealization {
  SystemConfig cfg;
  PathSet paths;
  std::vector<MatrixXcd> f;                    // [U], each N_i x K
  std::vector<MatrixXcd> g;                    // [K], each N_b x N_i
  std::vector<std::vector<MatrixXcd>> h_casc;  // [U][K], each N_b x N_i
};

// Normalized array responses, d_s/lambda_c = 1/2.
VectorXcd steer_ula(double theta, int n);
VectorXcd steer_upa(double theta, double phi, int nx, int ny);

// Steering evaluated directly at virtual angles (phase steps per element).
VectorXcd steer_ula_omega(double omega, int n);
VectorXcd steer_upa_omega(double omega_x, double omega_y, int nx, int ny);

double raised_cosine(double tau, double ts, double rolloff);

PathSet draw_paths(const SystemConfig& cfg, Rng& rng);

// Delay-domain taps for tap index d.
VectorXcd delay_tap_f(const SystemConfig& cfg, const std::vector<Path>& paths, int d);
MatrixXcd delay_tap_g(const SystemConfig& cfg, const std::vector<Path>& paths, int d);

// Per-path frequency response sum_d p(d*Ts - tau) e^{-j 2 pi d k / K}, k = 1..K.
std::complex<double> path_freq_response(const SystemConfig& cfg, double delay, int k);

// K-point transform of the taps; fills f and g of the realization.
void freq_channel(const SystemConfig& cfg, const PathSet& paths,
                  std::vector<MatrixXcd>& f_out, std::vector<MatrixXcd>& g_out);

MatrixXcd cascaded(const MatrixXcd& g_k, const VectorXcd& f_k);

ChannelRealization realize_channel(const SystemConfig& cfg, Rng& rng);

}  // namespace irsce
