#pragma once

#include <Eigen/Dense>

#include <vector>

#include "irsce/channel.hpp"
#include "irsce/rng.hpp"

namespace irsce {

struct Grids {
  std::vector<double> bs;     // virtual angles for the BS ULA dictionary
  std::vector<double> irs_x;  // per-axis virtual angles for the IRS UPA
  std::vector<double> irs_y;
};

// Redundant steering dictionaries and the merged cascaded dictionary.
struct Dictionary {
  MatrixXcd bs;    // A~_R,b: N_b x G_b
  MatrixXcd irs;   // A~_T,i = A~_R,i (shared grid): N_i x G_i
  MatrixXcd ue;    // a~_T: 1 x G_u (all ones for a single-antenna UE)
  MatrixXcd dg;    // D_g: G_i x N_i, first G_i rows of the Khatri-Rao matrix D
  std::vector<std::vector<int>> merge;  // class -> row indices of D (size G_i)
  MatrixXcd psi;         // N_i N_b x G_i G_b G_u
  MatrixXcd psi_hybrid;  // N_i x G_u G_i
  Grids grids;
};

Grids build_grids(const SystemConfig& cfg);

// D_g plus the duplicate-row classes; validates that D has exactly G_i
// distinct rows (tolerance 1e-9), exhaustively when small and sampled when
// the full D would be large. Throws std::runtime_error on a grid that is not
// closed under the difference structure.
void build_dg(const SystemConfig& cfg, const MatrixXcd& irs_dict, MatrixXcd& dg_out,
              std::vector<std::vector<int>>& merge_out);

MatrixXcd build_psi(const Dictionary& dict);
MatrixXcd build_psi_hybrid(const Dictionary& dict);

Dictionary build_dictionary(const SystemConfig& cfg);

// Per-symbol training randomness. Substreams are keyed by (seed, t) so pilot
// prefixes are stable when T grows.
VectorXcd draw_phases(const SystemConfig& cfg, std::uint64_t seed, int t);
MatrixXcd draw_combiner(const SystemConfig& cfg, std::uint64_t seed, int t);
Eigen::VectorXi draw_sensor_mask(const SystemConfig& cfg, std::uint64_t seed);

// Stacked measurement matrix: M x N_i N_b (passive) with M = T * N_s.
MatrixXcd build_phi(const SystemConfig& cfg, std::uint64_t seed);
// Hybrid selection matrix: T_i x N_i, one-hot rows over the sensor support.
MatrixXcd build_phi_hybrid(const SystemConfig& cfg, std::uint64_t seed);

struct SensingProblem {
  MatrixXcd phi;      // measurement matrix
  MatrixXcd psi;      // dictionary used for reconstruction
  MatrixXcd upsilon;  // phi * psi
  MatrixXcd y;        // M x K observations
  MatrixXcd h_true;   // vec(H_c[k]) per column (passive) or f[k] (hybrid)
  MatrixXcd x_true;   // G x K ground-truth sparse coefficients; empty off-grid
  double noise_var = 0.0;
  bool hybrid = false;
};

// Ground-truth sparse coefficients for an on-grid realization (passive).
MatrixXcd sparse_coefficients(const SystemConfig& cfg, const ChannelRealization& cr,
                              const Dictionary& dict, int ue);
// Hybrid counterpart: G_i x K coefficients of f_u on the IRS dictionary.
MatrixXcd sparse_coefficients_hybrid(const SystemConfig& cfg, const ChannelRealization& cr,
                                     int ue);

// Builds Y = Phi * h + noise for one UE, with the noise variance set from the
// per-entry SNR ||Phi h||_F^2 / (M K sigma^2) = snr. noise_seed feeds the
// noise draw only, so a stored (config, seed) pair regenerates Y exactly.
SensingProblem assemble_problem(const SystemConfig& cfg, const ChannelRealization& cr,
                                const Dictionary& dict, int ue, std::uint64_t phi_seed,
                                std::uint64_t noise_seed);

}  // namespace irsce
