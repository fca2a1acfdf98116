#pragma once

#include <Eigen/Dense>

#include <vector>

#include "irsce/channel.hpp"

namespace irsce {

enum class ShrinkMode { kEntrywise, kRowGroup };

struct SolverReport {
  MatrixXcd x_hat;                     // G x K estimate
  int iterations = 0;
  std::vector<double> residual_norms;  // Frobenius norm per iteration
  std::vector<int> support;            // OMP only
  bool ls_regularized = false;         // ridge fallback was taken
};

struct SwompOptions {
  int max_iter = 100;
  double eps = 0.0;        // stop when ||V||_F^2 <= eps
  bool weighted = true;    // per-subcarrier inverse residual-power weights
};

// Simultaneous (weighted) OMP for the MMV problem Y ~ Upsilon X with joint
// row support across subcarriers.
SolverReport swomp(const MatrixXcd& y, const MatrixXcd& upsilon, const SwompOptions& opt);

struct AmpOptions {
  int iterations = 10;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda_b = 1.0;
  bool sqrt_m_norm = true;  // paper-letter Onsager normalization
  ShrinkMode shrink = ShrinkMode::kEntrywise;
  bool record_trace = false;
};

struct AmpTrace {
  std::vector<MatrixXcd> x;  // Xhat_n per iteration
  std::vector<MatrixXcd> v;  // V_n per iteration (V_0 = Y first)
  std::vector<double> b;     // Onsager coefficient per iteration
};

// AMP with Onsager correction and fixed (untrained) parameters
// beta_n = Upsilon^H, lambda = {1,1,1}; the zero-training reference point.
SolverReport amp_untrained(const MatrixXcd& y, const MatrixXcd& upsilon, const AmpOptions& opt,
                           AmpTrace* trace = nullptr);

// Complex shrinkage eta(r) = l1 * max(|r| - l2*sigma, 0) * r/|r| applied per
// entry or per row group; used by the solvers above and exposed for tests.
MatrixXcd shrink(const MatrixXcd& r, double l1, double l2, double sigma, ShrinkMode mode);
// Count of active entries (or rows in row-group mode).
long shrink_active(const MatrixXcd& r, double l2, double sigma, ShrinkMode mode);

}  // namespace irsce
