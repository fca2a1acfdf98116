#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irsce/config.hpp"
#include "irsce/training.hpp"

namespace irsce {

// Model/problem dimension disagreement (CLI exit code 3).
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-pair squared-error ratio ||H - Hhat||^2 / ||H||^2; NaN when ||H|| = 0.
double nmse_ratio(const MatrixXcd& h, const MatrixXcd& hhat);
// 10 log10 of the ratio, clamped to a -300 dB floor.
double nmse_db(const MatrixXcd& h, const MatrixXcd& hhat);
// Aggregate as the paper's formula: expectation inside the log.
double nmse_db_mean(const std::vector<double>& ratios);

// Least-squares optimal complex scale argmin_a ||H - a*Hhat||_F.
std::complex<double> best_scale(const MatrixXcd& h, const MatrixXcd& hhat);

// Ergodic spectral efficiency of one subcarrier,
// log2 det(1 + |(G diag(f) r) W_b|^2 / sigma^2).
double spectral_efficiency(const MatrixXcd& g_k, const VectorXcd& f_k, const VectorXcd& r,
                           const MatrixXcd& w_b, double sigma2);

enum class EvalMethod { kZero, kSwomp, kAmpUntrained, kNetwork };
std::string method_name(EvalMethod m);

struct MethodSpec {
  EvalMethod method = EvalMethod::kSwomp;
  const NetworkParams* model = nullptr;  // kNetwork only
  int amp_iterations = 10;               // kAmpUntrained
  std::string label;                     // CSV label; defaults to method_name
  std::string name() const { return label.empty() ? method_name(method) : label; }
};

struct SweepRow {
  std::string method;
  double axis_value = 0.0;
  double mean_nmse_db = 0.0;
  double std_db = 0.0;
  int trials = 0;
  double opt_scale = 0.0;  // mean |argmin_a| diagnostic
};

struct SweepResult {
  std::string axis;  // snr_db | pilots | iterations
  std::vector<SweepRow> rows;
  std::string config_hash;
};

struct SweepSpec {
  std::string axis = "snr_db";
  std::vector<double> values;
  int trials = 50;
  int threads = 1;
};

// Runs every method over all axis values with common random numbers: the
// trial index keys the channel draw and a shared noise panel.
SweepResult sweep(const RunConfig& cfg, const std::vector<MethodSpec>& methods,
                  const SweepSpec& spec);

void emit_csv(const SweepResult& result, const std::string& path);
SweepResult parse_csv(const std::string& path);
void emit_svg(const SweepResult& result, const std::string& path);

// Spectral-efficiency proxy evaluation on estimated channels (matched-filter
// precoder from the estimate, plus a random unit-norm baseline).
struct SeRow {
  std::string method;
  double mean_se_mf = 0.0;
  double mean_se_rand = 0.0;
  int trials = 0;
};
std::vector<SeRow> spectral_efficiency_proxy(const RunConfig& cfg,
                                             const std::vector<MethodSpec>& methods,
                                             int trials, int threads);
void emit_se_csv(const std::vector<SeRow>& rows, const std::string& path);

std::string config_hash(const RunConfig& cfg);

}  // namespace irsce
