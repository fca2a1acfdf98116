#pragma once

#include <string>
#include <vector>

#include "irsce/net_rlamp.hpp"
#include "irsce/sensing.hpp"

namespace irsce {

// Persisted collection of (Y, H) pairs with generation metadata. The problem
// matrices are not stored: they rebuild deterministically from (cfg, seed).
struct Dataset {
  SystemConfig cfg;
  std::uint64_t seed = 0;
  std::string split = "train";
  std::vector<MatrixXcd> y;
  std::vector<MatrixXcd> h;

  int count() const { return static_cast<int>(y.size()); }
  Dataset slice(int begin, int end) const;
};

Dataset gen_dataset(const SystemConfig& cfg, int count, std::uint64_t seed,
                    const std::string& split);
// IRSD file: magic, version u16, length-prefixed JSON header, then per-sample
// interleaved re/im float32 little-endian values for Y then H.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Shared problem matrices for a (cfg, seed) pair.
struct ProblemMatrices {
  MatrixXcd phi, psi, upsilon;
};
ProblemMatrices problem_matrices(const SystemConfig& cfg, std::uint64_t seed);

// Batch mean of ||Psi Z_j - H_j||_F^2 / ||H_j||_F^2; samples with ||H|| = 0
// are skipped (counted in *skipped when given).
double nmse_loss(const MatrixXcd& psi, const std::vector<MatrixXcd>& z,
                 const std::vector<MatrixXcd>& h, int* skipped = nullptr);
double loss_linear(const MatrixXcd& psi, const std::vector<MatrixXcd>& r_n,
                   const std::vector<MatrixXcd>& h);
double loss_nonlinear(const MatrixXcd& psi, const std::vector<MatrixXcd>& x_n,
                      const std::vector<MatrixXcd>& h);

struct AdamState {
  tl::Tensor m, v;
  long t = 0;
};

void adam_step(tl::Tensor& param, const tl::Tensor& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainOptions {
  int epochs_learn = 6;
  int epochs_refine = 6;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  bool verbose = false;
};

struct StageRecord {
  int stage = 0;            // layer index n
  std::string phase;        // "linear" or "nonlinear"
  std::vector<double> loss_curve;  // objective after each epoch, per sub-step
  double val_nmse_db = 0.0;        // held-out NMSE through n layers
  double wall_clock_sec = 0.0;
};

struct TrainReport {
  std::vector<StageRecord> stages;
  double final_val_nmse_db = 0.0;
};

// Algorithm-2 style layer-by-layer training of a DA-RLAMP (or plain LAMP)
// network; `net` is updated in place.
TrainReport train_da_rlamp(NetworkParams& net, const Dataset& train, const Dataset& val,
                           const ProblemMatrices& pm, const TrainOptions& opt);
// Algorithm-3 style training of the MDA-RLAMP network (shared beta).
TrainReport train_mda_rlamp(NetworkParams& net, const Dataset& train, const Dataset& val,
                            const ProblemMatrices& pm, const TrainOptions& opt);

// Held-out NMSE (dB, expectation of the ratio inside the log) of the network
// truncated to `depth` layers.
double validation_nmse_db(const NetworkParams& net, const Dataset& data,
                          const ProblemMatrices& pm, int depth);

}  // namespace irsce
