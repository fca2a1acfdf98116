#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "irsce/cgraph.hpp"
#include "irsce/classical.hpp"
#include "irsce/net_da.hpp"

namespace irsce {

enum class NetKind { kLamp, kDaRlamp, kMdaRlamp };
enum class OnsagerNorm { kSqrtM, kM };

std::string net_kind_name(NetKind k);
NetKind net_kind_from(const std::string& name);

// Per-layer shrinkage parameters {lambda_1, lambda_2, lambda_b}; lambda_2 is
// clipped to >= 0 during training.
struct LayerLambda {
  tl::Tensor l1 = tl::Tensor::scalar(1.0);
  tl::Tensor l2 = tl::Tensor::scalar(1.0);
  tl::Tensor lb = tl::Tensor::scalar(1.0);
};

// The unrolled network: per-layer beta_n and lambda_n plus the DA (or MDA)
// block weights. MDA shares a single beta across layers.
struct NetworkParams {
  NetKind kind = NetKind::kLamp;
  int layers = 0;  // N
  bool residual = true;
  OnsagerNorm onsager = OnsagerNorm::kSqrtM;
  ShrinkMode shrink_mode = ShrinkMode::kEntrywise;
  double leaky_slope = 0.01;

  // dimensions, recorded in the model manifest
  int grid_rows = 0;  // G_i (passive vec2mat rows) or sqrt(G_i) side handled internally
  int grid_cols = 0;  // G_b
  int grid_ue = 1;
  int n_sc = 0;  // K
  int m = 0;     // measurement rows

  std::vector<tl::CTensorData> beta;   // [layers], or [1] shared for MDA
  std::vector<LayerLambda> lambda;     // [layers]
  DaParams da;
  MdaParams mda;

  int dict_cols() const { return grid_rows * grid_cols * grid_ue; }
  bool shared_beta() const { return kind == NetKind::kMdaRlamp; }
  const tl::CTensorData& beta_for_layer(int n) const {
    return beta[shared_beta() ? 0 : static_cast<size_t>(n)];
  }
  tl::CTensorData& beta_for_layer(int n) {
    return beta[shared_beta() ? 0 : static_cast<size_t>(n)];
  }
  void collect(ParamRefs& out);  // all tensors, named

  // beta = Upsilon^H for every layer, lambda = {1,1,1}, block weights He-init.
  static NetworkParams init(NetKind kind, int layers, int block_layers,
                            const MatrixXcd& upsilon, int grid_rows, int grid_cols,
                            int grid_ue, int n_sc, std::uint64_t seed);
};

// Which tensors are bound as trainable leaves when building a graph.
struct TrainSelection {
  bool block_weights = false;          // Theta or phi
  std::vector<char> beta;              // per stored beta tensor
  std::vector<char> lambda;            // per layer
  static TrainSelection none(const NetworkParams& p) {
    TrainSelection s;
    s.beta.assign(p.beta.size(), 0);
    s.lambda.assign(static_cast<size_t>(p.layers), 0);
    return s;
  }
};

struct BoundNet {
  std::vector<CVal> beta;
  std::vector<std::array<tl::Value, 3>> lambda;
  DaVars da;
  MdaVars mda;
};

BoundNet bind_network(tl::Graph& g, const NetworkParams& p, const TrainSelection& sel);

// Values the forward pass exposes; indices are layer counts, so r[n] = R_{n+1}
// (r[0] is the block output seeding the first layer) and xhat[n-1] = Xhat_n.
struct ForwardTrace {
  CVal corr;              // C = beta_1 Y
  std::vector<CVal> r;
  std::vector<CVal> xhat;
  std::vector<CVal> v;    // v[0] = Y
};

// Runs the feature block and `depth` RLAMP layers; when want_next_r is set
// (and beta for layer depth+1 exists) also forms R_{depth+1} for the linear
// loss. Raises NumericalError tagged with the failing layer on divergence.
ForwardTrace rlamp_forward(tl::Graph& g, const NetworkParams& p, const BoundNet& b,
                           CVal y, CVal upsilon, int depth, bool want_next_r);

// Frequency-domain reconstruction vec(H[k]) = Psi vec(X[k]) for all k.
CVal reconstruct(CVal psi, CVal x);

// Inference helpers (all-constant graphs).
MatrixXcd estimate_channel(const NetworkParams& p, const MatrixXcd& y,
                           const MatrixXcd& upsilon, const MatrixXcd& psi, int depth = -1);
MatrixXcd estimate_coefficients(const NetworkParams& p, const MatrixXcd& y,
                                const MatrixXcd& upsilon, int depth = -1);

// Model snapshot with a manifest record naming kind, N and the dimensions.
void save_model(const NetworkParams& p, const std::string& path);
NetworkParams load_model(const std::string& path);

}  // namespace irsce
