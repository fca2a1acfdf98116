#pragma once

#include <string>
#include <utility>
#include <vector>

#include "irsce/cgraph.hpp"
#include "irsce/rng.hpp"

namespace irsce {

// Named views of the tensors a block owns, for optimizers and snapshots.
using ParamRefs = std::vector<std::pair<std::string, tl::Tensor*>>;

// DnCNN + frequency/spatial attention weights. Conv filters are K x (3x3xK),
// the FAN stage is dense 4K -> 2K -> 2K (pooled avg|max x re|im statistics in,
// per-subcarrier re/im scales out), the SAN stage is K x (3x3xK) then
// 1 x (3x3x2).
struct DaParams {
  int n_sc = 0;   // K
  int layers = 0; // L_d
  std::vector<tl::Tensor> conv_k, conv_b;
  tl::Tensor f1_w, f1_b, f2_w, f2_b;
  tl::Tensor s1_k, s1_b, s2_k, s2_b;

  static DaParams zeros(int n_sc, int layers);
  static DaParams he_init(int n_sc, int layers, Rng& rng);
  std::int64_t param_count() const;
  std::int64_t dncnn_conv_param_count() const;
  void collect(const std::string& prefix, ParamRefs& out);
};

// Mobile denoising blocks (depthwise 3x3 + pointwise 1x1 per block) and the
// single 1x1 spatial-attention conv.
struct MdaParams {
  int n_sc = 0;    // K
  int blocks = 0;  // L_d,i
  std::vector<tl::Tensor> dw_k, dw_b;  // [K,3,3], [K]
  std::vector<tl::Tensor> pw_k, pw_b;  // [K,K,1,1], [K]
  tl::Tensor sa_k, sa_b;               // [1,2,1,1], [1]

  static MdaParams zeros(int n_sc, int blocks);
  static MdaParams he_init(int n_sc, int blocks, Rng& rng);
  std::int64_t param_count() const;
  std::int64_t block_conv_param_count() const;
  void collect(const std::string& prefix, ParamRefs& out);
};

struct DaVars {
  std::vector<tl::Value> conv_k, conv_b;
  tl::Value f1_w, f1_b, f2_w, f2_b, s1_k, s1_b, s2_k, s2_b;
};

struct MdaVars {
  std::vector<tl::Value> dw_k, dw_b, pw_k, pw_b;
  tl::Value sa_k, sa_b;
};

DaVars bind_da(tl::Graph& g, const DaParams& p, bool trainable);
MdaVars bind_mda(tl::Graph& g, const MdaParams& p, bool trainable);

// Column-major unflattening of a [G, K] complex block into stacked
// re/im planes [2, K, rows, cols]; exact inverse of vectorization.
tl::Value complex_to_planes(CVal c, std::int64_t rows, std::int64_t cols);
CVal planes_to_complex(tl::Value planes);

// DnCNN residual denoiser: input/output [2, K, H, W].
tl::Value dncnn(tl::Value ca, const DaVars& v, double slope);
// Frequency attention: returns the reweighted maps [2,K,H,W] and the
// per-subcarrier weights z'_c as a [K,2] value.
struct FanOut {
  tl::Value maps;
  tl::Value weights;
};
FanOut fan(tl::Value gd, const DaVars& v, double slope);
// Spatial attention: fuses the FAN output with G_D into G_M.
tl::Value san(tl::Value zc, tl::Value gd, const DaVars& v, double slope);

// Full DA block on a [G, K] complex correlation: vec2mat -> DnCNN -> FAN ->
// SAN -> back to [G, K].
CVal da_block(CVal c, const DaVars& v, std::int64_t rows, std::int64_t cols, double slope);

// Mobile DA block; input [G_i, K] complex, reshaped to sqrt(G_i) x sqrt(G_i).
tl::Value mda(tl::Value ca, const MdaVars& v, double slope);
CVal mda_block(CVal c, const MdaVars& v, double slope);

}  // namespace irsce
