#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "irsce/channel.hpp"
#include "irsce/classical.hpp"
#include "irsce/net_rlamp.hpp"

namespace irsce {

nlohmann::json system_to_json(const SystemConfig& cfg);
SystemConfig system_from_json(const nlohmann::json& j);

struct NetConfig {
  std::string kind = "da-rlamp";  // da-rlamp | mda-rlamp | lamp
  int layers = 3;                 // N
  int block_layers = 2;           // L_d (DA) or L_d,i (MDA)
  bool residual = true;
  std::string onsager_norm = "sqrtM";   // sqrtM | M
  std::string shrinkage = "entrywise";  // entrywise | rowgroup
  double leaky_slope = 0.01;
};

struct TrainConfig {
  int epochs_learn = 6;
  int epochs_refine = 6;
  int batch = 32;
  double lr = 1e-3;
  double val_fraction = 0.1;
};

struct RunConfig {
  SystemConfig system;
  NetConfig network;
  TrainConfig training;
  std::uint64_t seed = 1;
  double swomp_eps = -1.0;  // < 0 selects the sigma^2 M K default

  OnsagerNorm onsager() const;
  ShrinkMode shrink() const;
  NetKind kind() const { return net_kind_from(network.kind); }
};

// Desk-scale default: full train+eval in minutes on one core.
RunConfig desk_profile();
// Table-II scale reference configuration.
RunConfig paper_profile();

nlohmann::json run_to_json(const RunConfig& cfg);
// Strict parse: unknown keys are rejected with a path-addressed message.
RunConfig run_from_json(const nlohmann::json& j, const RunConfig& base);
RunConfig load_run_config(const std::string& path, const std::string& profile);

}  // namespace irsce
