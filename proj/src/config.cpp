#include "irsce/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace irsce {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + where + "." + it.key() + "'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json system_to_json(const SystemConfig& c) {
  return json{{"n_bs", c.n_bs},
              {"n_irs_x", c.n_irs_x},
              {"n_irs_y", c.n_irs_y},
              {"subcarriers", c.n_sc},
              {"users", c.n_ue},
              {"pilots", c.pilots},
              {"pilots_irs", c.pilots_irs},
              {"carrier_hz", c.carrier_hz},
              {"tau_max", c.tau_max},
              {"paths_f", c.paths_f},
              {"paths_g", c.paths_g},
              {"grid_bs", c.grid_bs},
              {"grid_irs_x", c.grid_irs_x},
              {"grid_irs_y", c.grid_irs_y},
              {"grid_ue", c.grid_ue},
              {"snr_db", c.snr_db},
              {"seed", c.seed},
              {"sample_period", c.sample_period},
              {"rolloff", c.rolloff},
              {"pulse_halfwidth", c.pulse_halfwidth},
              {"on_grid", c.on_grid},
              {"hybrid", c.hybrid},
              {"active_sensors", c.active_sensors}};
}

SystemConfig system_from_json(const json& j) {
  static const std::set<std::string> allowed = {
      "n_bs",      "n_irs_x",     "n_irs_y",        "subcarriers", "users",
      "pilots",    "pilots_irs",  "carrier_hz",     "tau_max",     "paths_f",
      "paths_g",   "grid_bs",     "grid_irs_x",     "grid_irs_y",  "grid_ue",
      "snr_db",    "seed",        "sample_period",  "rolloff",     "pulse_halfwidth",
      "on_grid",   "hybrid",      "active_sensors"};
  reject_unknown(j, allowed, "system");
  SystemConfig c;
  maybe(j, "n_bs", c.n_bs);
  maybe(j, "n_irs_x", c.n_irs_x);
  maybe(j, "n_irs_y", c.n_irs_y);
  maybe(j, "subcarriers", c.n_sc);
  maybe(j, "users", c.n_ue);
  maybe(j, "pilots", c.pilots);
  maybe(j, "pilots_irs", c.pilots_irs);
  maybe(j, "carrier_hz", c.carrier_hz);
  maybe(j, "tau_max", c.tau_max);
  maybe(j, "paths_f", c.paths_f);
  maybe(j, "paths_g", c.paths_g);
  maybe(j, "grid_bs", c.grid_bs);
  maybe(j, "grid_irs_x", c.grid_irs_x);
  maybe(j, "grid_irs_y", c.grid_irs_y);
  maybe(j, "grid_ue", c.grid_ue);
  maybe(j, "snr_db", c.snr_db);
  maybe(j, "seed", c.seed);
  maybe(j, "sample_period", c.sample_period);
  maybe(j, "rolloff", c.rolloff);
  maybe(j, "pulse_halfwidth", c.pulse_halfwidth);
  maybe(j, "on_grid", c.on_grid);
  maybe(j, "hybrid", c.hybrid);
  maybe(j, "active_sensors", c.active_sensors);
  c.validate();
  return c;
}

OnsagerNorm RunConfig::onsager() const {
  if (network.onsager_norm == "sqrtM") return OnsagerNorm::kSqrtM;
  if (network.onsager_norm == "M") return OnsagerNorm::kM;
  throw std::invalid_argument("config: network.onsager_norm must be sqrtM or M");
}

ShrinkMode RunConfig::shrink() const {
  if (network.shrinkage == "entrywise") return ShrinkMode::kEntrywise;
  if (network.shrinkage == "rowgroup") return ShrinkMode::kRowGroup;
  throw std::invalid_argument("config: network.shrinkage must be entrywise or rowgroup");
}

RunConfig desk_profile() {
  RunConfig c;
  c.system.n_bs = 8;
  c.system.n_irs_x = 4;
  c.system.n_irs_y = 4;
  c.system.n_sc = 4;
  c.system.n_ue = 1;
  c.system.pilots = 8;
  c.system.pilots_irs = 8;
  c.system.paths_f = 2;
  c.system.paths_g = 2;
  c.system.grid_bs = 16;
  c.system.grid_irs_x = 8;
  c.system.grid_irs_y = 8;
  c.system.snr_db = 15.0;
  c.network.layers = 3;
  c.network.block_layers = 2;
  c.training.epochs_learn = 6;
  c.training.epochs_refine = 6;
  c.training.batch = 32;
  c.training.lr = 1e-3;
  return c;
}

RunConfig paper_profile() {
  RunConfig c;
  c.system.n_bs = 16;
  c.system.n_irs_x = 8;
  c.system.n_irs_y = 8;
  c.system.n_sc = 16;
  c.system.n_ue = 4;
  c.system.pilots = 32;
  c.system.pilots_irs = 32;
  c.system.paths_f = 5;
  c.system.paths_g = 5;
  c.system.grid_bs = 32;       // 2 N_b
  c.system.grid_irs_x = 16;    // G_i = 4 N_i
  c.system.grid_irs_y = 16;
  c.system.snr_db = 15.0;
  c.network.layers = 6;
  c.network.block_layers = 3;
  c.training.epochs_learn = 10000;
  c.training.epochs_refine = 10000;
  c.training.batch = 128;
  c.training.lr = 1e-3;
  return c;
}

json run_to_json(const RunConfig& c) {
  return json{{"system", system_to_json(c.system)},
              {"network",
               {{"kind", c.network.kind},
                {"layers", c.network.layers},
                {"block_layers", c.network.block_layers},
                {"residual", c.network.residual},
                {"onsager_norm", c.network.onsager_norm},
                {"shrinkage", c.network.shrinkage},
                {"leaky_slope", c.network.leaky_slope}}},
              {"training",
               {{"epochs_learn", c.training.epochs_learn},
                {"epochs_refine", c.training.epochs_refine},
                {"batch", c.training.batch},
                {"lr", c.training.lr},
                {"val_fraction", c.training.val_fraction}}},
              {"seed", c.seed},
              {"swomp_eps", c.swomp_eps}};
}

RunConfig run_from_json(const json& j, const RunConfig& base) {
  static const std::set<std::string> top = {"system", "network", "training", "seed",
                                            "swomp_eps"};
  reject_unknown(j, top, "");
  RunConfig c = base;
  if (j.contains("system")) {
    // strict merge: run the whole object through the checked parser
    json merged = system_to_json(base.system);
    static const std::set<std::string> sys_keys = [] {
      std::set<std::string> s;
      for (auto it = system_to_json(SystemConfig{}).begin();
           it != system_to_json(SystemConfig{}).end(); ++it)
        s.insert(it.key());
      return s;
    }();
    reject_unknown(j.at("system"), sys_keys, "system");
    merged.update(j.at("system"));
    c.system = system_from_json(merged);
  }
  if (j.contains("network")) {
    static const std::set<std::string> net_keys = {
        "kind",         "layers",    "block_layers", "residual",
        "onsager_norm", "shrinkage", "leaky_slope"};
    const json& n = j.at("network");
    reject_unknown(n, net_keys, "network");
    maybe(n, "kind", c.network.kind);
    maybe(n, "layers", c.network.layers);
    maybe(n, "block_layers", c.network.block_layers);
    maybe(n, "residual", c.network.residual);
    maybe(n, "onsager_norm", c.network.onsager_norm);
    maybe(n, "shrinkage", c.network.shrinkage);
    maybe(n, "leaky_slope", c.network.leaky_slope);
  }
  if (j.contains("training")) {
    static const std::set<std::string> tr_keys = {"epochs_learn", "epochs_refine", "batch",
                                                  "lr", "val_fraction"};
    const json& t = j.at("training");
    reject_unknown(t, tr_keys, "training");
    maybe(t, "epochs_learn", c.training.epochs_learn);
    maybe(t, "epochs_refine", c.training.epochs_refine);
    maybe(t, "batch", c.training.batch);
    maybe(t, "lr", c.training.lr);
    maybe(t, "val_fraction", c.training.val_fraction);
  }
  maybe(j, "seed", c.seed);
  maybe(j, "swomp_eps", c.swomp_eps);
  net_kind_from(c.network.kind);  // validates the name
  (void)c.onsager();
  (void)c.shrink();
  if (c.network.layers < 1) throw std::invalid_argument("config: network.layers must be >= 1");
  if (c.training.batch < 1) throw std::invalid_argument("config: training.batch must be >= 1");
  if (c.training.val_fraction < 0.0 || c.training.val_fraction >= 1.0)
    throw std::invalid_argument("config: training.val_fraction must be in [0, 1)");
  return c;
}

RunConfig load_run_config(const std::string& path, const std::string& profile) {
  RunConfig base;
  if (profile == "desk")
    base = desk_profile();
  else if (profile == "paper")
    base = paper_profile();
  else
    throw std::invalid_argument("unknown profile: " + profile);
  if (path.empty()) return base;
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config file not found: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  return run_from_json(j, base);
}

}  // namespace irsce
