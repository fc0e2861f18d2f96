#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panelhmm/ingest.hpp"
#include "panelhmm/mcmc.hpp"
#include "panelhmm/simulate.hpp"

namespace panelhmm {

/// One JSON config file drives every subcommand. Unknown keys are rejected;
/// every key has a default; the canonical dump is hashed into all outputs.
struct RunConfig {
  // ingest
  std::string ingest_queries_csv;
  std::string ingest_views_csv;
  int ingest_period_months = 1;
  bool ingest_shift_by_one = false;
  long ingest_winsorize_cap = 0;
  bool ingest_zscore = false;

  // model
  int model_n_states = 3;
  int model_n_activities = 2;
  int model_n_covariates = 6;
  std::vector<double> model_initial_distribution;  // empty = uniform

  // sim
  int sim_n_analysts = 50;
  int sim_horizon = 12;
  double sim_queries_per_period_mean = 0.782;
  double sim_viewed_rate = 0.306;
  std::vector<double> sim_psi;       // empty = zeros
  std::vector<double> sim_sigma_theta = {1.0, 0.0, 1.0};  // [1,1], [2,1], [2,2]

  // mcmc
  long mcmc_n_iterations = 2000;
  long mcmc_burn_in = 1500;
  int mcmc_n_chains = 2;
  long mcmc_thinning = 1;
  double mcmc_target_acceptance = 0.234;
  double mcmc_adapt_decay = 0.6;
  long mcmc_freeze_at = -1;
  bool mcmc_psi_blocked = false;
  bool mcmc_store_random_effects = false;
  int mcmc_n_workers = 1;
  double mcmc_prior_variance = 30.0;

  // baseline
  std::vector<std::string> baseline_covariates;  // empty = all panel covariates
  std::vector<std::string> baseline_activities;  // empty = all panel activities

  // output
  std::string output_dir = ".";

  // top level
  std::uint64_t seed = 1;
};

namespace detail {

struct ConfigKey {
  const char* name;
  const char* type;  // "string" | "int" | "bool" | "real" | "real[]" | "string[]"
  const char* default_text;
  const char* help;
};

inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "int", "1", "root RNG seed; all streams derive from it"},
      {"ingest.queries_csv", "string", "\"\"", "query event log (CSV)"},
      {"ingest.views_csv", "string", "\"\"", "view event log (CSV), optional"},
      {"ingest.period_months", "int", "1", "calendar months per panel period"},
      {"ingest.shift_by_one", "bool", "false", "subtract 1 from completion times"},
      {"ingest.winsorize_cap", "int", "0", "cap completion times (0 = off)"},
      {"ingest.zscore", "bool", "false", "z-score non-binary covariates"},
      {"model.n_states", "int", "3", "number of latent states"},
      {"model.n_activities", "int", "2", "learning activity count"},
      {"model.n_covariates", "int", "6", "emission covariate count (incl. constant)"},
      {"model.initial_distribution", "real[]", "[]", "pi over states; empty = uniform"},
      {"sim.n_analysts", "int", "50", "simulated analysts"},
      {"sim.horizon", "int", "12", "simulated periods per analyst"},
      {"sim.queries_per_period_mean", "real", "0.782", "Poisson mean of queries per period"},
      {"sim.viewed_rate", "real", "0.306", "Poisson mean of views per period"},
      {"sim.psi", "real[]", "[]", "flattened common parameters; empty = zeros"},
      {"sim.sigma_theta", "real[]", "[1,0,1]", "random-effect covariance [1,1],[2,1],[2,2]"},
      {"mcmc.n_iterations", "int", "2000", "MCMC iterations per chain"},
      {"mcmc.burn_in", "int", "1500", "discarded iterations per chain"},
      {"mcmc.n_chains", "int", "2", "independent chains"},
      {"mcmc.thinning", "int", "1", "keep every k-th post-burn-in draw"},
      {"mcmc.target_acceptance", "real", "0.234", "Robbins-Monro target rate"},
      {"mcmc.adapt_decay", "real", "0.6", "Robbins-Monro step decay exponent"},
      {"mcmc.freeze_at", "int", "-1", "iteration to freeze adaptation (-1 = burn_in)"},
      {"mcmc.psi_blocked", "bool", "false", "update Psi in grouped blocks instead of jointly"},
      {"mcmc.store_random_effects", "bool", "false", "retain per-analyst Theta draws"},
      {"mcmc.n_workers", "int", "1", "threads for per-analyst updates and chains"},
      {"mcmc.prior_variance", "real", "30", "prior variance of each Psi entry"},
      {"baseline.covariates", "string[]", "[]", "design covariates; empty = all"},
      {"baseline.activities", "string[]", "[]", "design activities; empty = all"},
      {"output.dir", "string", "\".\"", "output directory"},
  };
  return keys;
}

inline void assign_config_value(RunConfig& c, const std::string& key, const nlohmann::json& v) {
  auto bad_type = [&](const char* want) -> ConfigError {
    return ConfigError("config key '" + key + "' expects " + want);
  };
  auto as_int = [&]() -> long {
    if (!v.is_number_integer()) throw bad_type("an integer");
    return v.get<long>();
  };
  auto as_real = [&]() -> double {
    if (!v.is_number()) throw bad_type("a number");
    return v.get<double>();
  };
  auto as_bool = [&]() -> bool {
    if (!v.is_boolean()) throw bad_type("a boolean");
    return v.get<bool>();
  };
  auto as_string = [&]() -> std::string {
    if (!v.is_string()) throw bad_type("a string");
    return v.get<std::string>();
  };
  auto as_real_vec = [&]() -> std::vector<double> {
    if (!v.is_array()) throw bad_type("an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw bad_type("an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  };
  auto as_string_vec = [&]() -> std::vector<std::string> {
    if (!v.is_array()) throw bad_type("an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw bad_type("an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  };

  if (key == "seed") c.seed = static_cast<std::uint64_t>(as_int());
  else if (key == "ingest.queries_csv") c.ingest_queries_csv = as_string();
  else if (key == "ingest.views_csv") c.ingest_views_csv = as_string();
  else if (key == "ingest.period_months") c.ingest_period_months = static_cast<int>(as_int());
  else if (key == "ingest.shift_by_one") c.ingest_shift_by_one = as_bool();
  else if (key == "ingest.winsorize_cap") c.ingest_winsorize_cap = as_int();
  else if (key == "ingest.zscore") c.ingest_zscore = as_bool();
  else if (key == "model.n_states") c.model_n_states = static_cast<int>(as_int());
  else if (key == "model.n_activities") c.model_n_activities = static_cast<int>(as_int());
  else if (key == "model.n_covariates") c.model_n_covariates = static_cast<int>(as_int());
  else if (key == "model.initial_distribution") c.model_initial_distribution = as_real_vec();
  else if (key == "sim.n_analysts") c.sim_n_analysts = static_cast<int>(as_int());
  else if (key == "sim.horizon") c.sim_horizon = static_cast<int>(as_int());
  else if (key == "sim.queries_per_period_mean") c.sim_queries_per_period_mean = as_real();
  else if (key == "sim.viewed_rate") c.sim_viewed_rate = as_real();
  else if (key == "sim.psi") c.sim_psi = as_real_vec();
  else if (key == "sim.sigma_theta") c.sim_sigma_theta = as_real_vec();
  else if (key == "mcmc.n_iterations") c.mcmc_n_iterations = as_int();
  else if (key == "mcmc.burn_in") c.mcmc_burn_in = as_int();
  else if (key == "mcmc.n_chains") c.mcmc_n_chains = static_cast<int>(as_int());
  else if (key == "mcmc.thinning") c.mcmc_thinning = as_int();
  else if (key == "mcmc.target_acceptance") c.mcmc_target_acceptance = as_real();
  else if (key == "mcmc.adapt_decay") c.mcmc_adapt_decay = as_real();
  else if (key == "mcmc.freeze_at") c.mcmc_freeze_at = as_int();
  else if (key == "mcmc.psi_blocked") c.mcmc_psi_blocked = as_bool();
  else if (key == "mcmc.store_random_effects") c.mcmc_store_random_effects = as_bool();
  else if (key == "mcmc.n_workers") c.mcmc_n_workers = static_cast<int>(as_int());
  else if (key == "mcmc.prior_variance") c.mcmc_prior_variance = as_real();
  else if (key == "baseline.covariates") c.baseline_covariates = as_string_vec();
  else if (key == "baseline.activities") c.baseline_activities = as_string_vec();
  else if (key == "output.dir") c.output_dir = as_string();
  else throw ConfigError("unknown config key '" + key + "'");
}

inline nlohmann::json parse_override_value(const std::string& text) {
  const auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return nlohmann::json(text);  // bare string
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  RunConfig c;
  for (const auto& [section, value] : j.items()) {
    if (section == "seed") {
      detail::assign_config_value(c, "seed", value);
      continue;
    }
    if (!value.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, v] : value.items()) {
      detail::assign_config_value(c, section + "." + key, v);
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  }
  RunConfig c = config_from_json(j);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + ov + "'");
    detail::assign_config_value(c, ov.substr(0, eq), detail::parse_override_value(ov.substr(eq + 1)));
  }
  return c;
}

/// Canonical dump (sorted keys, every field) hashed for output provenance.
inline nlohmann::json config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"ingest",
       {{"queries_csv", c.ingest_queries_csv},
        {"views_csv", c.ingest_views_csv},
        {"period_months", c.ingest_period_months},
        {"shift_by_one", c.ingest_shift_by_one},
        {"winsorize_cap", c.ingest_winsorize_cap},
        {"zscore", c.ingest_zscore}}},
      {"model",
       {{"n_states", c.model_n_states},
        {"n_activities", c.model_n_activities},
        {"n_covariates", c.model_n_covariates},
        {"initial_distribution", c.model_initial_distribution}}},
      {"sim",
       {{"n_analysts", c.sim_n_analysts},
        {"horizon", c.sim_horizon},
        {"queries_per_period_mean", c.sim_queries_per_period_mean},
        {"viewed_rate", c.sim_viewed_rate},
        {"psi", c.sim_psi},
        {"sigma_theta", c.sim_sigma_theta}}},
      {"mcmc",
       {{"n_iterations", c.mcmc_n_iterations},
        {"burn_in", c.mcmc_burn_in},
        {"n_chains", c.mcmc_n_chains},
        {"thinning", c.mcmc_thinning},
        {"target_acceptance", c.mcmc_target_acceptance},
        {"adapt_decay", c.mcmc_adapt_decay},
        {"freeze_at", c.mcmc_freeze_at},
        {"psi_blocked", c.mcmc_psi_blocked},
        {"store_random_effects", c.mcmc_store_random_effects},
        {"n_workers", c.mcmc_n_workers},
        {"prior_variance", c.mcmc_prior_variance}}},
      {"baseline", {{"covariates", c.baseline_covariates}, {"activities", c.baseline_activities}}},
      {"output", {{"dir", c.output_dir}}},
  };
}

inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string dump = config_to_json(c).dump();
  return fnv1a64(dump);
}

inline ModelSpec model_spec_from_config(const RunConfig& c) {
  ModelSpec spec = ModelSpec::make(c.model_n_states, c.model_n_activities, c.model_n_covariates);
  if (!c.model_initial_distribution.empty()) {
    spec.initial_distribution = Eigen::Map<const Eigen::VectorXd>(
        c.model_initial_distribution.data(),
        static_cast<Eigen::Index>(c.model_initial_distribution.size()));
  }
  spec.check();
  return spec;
}

inline SimConfig sim_config_from_config(const RunConfig& c) {
  SimConfig sim;
  sim.spec = model_spec_from_config(c);
  const ParamLayout layout(sim.spec, default_covariate_names(), default_activity_names());
  if (c.sim_psi.empty()) {
    sim.params = CommonParams::zeros(sim.spec);
  } else {
    if (static_cast<int>(c.sim_psi.size()) != layout.size()) {
      throw ConfigError("sim.psi must have " + std::to_string(layout.size()) + " entries");
    }
    sim.params = layout.unflatten(Eigen::Map<const Eigen::VectorXd>(
        c.sim_psi.data(), static_cast<Eigen::Index>(c.sim_psi.size())));
  }
  if (c.sim_sigma_theta.size() != 3) {
    throw ConfigError("sim.sigma_theta must be [var(zeta), cov, var(eta)]");
  }
  sim.sigma_theta << c.sim_sigma_theta[0], c.sim_sigma_theta[1], c.sim_sigma_theta[1],
      c.sim_sigma_theta[2];
  sim.n_analysts = c.sim_n_analysts;
  sim.horizon = c.sim_horizon;
  sim.queries_per_period_mean = c.sim_queries_per_period_mean;
  sim.activity_process.viewed_mean = c.sim_viewed_rate;
  sim.seed = c.seed;
  sim.check();
  return sim;
}

inline McmcConfig mcmc_config_from_config(const RunConfig& c) {
  McmcConfig m;
  m.n_iterations = c.mcmc_n_iterations;
  m.burn_in = c.mcmc_burn_in;
  m.n_chains = c.mcmc_n_chains;
  m.thinning = static_cast<int>(c.mcmc_thinning);
  m.target_acceptance = c.mcmc_target_acceptance;
  m.adapt_decay = c.mcmc_adapt_decay;
  m.freeze_at = c.mcmc_freeze_at;
  m.psi_blocked = c.mcmc_psi_blocked;
  m.store_random_effects = c.mcmc_store_random_effects;
  m.n_workers = c.mcmc_n_workers;
  m.seed = c.seed;
  m.check();
  return m;
}

inline PriorSpec prior_spec_from_config(const RunConfig& c) {
  PriorSpec prior;
  prior.psi_variance = c.mcmc_prior_variance;
  prior.check();
  return prior;
}

inline std::string config_help_text() {
  std::ostringstream out;
  out << "Config keys (JSON file sections; override with --set key=value):\n";
  for (const auto& k : detail::config_schema()) {
    out << "  " << k.name << " (" << k.type << ", default " << k.default_text << "): " << k.help
        << "\n";
  }
  return out.str();
}

}  // namespace panelhmm
