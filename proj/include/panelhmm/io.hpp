#pragma once

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panelhmm/decode.hpp"
#include "panelhmm/mcmc.hpp"
#include "panelhmm/simulate.hpp"
#include "panelhmm/summary.hpp"

namespace panelhmm {

inline constexpr const char* kTraceFormat = "trace/1";

namespace detail {

/// Shortest round-trippable decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[64];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

/// Inverse of csv_escape: split one line on commas, honoring quoted fields
/// with doubled-quote escapes (parameter names contain commas).
inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

/// Columnar trace file: '#'-prefixed metadata lines, then a CSV header and
/// one row per retained draw. Byte-identical for identical runs.
inline void write_trace(const ChainTrace& trace, const std::string& path,
                        std::uint64_t config_hash, int chain_index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016" PRIx64, config_hash);
  out << "# format: " << kTraceFormat << "\n";
  out << "# config_hash: " << hash_buf << "\n";
  out << "# chain: " << chain_index << "\n";
  out << "# chain_seed: " << trace.chain_seed << "\n";
  out << "# n_iterations: " << trace.n_iterations << "\n";
  out << "# burn_in: " << trace.burn_in << "\n";
  out << "# thinning: " << trace.thinning << "\n";
  out << "# n_states: " << trace.spec.n_states << "\n";
  out << "iteration";
  for (const auto& name : trace.names) out << "," << detail::csv_escape(name);
  out << ",log_posterior\n";
  const long first = trace.burn_in + trace.thinning;
  for (Eigen::Index d = 0; d < trace.draws.rows(); ++d) {
    out << (first + static_cast<long>(d) * trace.thinning);
    for (Eigen::Index j = 0; j < trace.draws.cols(); ++j) {
      out << "," << detail::format_double(trace.draws(d, j));
    }
    out << "," << detail::format_double(trace.log_post[d]) << "\n";
  }
}

struct TraceFile {
  std::string format;
  std::string config_hash;
  int chain = 0;
  std::uint64_t chain_seed = 0;
  long n_iterations = 0, burn_in = 0, thinning = 1;
  int n_states = 0;
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> draws;
  std::vector<double> log_post;
};

inline TraceFile read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  TraceFile tf;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = line.substr(1, colon - 1);
      std::string value = line.substr(colon + 1);
      auto trim = [](std::string& s) {
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
      };
      trim(key);
      trim(value);
      if (key == "format") tf.format = value;
      else if (key == "config_hash") tf.config_hash = value;
      else if (key == "chain") tf.chain = std::stoi(value);
      else if (key == "chain_seed") tf.chain_seed = std::stoull(value);
      else if (key == "n_iterations") tf.n_iterations = std::stol(value);
      else if (key == "burn_in") tf.burn_in = std::stol(value);
      else if (key == "thinning") tf.thinning = std::stol(value);
      else if (key == "n_states") tf.n_states = std::stoi(value);
      continue;
    }
    const std::vector<std::string> fields = detail::csv_split(line);
    if (!header_seen) {
      if (fields.size() < 3 || fields.front() != "iteration" || fields.back() != "log_posterior") {
        throw DataError(path + ":" + std::to_string(line_no) + ": bad trace header");
      }
      tf.names.assign(fields.begin() + 1, fields.end() - 1);
      header_seen = true;
      continue;
    }
    if (fields.size() != tf.names.size() + 2) {
      throw DataError(path + ":" + std::to_string(line_no) + ": wrong field count");
    }
    // strtod, not stod: stod raises out_of_range on subnormal magnitudes
    auto parse = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') {
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed numeric field");
      }
      return v;
    };
    Eigen::VectorXd row(static_cast<int>(tf.names.size()));
    for (std::size_t j = 0; j < tf.names.size(); ++j) row[static_cast<int>(j)] = parse(fields[j + 1]);
    tf.log_post.push_back(parse(fields.back()));
    tf.draws.push_back(std::move(row));
  }
  if (tf.format != kTraceFormat) throw DataError(path + ": unsupported trace format '" + tf.format + "'");
  if (!header_seen) throw DataError(path + ": no trace header");
  return tf;
}

inline nlohmann::json summary_to_json(const PosteriorSummary& summary, std::uint64_t config_hash,
                                      std::uint64_t seed) {
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016" PRIx64, config_hash);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : summary.parameters) {
    nlohmann::json row = {{"name", p.name},
                          {"mean", p.mean},
                          {"std", p.stddev},
                          {"significant", p.significant}};
    if (p.hpd) {
      row["hpd_lo"] = p.hpd->lo;
      row["hpd_hi"] = p.hpd->hi;
    }
    if (p.rhat) row["rhat"] = *p.rhat;
    params.push_back(std::move(row));
  }
  nlohmann::json j = {{"format", "summary/1"},
                      {"config_hash", hash_buf},
                      {"seed", seed},
                      {"n_chains", summary.n_chains},
                      {"parameters", std::move(params)},
                      {"acceptance_rates", summary.acceptance_rates},
                      {"neg2ll_at", "posterior mean of (Psi, Theta)"}};
  if (summary.fit) {
    j["fit"] = {{"neg2_loglik", summary.fit->neg2_loglik},
                {"aic", summary.fit->aic},
                {"bic", summary.fit->bic},
                {"k", summary.fit->k},
                {"n", summary.fit->n}};
  }
  return j;
}

/// Posterior state CSV: analyst_id,t,state,probability rows for the smoothed
/// marginals, in analyst order.
inline void write_posteriors_csv(const std::vector<std::string>& analyst_ids,
                                 const std::vector<StatePosterior>& posteriors,
                                 const std::string& path, std::uint64_t config_hash) {
  if (analyst_ids.size() != posteriors.size()) {
    throw ConfigError("posterior export: id/result count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016" PRIx64, config_hash);
  out << "# format: posterior/1\n# config_hash: " << hash_buf << "\n";
  out << "analyst_id,t,state,probability\n";
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const auto& sp = posteriors[i];
    for (int t = 0; t < sp.smoothed.rows(); ++t) {
      for (int s = 0; s < sp.smoothed.cols(); ++s) {
        out << detail::csv_escape(analyst_ids[i]) << "," << (t + 1) << "," << (s + 1) << ","
            << detail::format_double(sp.smoothed(t, s)) << "\n";
      }
    }
  }
}

/// Ground-truth sidecar for simulated panels: true states, random effects,
/// and the generating (Psi, Sigma_Theta), for recovery scoring.
inline nlohmann::json truth_to_json(const SimOutput& sim, const SimConfig& config) {
  nlohmann::json analysts = nlohmann::json::array();
  for (std::size_t i = 0; i < sim.panel.analysts.size(); ++i) {
    analysts.push_back({{"analyst_id", sim.panel.analysts[i].analyst_id},
                        {"states", sim.true_states[i]},
                        {"zeta", sim.true_re[i].zeta},
                        {"eta", sim.true_re[i].eta}});
  }
  const ParamLayout layout(config.spec, sim.panel.covariate_names, sim.panel.activity_names);
  const Eigen::VectorXd psi = layout.flatten(config.params);
  return {{"format", "truth/1"},
          {"psi_names", layout.names()},
          {"psi", std::vector<double>(psi.begin(), psi.end())},
          {"sigma_theta",
           {config.sigma_theta(0, 0), config.sigma_theta(1, 0), config.sigma_theta(1, 1)}},
          {"analysts", std::move(analysts)}};
}

}  // namespace panelhmm
