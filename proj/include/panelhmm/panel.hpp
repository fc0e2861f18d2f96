#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "panelhmm/common.hpp"

namespace panelhmm {

/// One authored query: outcome (seconds to first execution) plus its
/// productivity covariates in fixed order. covariates[0] is always 1.0.
struct QueryObservation {
  std::string query_id;
  long completion_time = 0;
  Eigen::VectorXd covariates;
};

/// One panel period for one analyst. Empty periods are explicit: transitions
/// still fire even when no queries were written.
struct PeriodObservation {
  int period_index = 0;  // 1-based, within [1, T]
  std::vector<QueryObservation> queries;
  Eigen::VectorXd activities;  // (n_written, n_viewed)
};

struct AnalystSeries {
  std::string analyst_id;
  std::vector<PeriodObservation> periods;  // exactly T entries, in order
};

struct PanelData {
  std::vector<AnalystSeries> analysts;
  int horizon = 0;
  std::vector<std::string> covariate_names;
  std::vector<std::string> activity_names;
  nlohmann::json metadata;  // ingest config echo, scaling flags, etc.

  std::size_t total_queries() const {
    std::size_t n = 0;
    for (const auto& a : analysts)
      for (const auto& p : a.periods) n += p.queries.size();
    return n;
  }
};

inline std::vector<std::string> default_covariate_names() {
  return {"constant", "workload", "tenure_months", "migrated", "saved", "query_size"};
}
inline std::vector<std::string> default_activity_names() {
  return {"n_written", "n_viewed"};
}

/// Diagnostics, not failures: one entry per invariant violation.
inline std::vector<std::string> validate_panel(const PanelData& panel) {
  std::vector<std::string> out;
  if (panel.horizon < 1) out.push_back("panel: horizon must be >= 1");
  if (panel.analysts.empty()) out.push_back("panel: no analysts");
  std::size_t n_queries = 0;
  for (const auto& a : panel.analysts) {
    if (static_cast<int>(a.periods.size()) != panel.horizon) {
      out.push_back("analyst " + a.analyst_id + ": missing period (has " +
                    std::to_string(a.periods.size()) + " of " +
                    std::to_string(panel.horizon) + ")");
    }
    long total_written = 0;
    for (std::size_t t = 0; t < a.periods.size(); ++t) {
      const auto& p = a.periods[t];
      if (p.period_index != static_cast<int>(t) + 1) {
        out.push_back("analyst " + a.analyst_id + ": period index " +
                      std::to_string(p.period_index) + " out of order at slot " +
                      std::to_string(t + 1));
      }
      if (p.activities.size() != static_cast<Eigen::Index>(panel.activity_names.size())) {
        out.push_back("analyst " + a.analyst_id + " period " + std::to_string(t + 1) +
                      ": activity vector length mismatch");
      }
      for (Eigen::Index j = 0; j < p.activities.size(); ++j) {
        if (p.activities[j] < 0.0) {
          out.push_back("analyst " + a.analyst_id + " period " + std::to_string(t + 1) +
                        ": negative activity count");
        }
      }
      if (p.activities.size() > 0) total_written += static_cast<long>(p.activities[0]);
      for (const auto& q : p.queries) {
        ++n_queries;
        if (q.completion_time < 0) {
          out.push_back("analyst " + a.analyst_id + " query " + q.query_id +
                        ": negative completion time");
        }
        if (q.covariates.size() != static_cast<Eigen::Index>(panel.covariate_names.size())) {
          out.push_back("analyst " + a.analyst_id + " query " + q.query_id +
                        ": covariate length mismatch");
        } else if (q.covariates.size() > 0 && q.covariates[0] != 1.0) {
          out.push_back("analyst " + a.analyst_id + " query " + q.query_id +
                        ": first covariate is not the constant 1.0");
        }
      }
    }
    (void)total_written;
  }
  if (!panel.analysts.empty() && n_queries == 0) {
    out.push_back("panel: no queries anywhere");
  }
  return out;
}

// ---- panel/1 serialization -------------------------------------------------

inline nlohmann::json panel_to_json(const PanelData& panel) {
  nlohmann::json j;
  j["version"] = "panel/1";
  j["horizon"] = panel.horizon;
  j["covariate_names"] = panel.covariate_names;
  j["activity_names"] = panel.activity_names;
  j["metadata"] = panel.metadata.is_null() ? nlohmann::json::object() : panel.metadata;
  nlohmann::json analysts = nlohmann::json::array();
  for (const auto& a : panel.analysts) {
    nlohmann::json ja;
    ja["id"] = a.analyst_id;
    nlohmann::json periods = nlohmann::json::array();
    for (const auto& p : a.periods) {
      nlohmann::json jp;
      jp["t"] = p.period_index;
      jp["activities"] = std::vector<double>(p.activities.begin(), p.activities.end());
      nlohmann::json queries = nlohmann::json::array();
      for (const auto& q : p.queries) {
        queries.push_back({{"id", q.query_id},
                           {"tau", q.completion_time},
                           {"z", std::vector<double>(q.covariates.begin(), q.covariates.end())}});
      }
      jp["queries"] = std::move(queries);
      periods.push_back(std::move(jp));
    }
    ja["periods"] = std::move(periods);
    analysts.push_back(std::move(ja));
  }
  j["analysts"] = std::move(analysts);
  return j;
}

inline PanelData panel_from_json(const nlohmann::json& j) {
  if (!j.contains("version") || j.at("version") != "panel/1") {
    throw DataError("panel file: missing or unsupported version (want panel/1)");
  }
  PanelData panel;
  panel.horizon = j.at("horizon").get<int>();
  panel.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
  panel.activity_names = j.at("activity_names").get<std::vector<std::string>>();
  if (j.contains("metadata")) panel.metadata = j.at("metadata");
  for (const auto& ja : j.at("analysts")) {
    AnalystSeries a;
    a.analyst_id = ja.at("id").get<std::string>();
    for (const auto& jp : ja.at("periods")) {
      PeriodObservation p;
      p.period_index = jp.at("t").get<int>();
      auto act = jp.at("activities").get<std::vector<double>>();
      p.activities = Eigen::Map<Eigen::VectorXd>(act.data(), static_cast<Eigen::Index>(act.size()));
      for (const auto& jq : jp.at("queries")) {
        QueryObservation q;
        q.query_id = jq.at("id").get<std::string>();
        q.completion_time = jq.at("tau").get<long>();
        auto z = jq.at("z").get<std::vector<double>>();
        q.covariates = Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
        p.queries.push_back(std::move(q));
      }
      a.periods.push_back(std::move(p));
    }
    panel.analysts.push_back(std::move(a));
  }
  return panel;
}

}  // namespace panelhmm
