#pragma once

#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "panelhmm/panel.hpp"

namespace panelhmm {

struct IngestConfig {
  std::string queries_csv;
  std::string views_csv;
  int period_months = 1;       // calendar months per period
  bool shift_by_one = false;   // subtract 1 from completion times (raw floor 1)
  long winsorize_cap = 0;      // 0 = off; otherwise cap completion times
  bool zscore = false;         // z-score non-binary covariates, recorded in metadata
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

/// Accepts UTC epoch seconds or RFC-3339 (e.g. 2014-01-31T12:00:00Z).
inline long parse_timestamp(const std::string& s, const std::string& file, long line_no,
                            const std::string& column) {
  if (s.empty()) throw DataError(file + ":" + std::to_string(line_no) + ": empty " + column);
  if (s.find('-') == std::string::npos || s.find('-') == 0) {
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos == s.size()) return v;
    } catch (...) {
    }
  } else {
    std::tm tm = {};
    int y, mo, d, h = 0, mi = 0, sec = 0;
    const int matched = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (matched >= 3) {
      tm.tm_year = y - 1900;
      tm.tm_mon = mo - 1;
      tm.tm_mday = d;
      tm.tm_hour = h;
      tm.tm_min = mi;
      tm.tm_sec = sec;
      return static_cast<long>(timegm(&tm));
    }
  }
  throw DataError(file + ":" + std::to_string(line_no) + ": malformed " + column + " '" + s + "'");
}

inline double parse_number(const std::string& s, const std::string& file, long line_no,
                           const std::string& column) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size() && std::isfinite(v)) return v;
  } catch (...) {
  }
  throw DataError(file + ":" + std::to_string(line_no) + ": malformed " + column + " '" + s + "'");
}

struct RawQuery {
  std::string analyst_id, query_id;
  long created_ts = 0, first_exec_ts = 0;
  double workload = 1.0, query_size = 1.0, tenure_months = 0.0;
  double saved = 0.0, migrated = 0.0;
};

struct RawView {
  std::string analyst_id;
  long view_ts = 0;
};

inline std::map<std::string, int> read_header(std::ifstream& in, const std::string& file,
                                              const std::vector<std::string>& required) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(file + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cols = split_csv_line(line);
  std::map<std::string, int> idx;
  for (std::size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = static_cast<int>(i);
  for (const auto& r : required) {
    if (!idx.count(r)) throw DataError(file + ": missing required column '" + r + "'");
  }
  return idx;
}

/// Months elapsed since the anchor month, using UTC calendar months.
inline long month_index(long ts) {
  const std::time_t t = static_cast<std::time_t>(ts);
  std::tm tm;
  gmtime_r(&t, &tm);
  return static_cast<long>(tm.tm_year) * 12 + tm.tm_mon;
}

}  // namespace detail

/// Reads the two event logs, buckets events into calendar-month periods
/// anchored at the globally earliest event, and assembles the panel. Queries
/// are assigned to the period of their creation time. Analysts with no
/// authored queries are dropped. Deterministic for identical input.
inline PanelData ingest_events(const IngestConfig& config) {
  using namespace detail;

  std::vector<RawQuery> queries;
  {
    std::ifstream in(config.queries_csv);
    if (!in) throw DataError("cannot open " + config.queries_csv);
    const auto idx = read_header(in, config.queries_csv,
                                 {"analyst_id", "query_id", "created_ts", "first_exec_ts",
                                  "workload", "query_size", "saved", "migrated", "tenure_months"});
    std::string line;
    long line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      auto field = [&](const char* name) -> const std::string& {
        const int i = idx.at(name);
        if (i >= static_cast<int>(f.size())) {
          throw DataError(config.queries_csv + ":" + std::to_string(line_no) +
                          ": missing column '" + name + "'");
        }
        return f[i];
      };
      RawQuery q;
      q.analyst_id = field("analyst_id");
      q.query_id = field("query_id");
      q.created_ts = parse_timestamp(field("created_ts"), config.queries_csv, line_no, "created_ts");
      q.first_exec_ts =
          parse_timestamp(field("first_exec_ts"), config.queries_csv, line_no, "first_exec_ts");
      q.workload = parse_number(field("workload"), config.queries_csv, line_no, "workload");
      q.query_size = parse_number(field("query_size"), config.queries_csv, line_no, "query_size");
      q.saved = parse_number(field("saved"), config.queries_csv, line_no, "saved");
      q.migrated = parse_number(field("migrated"), config.queries_csv, line_no, "migrated");
      q.tenure_months =
          parse_number(field("tenure_months"), config.queries_csv, line_no, "tenure_months");
      if (q.analyst_id.empty()) {
        throw DataError(config.queries_csv + ":" + std::to_string(line_no) + ": empty analyst_id");
      }
      if (q.workload < 1.0 || q.query_size < 1.0 || q.tenure_months < 0.0 ||
          (q.saved != 0.0 && q.saved != 1.0) || (q.migrated != 0.0 && q.migrated != 1.0)) {
        throw DataError(config.queries_csv + ":" + std::to_string(line_no) +
                        ": covariate out of range");
      }
      queries.push_back(std::move(q));
    }
  }

  std::vector<RawView> views;
  if (!config.views_csv.empty()) {
    std::ifstream in(config.views_csv);
    if (!in) throw DataError("cannot open " + config.views_csv);
    const auto idx = read_header(in, config.views_csv, {"analyst_id", "viewed_query_id", "view_ts"});
    std::string line;
    long line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (static_cast<int>(f.size()) <= std::max(idx.at("analyst_id"), idx.at("view_ts"))) {
        throw DataError(config.views_csv + ":" + std::to_string(line_no) + ": short row");
      }
      RawView v;
      v.analyst_id = f[idx.at("analyst_id")];
      v.view_ts = parse_timestamp(f[idx.at("view_ts")], config.views_csv, line_no, "view_ts");
      views.push_back(std::move(v));
    }
  }

  if (queries.empty()) throw DataError("ingest: no query rows");

  // ordering errors: executions before creation, duplicate ids per analyst
  {
    std::string bad;
    for (const auto& q : queries) {
      if (q.first_exec_ts < q.created_ts) {
        if (!bad.empty()) bad += ", ";
        bad += q.query_id;
      }
    }
    if (!bad.empty()) throw DataError("ingest: first_exec_ts before created_ts for: " + bad);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& q : queries) {
      if (!seen.insert({q.analyst_id, q.query_id}).second) {
        throw DataError("ingest: duplicate query_id " + q.query_id + " for analyst " + q.analyst_id);
      }
    }
  }

  long anchor_month = std::numeric_limits<long>::max();
  for (const auto& q : queries) anchor_month = std::min(anchor_month, detail::month_index(q.created_ts));
  for (const auto& v : views) anchor_month = std::min(anchor_month, detail::month_index(v.view_ts));
  auto period_of = [&](long ts) {
    return static_cast<int>((detail::month_index(ts) - anchor_month) / config.period_months) + 1;
  };
  int horizon = 1;
  for (const auto& q : queries) horizon = std::max(horizon, period_of(q.created_ts));
  for (const auto& v : views) horizon = std::max(horizon, period_of(v.view_ts));

  // deterministic grouping: analysts sorted by id, queries by (created, id)
  std::map<std::string, std::vector<const RawQuery*>> by_analyst;
  for (const auto& q : queries) by_analyst[q.analyst_id].push_back(&q);
  std::map<std::string, std::vector<long>> views_by_analyst;
  for (const auto& v : views) views_by_analyst[v.analyst_id].push_back(v.view_ts);

  PanelData panel;
  panel.horizon = horizon;
  panel.covariate_names = default_covariate_names();
  panel.activity_names = default_activity_names();
  panel.metadata = {{"source", "ingest"},
                    {"period_months", config.period_months},
                    {"shift_by_one", config.shift_by_one},
                    {"winsorize_cap", config.winsorize_cap},
                    {"zscore", config.zscore}};

  for (auto& [analyst_id, qs] : by_analyst) {
    std::sort(qs.begin(), qs.end(), [](const RawQuery* a, const RawQuery* b) {
      return std::tie(a->created_ts, a->query_id) < std::tie(b->created_ts, b->query_id);
    });
    AnalystSeries series;
    series.analyst_id = analyst_id;
    series.periods.resize(horizon);
    for (int t = 0; t < horizon; ++t) {
      series.periods[t].period_index = t + 1;
      series.periods[t].activities = Eigen::VectorXd::Zero(2);
    }
    for (const RawQuery* rq : qs) {
      const int t = period_of(rq->created_ts);
      QueryObservation q;
      q.query_id = rq->query_id;
      long tau = rq->first_exec_ts - rq->created_ts;
      if (config.shift_by_one) tau = std::max(0L, tau - 1);
      if (config.winsorize_cap > 0) tau = std::min(tau, config.winsorize_cap);
      q.completion_time = tau;
      Eigen::VectorXd z(6);
      z << 1.0, rq->workload, rq->tenure_months, rq->migrated, rq->saved, rq->query_size;
      q.covariates = z;
      series.periods[t - 1].queries.push_back(std::move(q));
      series.periods[t - 1].activities[0] += 1.0;
    }
    if (views_by_analyst.count(analyst_id)) {
      for (long ts : views_by_analyst.at(analyst_id)) {
        series.periods[period_of(ts) - 1].activities[1] += 1.0;
      }
    }
    panel.analysts.push_back(std::move(series));
  }

  if (config.zscore) {
    // scale workload, tenure_months, query_size in place; record moments
    const std::vector<int> cols = {1, 2, 5};
    nlohmann::json scaling = nlohmann::json::object();
    for (int c : cols) {
      double sum = 0.0, sum2 = 0.0;
      long n = 0;
      for (const auto& a : panel.analysts)
        for (const auto& p : a.periods)
          for (const auto& q : p.queries) {
            sum += q.covariates[c];
            sum2 += q.covariates[c] * q.covariates[c];
            ++n;
          }
      const double mean = sum / static_cast<double>(n);
      const double sd = std::sqrt(std::max(sum2 / static_cast<double>(n) - mean * mean, 1e-12));
      for (auto& a : panel.analysts)
        for (auto& p : a.periods)
          for (auto& q : p.queries) q.covariates[c] = (q.covariates[c] - mean) / sd;
      scaling[panel.covariate_names[c]] = {{"mean", mean}, {"sd", sd}};
    }
    panel.metadata["zscore_moments"] = scaling;
  }

  return panel;
}

}  // namespace panelhmm
