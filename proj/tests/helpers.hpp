#pragma once

#include <string>
#include <vector>

#include "panelhmm/model.hpp"
#include "panelhmm/panel.hpp"
#include "panelhmm/rng.hpp"

namespace panelhmm::testing {

/// Random but tame parameters: thresholds near 0, small coefficients, so
/// transition and emission probabilities stay well away from under/overflow.
inline CommonParams random_params(const ModelSpec& spec, Rng& rng, double coef_scale = 0.5) {
  CommonParams p = CommonParams::zeros(spec);
  for (auto& x : p.thresholds.raw) x = coef_scale * rng.normal();
  for (int s = 0; s < spec.n_states; ++s) {
    for (int j = 0; j < spec.n_activities; ++j) p.beta[s][j] = coef_scale * rng.normal();
    for (int j = 0; j < spec.n_covariates; ++j) p.rho[s][j] = coef_scale * rng.normal();
    p.log_delta[s] = 0.3 * rng.normal();
  }
  return p;
}

/// One analyst with random small-count data, usable with any state count.
inline AnalystSeries random_series(const ModelSpec& spec, Rng& rng, int horizon,
                                   double queries_per_period = 1.2) {
  AnalystSeries a;
  a.analyst_id = "t1";
  for (int t = 1; t <= horizon; ++t) {
    PeriodObservation p;
    p.period_index = t;
    p.activities = Eigen::VectorXd::Zero(spec.n_activities);
    for (int j = 0; j < spec.n_activities; ++j) {
      p.activities[j] = static_cast<double>(rng.poisson(0.8));
    }
    const long K = rng.poisson(queries_per_period);
    for (long k = 0; k < K; ++k) {
      QueryObservation q;
      q.query_id = "t1-q" + std::to_string(t) + "-" + std::to_string(k);
      q.covariates = Eigen::VectorXd::Zero(spec.n_covariates);
      q.covariates[0] = 1.0;
      for (int j = 1; j < spec.n_covariates; ++j) q.covariates[j] = rng.normal();
      q.completion_time = rng.poisson(3.0);
      p.queries.push_back(std::move(q));
    }
    a.periods.push_back(std::move(p));
  }
  return a;
}

inline PanelData single_analyst_panel(const ModelSpec& spec, AnalystSeries series) {
  PanelData panel;
  panel.horizon = static_cast<int>(series.periods.size());
  panel.covariate_names.resize(spec.n_covariates);
  panel.covariate_names[0] = "constant";
  for (int j = 1; j < spec.n_covariates; ++j) panel.covariate_names[j] = "x" + std::to_string(j);
  panel.activity_names.resize(spec.n_activities);
  for (int j = 0; j < spec.n_activities; ++j) panel.activity_names[j] = "act" + std::to_string(j);
  panel.analysts.push_back(std::move(series));
  return panel;
}

/// Zero-query panel: emissions never observed, transitions never informed.
inline PanelData empty_panel(const ModelSpec& spec, int n_analysts, int horizon) {
  PanelData panel;
  panel.horizon = horizon;
  panel.covariate_names = default_covariate_names();
  panel.activity_names = default_activity_names();
  for (int i = 0; i < n_analysts; ++i) {
    AnalystSeries a;
    a.analyst_id = "e" + std::to_string(i + 1);
    for (int t = 1; t <= horizon; ++t) {
      PeriodObservation p;
      p.period_index = t;
      p.activities = Eigen::VectorXd::Zero(spec.n_activities);
      a.periods.push_back(std::move(p));
    }
    panel.analysts.push_back(std::move(a));
  }
  return panel;
}

}  // namespace panelhmm::testing
