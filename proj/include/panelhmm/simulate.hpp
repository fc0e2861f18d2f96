#pragma once

#include <Eigen/Eigenvalues>
#include <map>
#include <string>
#include <vector>

#include "panelhmm/hmm.hpp"
#include "panelhmm/rng.hpp"

namespace panelhmm {

/// How per-period activity vectors are produced. "tied" keeps n_written equal
/// to the realized query count so simulated panels satisfy the same
/// bookkeeping invariants as ingested ones; "grid" draws uniformly from a
/// fixed finite set of activity vectors (used for empirical transition
/// checks, where a finite design is needed).
struct ActivityProcess {
  enum class Kind { tied, grid };
  Kind kind = Kind::tied;
  double viewed_mean = 0.306;                 // tied mode
  std::vector<Eigen::VectorXd> grid;          // grid mode
};

/// Per-query covariate sampler: constant, workload, tenure_months, migrated,
/// saved, query_size, roughly aligned with the raw-data moments.
struct CovariateProcess {
  double workload_excess_mean = 0.1;  // workload = 1 + Exp(mean)
  double tenure_base_max = 24.0;      // analyst base tenure ~ U(0, max), + t - 1
  double migrated_prob = 0.01;
  double saved_prob = 0.3;
  double query_size_excess_mean = 3.6;  // query_size = 1 + Poisson(mean)
};

struct SimConfig {
  ModelSpec spec;
  CommonParams params;
  Eigen::Matrix2d sigma_theta = Eigen::Matrix2d::Identity();
  int n_analysts = 1;
  int horizon = 1;
  double queries_per_period_mean = 0.782;
  ActivityProcess activity_process;
  CovariateProcess covariate_process;
  std::uint64_t seed = 0;

  void check() const {
    spec.check();
    params.check(spec);
    if (n_analysts < 1) throw ConfigError("sim: n_analysts must be >= 1");
    if (horizon < 1) throw ConfigError("sim: horizon must be >= 1");
    if (queries_per_period_mean < 0) throw ConfigError("sim: negative query mean");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma_theta);
    if ((sigma_theta - sigma_theta.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        es.eigenvalues().minCoeff() <= 0.0) {
      throw ConfigError("sim: sigma_theta must be symmetric positive definite");
    }
    if (activity_process.kind == ActivityProcess::Kind::grid && activity_process.grid.empty()) {
      throw ConfigError("sim: empty activity grid");
    }
  }
};

struct SimOutput {
  PanelData panel;
  std::vector<std::vector<int>> true_states;  // per analyst, 1-based states
  std::vector<RandomEffects> true_re;
};

namespace detail {

/// NB(delta, h) draw via the gamma-Poisson mixture: the mixed Poisson mean is
/// Gamma(delta, (1-h)/h), giving mean exp(linear predictor) overall.
inline long nb_draw(Rng& rng, double delta, double v) {
  const double log_delta = std::log(delta);
  const double m = log_add_exp(v, log_delta);
  const double h = std::exp(log_delta - m);
  const double scale = (1.0 - h) / h;
  if (scale <= 0.0) return 0;
  const double lambda = rng.gamma(delta, scale);
  return rng.poisson(lambda);
}

}  // namespace detail

/// Samples a synthetic panel from the exact generative model. One root seed;
/// per-analyst substreams make the output invariant to analyst ordering.
inline SimOutput simulate(const SimConfig& config) {
  config.check();
  const int S = config.spec.n_states;
  const int T = config.horizon;
  Rng root(config.seed);

  SimOutput out;
  out.panel.horizon = T;
  out.panel.covariate_names = default_covariate_names();
  out.panel.activity_names = default_activity_names();
  out.panel.metadata = {{"source", "simulate"}, {"seed", config.seed}};

  const int id_width = static_cast<int>(std::to_string(config.n_analysts).size());
  for (int i = 0; i < config.n_analysts; ++i) {
    Rng rng = root.substream(static_cast<std::uint64_t>(i) + 1);
    AnalystSeries series;
    std::string num = std::to_string(i + 1);
    series.analyst_id = "a" + std::string(id_width - num.size(), '0') + num;

    RandomEffects re;
    {
      Eigen::VectorXd theta = rng.mvn(Eigen::VectorXd::Zero(2), config.sigma_theta);
      re.zeta = theta[0];
      re.eta = theta[1];
    }
    const double tenure_base = rng.uniform() * config.covariate_process.tenure_base_max;

    std::vector<int> states;
    int state = rng.categorical(config.spec.initial_distribution) + 1;
    long query_serial = 0;
    for (int t = 1; t <= T; ++t) {
      states.push_back(state);
      PeriodObservation period;
      period.period_index = t;

      const long K = rng.poisson(config.queries_per_period_mean);
      for (long k = 0; k < K; ++k) {
        QueryObservation q;
        q.query_id = series.analyst_id + "-q" + std::to_string(++query_serial);
        Eigen::VectorXd z(6);
        z[0] = 1.0;
        z[1] = 1.0 - config.covariate_process.workload_excess_mean * std::log(rng.uniform());
        z[2] = tenure_base + (t - 1);
        z[3] = rng.bernoulli(config.covariate_process.migrated_prob) ? 1.0 : 0.0;
        z[4] = rng.bernoulli(config.covariate_process.saved_prob) ? 1.0 : 0.0;
        z[5] = 1.0 + static_cast<double>(rng.poisson(config.covariate_process.query_size_excess_mean));
        q.covariates = z;
        const double v = config.params.rho[state - 1].dot(z) + re.eta;
        q.completion_time = detail::nb_draw(rng, config.params.delta(state), v);
        period.queries.push_back(std::move(q));
      }

      if (config.activity_process.kind == ActivityProcess::Kind::tied) {
        Eigen::VectorXd act(2);
        act[0] = static_cast<double>(K);
        act[1] = static_cast<double>(rng.poisson(config.activity_process.viewed_mean));
        period.activities = act;
      } else {
        const int cell = rng.uniform_int(0, static_cast<int>(config.activity_process.grid.size()) - 1);
        period.activities = config.activity_process.grid[cell];
      }

      if (t < T && S > 1) {
        const TransitionMatrix q =
            build_transition_matrix(config.spec, config.params, re.zeta, period.activities);
        state = rng.categorical(q.row(state - 1).transpose()) + 1;
      }
      series.periods.push_back(std::move(period));
    }
    out.panel.analysts.push_back(std::move(series));
    out.true_states.push_back(std::move(states));
    out.true_re.push_back(re);
  }
  return out;
}

struct TransitionCheckReport {
  double max_abs_deviation = 0.0;
  double max_tolerance_3se = 0.0;  // 3 * binomial SE at the worst cell
  long total_transitions = 0;
  bool all_within_3se = true;  // every cell's deviation within its own 3*SE
};

/// Bins realized transitions by (state, activity cell) and compares observed
/// frequencies against the model rows. Requires a finite activity design and
/// near-zero random-effect variance to be meaningful.
inline TransitionCheckReport empirical_transition_check(const SimOutput& output,
                                                        const SimConfig& config) {
  const int S = config.spec.n_states;
  long n_periods = 0;
  for (const auto& st : output.true_states) n_periods += static_cast<long>(st.size());
  if (n_periods < 10000) throw DataError("empirical_transition_check: need >= 10^4 analyst-periods");

  // key: (state, serialized activity vector) -> counts of next state
  std::map<std::pair<int, std::string>, std::vector<long>> counts;
  std::map<std::pair<int, std::string>, Eigen::VectorXd> cells;
  for (std::size_t i = 0; i < output.true_states.size(); ++i) {
    const auto& states = output.true_states[i];
    const auto& periods = output.panel.analysts[i].periods;
    for (std::size_t t = 0; t + 1 < states.size(); ++t) {
      std::string key;
      for (Eigen::Index j = 0; j < periods[t].activities.size(); ++j) {
        key += std::to_string(periods[t].activities[j]) + ";";
      }
      auto id = std::make_pair(states[t], key);
      auto& c = counts[id];
      if (c.empty()) {
        c.assign(S, 0);
        cells[id] = periods[t].activities;
      }
      c[states[t + 1] - 1]++;
    }
  }

  TransitionCheckReport report;
  for (const auto& [id, c] : counts) {
    long n = 0;
    for (long x : c) n += x;
    report.total_transitions += n;
    const TransitionMatrix q =
        build_transition_matrix(config.spec, config.params, 0.0, cells.at(id));
    for (int s2 = 0; s2 < S; ++s2) {
      const double p = q(id.first - 1, s2);
      const double freq = static_cast<double>(c[s2]) / static_cast<double>(n);
      const double dev = std::abs(freq - p);
      const double tol = 3.0 * std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(n));
      if (dev > tol) report.all_within_3se = false;
      if (dev > report.max_abs_deviation) {
        report.max_abs_deviation = dev;
        report.max_tolerance_3se = tol;
      }
    }
  }
  return report;
}

}  // namespace panelhmm
