#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "panelhmm/model.hpp"
#include "panelhmm/panel.hpp"

namespace panelhmm {

using TransitionMatrix = Eigen::MatrixXd;

/// Tridiagonal ordered-logit transition matrix for one analyst-period.
/// Deterministic learning stock LS_s = beta_s . activities + zeta; the
/// extreme-value shock is integrated out into the logistic form.
inline TransitionMatrix build_transition_matrix(const ModelSpec& spec, const CommonParams& params,
                                                double zeta, const Eigen::VectorXd& activities) {
  const int S = spec.n_states;
  TransitionMatrix q = TransitionMatrix::Zero(S, S);
  if (S == 1) {
    q(0, 0) = 1.0;
    return q;
  }
  if (activities.size() != spec.n_activities) {
    throw DataError("build_transition_matrix: activity vector length mismatch");
  }
  for (int s = 1; s <= S; ++s) {
    const double ls = params.beta[s - 1].dot(activities) + zeta;
    if (!std::isfinite(ls)) {
      throw NumericalError("build_transition_matrix: non-finite learning stock at state " +
                           std::to_string(s));
    }
    if (s == 1) {
      const double stay = logistic(params.thresholds.mu_up(1, S) - ls);
      q(0, 0) = stay;
      q(0, 1) = 1.0 - stay;
    } else if (s == S) {
      const double down = logistic(params.thresholds.mu_down(S, S) - ls);
      q(S - 1, S - 2) = down;
      q(S - 1, S - 1) = 1.0 - down;
    } else {
      const double up_cdf = logistic(params.thresholds.mu_up(s, S) - ls);
      const double down = logistic(params.thresholds.mu_down(s, S) - ls);
      q(s - 1, s - 2) = down;
      q(s - 1, s - 1) = up_cdf - down;
      q(s - 1, s) = 1.0 - up_cdf;
    }
  }
  return q;
}

namespace detail {

/// log NB pmf with the terms that depend only on (state, query) precomputable.
/// v is the linear predictor rho_s.Z + eta; h = delta/(e^v + delta).
inline double nb_log_pmf_core(double delta, double log_delta, double lgamma_delta, double v,
                              double tau, double lgamma_tau_p1) {
  const double m = log_add_exp(v, log_delta);  // log(e^v + delta)
  return std::lgamma(delta + tau) - lgamma_tau_p1 - lgamma_delta + delta * (log_delta - m) +
         tau * (v - m);
}

}  // namespace detail

/// log P(completion_time = tau | state), Appendix-style negative binomial with
/// state-specific dispersion.
inline double emission_log_pmf(const ModelSpec& spec, const CommonParams& params, int state,
                               double eta, const QueryObservation& query) {
  if (state < 1 || state > spec.n_states) throw DataError("emission_log_pmf: state out of range");
  if (query.completion_time < 0) throw DataError("emission_log_pmf: negative completion time");
  if (query.covariates.size() != spec.n_covariates) {
    throw DataError("emission_log_pmf: covariate length mismatch");
  }
  const double v = params.rho[state - 1].dot(query.covariates) + eta;
  if (!std::isfinite(v)) throw NumericalError("emission_log_pmf: non-finite linear predictor");
  const double log_delta = params.log_delta[state - 1];
  const double delta = std::exp(log_delta);
  const double tau = static_cast<double>(query.completion_time);
  return detail::nb_log_pmf_core(delta, log_delta, std::lgamma(delta), v, tau,
                                 std::lgamma(tau + 1.0));
}

/// log P(O_t | S_t = state): product over the period's queries. Empty period
/// contributes the empty product, log 1 = 0.
inline double period_log_prob(const ModelSpec& spec, const CommonParams& params, int state,
                              double eta, const PeriodObservation& period) {
  double acc = 0.0;
  for (const auto& q : period.queries) acc += emission_log_pmf(spec, params, state, eta, q);
  return acc;
}

// ---- flattened panel for repeated likelihood evaluation --------------------

/// Per-query constants that never change across parameter draws.
struct FlatPeriod {
  Eigen::VectorXd activities;
  Eigen::VectorXd tau;            // completion times
  Eigen::VectorXd lgamma_tau_p1;  // lgamma(tau + 1)
  Eigen::MatrixXd z;              // K x n_covariates
};

struct FlatAnalyst {
  std::string analyst_id;
  std::vector<FlatPeriod> periods;
};

inline FlatAnalyst flatten_analyst(const AnalystSeries& a, int n_covariates) {
  FlatAnalyst out;
  out.analyst_id = a.analyst_id;
  for (const auto& p : a.periods) {
    FlatPeriod fp;
    fp.activities = p.activities;
    const int K = static_cast<int>(p.queries.size());
    fp.tau.resize(K);
    fp.lgamma_tau_p1.resize(K);
    fp.z.resize(K, n_covariates);
    for (int k = 0; k < K; ++k) {
      const auto& q = p.queries[k];
      if (q.completion_time < 0) throw DataError("flatten_analyst: negative completion time");
      if (q.covariates.size() != n_covariates) {
        throw DataError("flatten_analyst: covariate length mismatch");
      }
      fp.tau[k] = static_cast<double>(q.completion_time);
      fp.lgamma_tau_p1[k] = std::lgamma(fp.tau[k] + 1.0);
      fp.z.row(k) = q.covariates.transpose();
    }
    out.periods.push_back(std::move(fp));
  }
  return out;
}

inline std::vector<FlatAnalyst> flatten_panel(const PanelData& panel) {
  std::vector<FlatAnalyst> out;
  out.reserve(panel.analysts.size());
  for (const auto& a : panel.analysts) {
    out.push_back(flatten_analyst(a, static_cast<int>(panel.covariate_names.size())));
  }
  return out;
}

namespace detail {

struct StateEmissionCache {
  double delta, log_delta, lgamma_delta;
};

inline std::vector<StateEmissionCache> make_state_caches(const ModelSpec& spec,
                                                         const CommonParams& params) {
  std::vector<StateEmissionCache> caches(spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) {
    const double ld = params.log_delta[s];
    const double d = std::exp(ld);
    caches[s] = {d, ld, std::lgamma(d)};
  }
  return caches;
}

/// Fills lp[s] = log P(O_t | S_t = s+1) for one flattened period.
inline void period_log_probs(const ModelSpec& spec, const CommonParams& params,
                             const std::vector<StateEmissionCache>& caches, double eta,
                             const FlatPeriod& period, Eigen::VectorXd& lp) {
  lp.setZero(spec.n_states);
  const int K = static_cast<int>(period.tau.size());
  if (K == 0) return;
  for (int s = 0; s < spec.n_states; ++s) {
    const auto& c = caches[s];
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      const double v = params.rho[s].dot(period.z.row(k)) + eta;
      acc += nb_log_pmf_core(c.delta, c.log_delta, c.lgamma_delta, v, period.tau[k],
                             period.lgamma_tau_p1[k]);
    }
    lp[s] = acc;
  }
}

}  // namespace detail

/// Scaled forward recursion over one analyst's sequence, in a form that never
/// underflows: per-period emission vectors are max-shifted and the running
/// alpha is renormalized, accumulating log scale factors.
inline double sequence_log_likelihood(const ModelSpec& spec, const CommonParams& params,
                                      const RandomEffects& re, const FlatAnalyst& analyst) {
  const int S = spec.n_states;
  const int T = static_cast<int>(analyst.periods.size());
  if (T == 0) throw DataError("sequence_log_likelihood: empty period sequence");
  const auto caches = detail::make_state_caches(spec, params);
  Eigen::VectorXd lp(S), alpha(S), work(S);
  double log_lik = 0.0;
  for (int t = 0; t < T; ++t) {
    detail::period_log_probs(spec, params, caches, re.eta, analyst.periods[t], lp);
    if (t == 0) {
      work = spec.initial_distribution;
    } else {
      const TransitionMatrix q =
          build_transition_matrix(spec, params, re.zeta, analyst.periods[t - 1].activities);
      work = q.transpose() * alpha;
    }
    const double m = lp.maxCoeff();
    for (int s = 0; s < S; ++s) work[s] *= std::exp(lp[s] - m);
    const double scale = work.sum();
    if (!(scale > 0.0) || !std::isfinite(m)) {
      throw NumericalError("sequence_log_likelihood: non-finite forward weight at t=" +
                           std::to_string(t + 1));
    }
    log_lik += m + std::log(scale);
    alpha = work / scale;
  }
  return log_lik;
}

inline double sequence_log_likelihood(const ModelSpec& spec, const CommonParams& params,
                                      const RandomEffects& re,
                                      const std::vector<PeriodObservation>& periods) {
  AnalystSeries tmp;
  tmp.periods = periods;
  return sequence_log_likelihood(spec, params, re, flatten_analyst(tmp, spec.n_covariates));
}

/// Verification oracle: exact path sum over all N_s^T state paths, summed in
/// log space. Not for hot paths.
inline double brute_force_log_likelihood(const ModelSpec& spec, const CommonParams& params,
                                         const RandomEffects& re,
                                         const std::vector<PeriodObservation>& periods) {
  const int S = spec.n_states;
  const int T = static_cast<int>(periods.size());
  if (T == 0) throw DataError("brute_force_log_likelihood: empty period sequence");
  double n_paths = std::pow(static_cast<double>(S), static_cast<double>(T));
  if (n_paths > 1e6) throw DataError("brute_force_log_likelihood: state space too large");

  std::vector<Eigen::MatrixXd> lp(T);  // lp[t](s) via period_log_prob
  for (int t = 0; t < T; ++t) {
    lp[t].resize(S, 1);
    for (int s = 1; s <= S; ++s) {
      lp[t](s - 1, 0) = period_log_prob(spec, params, s, re.eta, periods[t]);
    }
  }
  std::vector<TransitionMatrix> q(T > 1 ? T - 1 : 0);
  for (int t = 0; t + 1 < T; ++t) {
    q[t] = build_transition_matrix(spec, params, re.zeta, periods[t].activities);
  }

  std::vector<int> path(T, 0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n_paths));
  while (true) {
    double lt = std::log(spec.initial_distribution[path[0]]) + lp[0](path[0], 0);
    for (int t = 1; t < T; ++t) {
      const double qv = q[t - 1](path[t - 1], path[t]);
      lt += (qv > 0.0 ? std::log(qv) : kNegInf) + lp[t](path[t], 0);
    }
    terms.push_back(lt);
    int t = T - 1;
    while (t >= 0 && path[t] == S - 1) path[t--] = 0;
    if (t < 0) break;
    ++path[t];
  }
  return log_sum_exp(terms);
}

/// Sum of per-analyst sequence likelihoods, accumulated in ascending
/// analyst_id order for reproducibility.
inline double full_log_likelihood(const ModelSpec& spec, const CommonParams& params,
                                  const std::vector<RandomEffects>& all_re,
                                  const PanelData& panel) {
  if (all_re.size() != panel.analysts.size()) {
    throw DataError("full_log_likelihood: random effect count != analyst count");
  }
  std::vector<std::size_t> order(panel.analysts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return panel.analysts[a].analyst_id < panel.analysts[b].analyst_id;
  });
  double acc = 0.0;
  for (std::size_t i : order) {
    acc += sequence_log_likelihood(spec, params, all_re[i], panel.analysts[i].periods);
  }
  return acc;
}

}  // namespace panelhmm
