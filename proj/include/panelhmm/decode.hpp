#pragma once

#include <Eigen/Core>
#include <vector>

#include "panelhmm/hmm.hpp"

namespace panelhmm {

struct StatePosterior {
  Eigen::MatrixXd smoothed;  // T x N_s, rows sum to 1
  Eigen::MatrixXd filtered;  // T x N_s, rows sum to 1
  std::vector<int> viterbi_path;  // 1-based states, adjacency-respecting
};

/// Log-space forward-backward and max-product decoding over the same
/// transition and emission components as the likelihood.
inline StatePosterior smooth_states(const ModelSpec& spec, const CommonParams& params,
                                    const RandomEffects& re,
                                    const std::vector<PeriodObservation>& periods) {
  const int S = spec.n_states;
  const int T = static_cast<int>(periods.size());
  if (T == 0) throw DataError("smooth_states: empty period sequence");

  Eigen::MatrixXd lp(T, S);
  for (int t = 0; t < T; ++t) {
    for (int s = 1; s <= S; ++s) lp(t, s - 1) = period_log_prob(spec, params, s, re.eta, periods[t]);
  }
  std::vector<Eigen::MatrixXd> lq(T > 1 ? T - 1 : 0);  // log transition matrices
  for (int t = 0; t + 1 < T; ++t) {
    const TransitionMatrix q = build_transition_matrix(spec, params, re.zeta, periods[t].activities);
    lq[t].resize(S, S);
    for (int a = 0; a < S; ++a) {
      for (int b = 0; b < S; ++b) lq[t](a, b) = q(a, b) > 0.0 ? std::log(q(a, b)) : kNegInf;
    }
  }

  Eigen::MatrixXd la(T, S), lb(T, S);
  for (int s = 0; s < S; ++s) {
    la(0, s) = std::log(spec.initial_distribution[s]) + lp(0, s);
  }
  std::vector<double> terms(S);
  for (int t = 1; t < T; ++t) {
    for (int s2 = 0; s2 < S; ++s2) {
      for (int s = 0; s < S; ++s) terms[s] = la(t - 1, s) + lq[t - 1](s, s2);
      la(t, s2) = log_sum_exp(terms) + lp(t, s2);
    }
  }
  lb.row(T - 1).setZero();
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      for (int s2 = 0; s2 < S; ++s2) terms[s2] = lq[t](s, s2) + lp(t + 1, s2) + lb(t + 1, s2);
      lb(t, s) = log_sum_exp(terms);
    }
  }

  StatePosterior out;
  out.filtered.resize(T, S);
  out.smoothed.resize(T, S);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) terms[s] = la(t, s);
    const double fnorm = log_sum_exp(terms);
    for (int s = 0; s < S; ++s) out.filtered(t, s) = std::exp(la(t, s) - fnorm);
    for (int s = 0; s < S; ++s) terms[s] = la(t, s) + lb(t, s);
    const double snorm = log_sum_exp(terms);
    for (int s = 0; s < S; ++s) out.smoothed(t, s) = std::exp(la(t, s) + lb(t, s) - snorm);
  }

  // Viterbi max-product with backpointers
  Eigen::MatrixXd lv(T, S);
  Eigen::MatrixXi back(T, S);
  for (int s = 0; s < S; ++s) lv(0, s) = std::log(spec.initial_distribution[s]) + lp(0, s);
  for (int t = 1; t < T; ++t) {
    for (int s2 = 0; s2 < S; ++s2) {
      double best = kNegInf;
      int arg = 0;
      for (int s = 0; s < S; ++s) {
        const double cand = lv(t - 1, s) + lq[t - 1](s, s2);
        if (cand > best) {
          best = cand;
          arg = s;
        }
      }
      lv(t, s2) = best + lp(t, s2);
      back(t, s2) = arg;
    }
  }
  out.viterbi_path.assign(T, 1);
  int best_s = 0;
  for (int s = 1; s < S; ++s) {
    if (lv(T - 1, s) > lv(T - 1, best_s)) best_s = s;
  }
  out.viterbi_path[T - 1] = best_s + 1;
  for (int t = T - 1; t > 0; --t) {
    best_s = back(t, best_s);
    out.viterbi_path[t - 1] = best_s + 1;
  }
  return out;
}

/// Log joint probability of a fixed state path, for comparing against the
/// Viterbi path.
inline double path_log_prob(const ModelSpec& spec, const CommonParams& params,
                            const RandomEffects& re,
                            const std::vector<PeriodObservation>& periods,
                            const std::vector<int>& path) {
  const int T = static_cast<int>(periods.size());
  double lp = std::log(spec.initial_distribution[path[0] - 1]) +
              period_log_prob(spec, params, path[0], re.eta, periods[0]);
  for (int t = 1; t < T; ++t) {
    const TransitionMatrix q =
        build_transition_matrix(spec, params, re.zeta, periods[t - 1].activities);
    const double qv = q(path[t - 1] - 1, path[t] - 1);
    lp += (qv > 0.0 ? std::log(qv) : kNegInf) +
          period_log_prob(spec, params, path[t], re.eta, periods[t]);
  }
  return lp;
}

}  // namespace panelhmm
