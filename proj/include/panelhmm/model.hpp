#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "panelhmm/common.hpp"

namespace panelhmm {

struct ModelSpec {
  int n_states = 1;
  int n_activities = 2;
  int n_covariates = 6;
  Eigen::VectorXd initial_distribution;  // defaults to uniform

  static ModelSpec make(int n_states, int n_activities, int n_covariates) {
    ModelSpec s;
    s.n_states = n_states;
    s.n_activities = n_activities;
    s.n_covariates = n_covariates;
    s.initial_distribution =
        Eigen::VectorXd::Constant(n_states, 1.0 / static_cast<double>(n_states));
    return s;
  }

  void check() const {
    if (n_states < 1) throw ConfigError("model: n_states must be >= 1");
    if (initial_distribution.size() != n_states) {
      throw ConfigError("model: initial distribution length != n_states");
    }
    double sum = 0.0;
    for (int s = 0; s < n_states; ++s) {
      if (initial_distribution[s] < 0.0) throw ConfigError("model: negative pi entry");
      sum += initial_distribution[s];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("model: pi does not sum to 1");
  }
};

/// Ordered-logit thresholds on the logit scale. Interior up-thresholds are
/// stored as a log gap above the down-threshold, so mu(s+1,s) > mu(s-1,s)
/// holds unconditionally. Raw layout for n_states = S >= 2:
///   [mu(2,1), mu(1,2), log_gap(2), ..., mu(S-2,S-1), log_gap(S-1), mu(S-1,S)]
/// Boundary conventions mu(S+1,S)=+inf, mu(0,1)=-inf are implicit.
struct ThresholdSet {
  std::vector<double> raw;

  static int raw_size(int n_states) { return n_states >= 2 ? 2 * (n_states - 1) : 0; }

  // mu(s+1, s): up-threshold for 1-based state s in 1..S-1
  double mu_up(int state, int n_states) const {
    if (state == 1) return raw[0];
    return mu_down(state, n_states) + std::exp(raw[2 * (state - 1)]);
  }
  // mu(s-1, s): down-threshold for 1-based state s in 2..S
  double mu_down(int state, int n_states) const {
    return raw[2 * state - 3];
  }
  double log_gap(int state) const { return raw[2 * (state - 1)]; }
};

/// Parameters common across analysts (the paper-level Psi block).
struct CommonParams {
  ThresholdSet thresholds;
  std::vector<Eigen::VectorXd> beta;  // per state, length n_activities
  std::vector<Eigen::VectorXd> rho;   // per state, length n_covariates
  std::vector<double> log_delta;      // per state; delta_s = exp(log_delta_s)

  double delta(int state) const { return std::exp(log_delta[state - 1]); }

  void check(const ModelSpec& spec) const {
    const int S = spec.n_states;
    if (static_cast<int>(thresholds.raw.size()) != ThresholdSet::raw_size(S)) {
      throw ConfigError("params: threshold vector size mismatch");
    }
    if (static_cast<int>(beta.size()) != S || static_cast<int>(rho.size()) != S ||
        static_cast<int>(log_delta.size()) != S) {
      throw ConfigError("params: per-state array count mismatch");
    }
    for (int s = 0; s < S; ++s) {
      if (beta[s].size() != spec.n_activities) throw ConfigError("params: beta length mismatch");
      if (rho[s].size() != spec.n_covariates) throw ConfigError("params: rho length mismatch");
    }
  }

  static CommonParams zeros(const ModelSpec& spec) {
    CommonParams p;
    p.thresholds.raw.assign(ThresholdSet::raw_size(spec.n_states), 0.0);
    for (int s = 0; s < spec.n_states; ++s) {
      p.beta.push_back(Eigen::VectorXd::Zero(spec.n_activities));
      p.rho.push_back(Eigen::VectorXd::Zero(spec.n_covariates));
      p.log_delta.push_back(0.0);
    }
    return p;
  }
};

/// Per-analyst random effects: zeta enters transitions, eta enters emissions.
struct RandomEffects {
  double zeta = 0.0;
  double eta = 0.0;
};

/// Flattening between CommonParams and the named Psi vector the sampler and
/// trace files work with. beta and thresholds are excluded for a one-state
/// model where no transition exists to identify them.
class ParamLayout {
 public:
  ParamLayout(const ModelSpec& spec, std::vector<std::string> covariate_names,
              std::vector<std::string> activity_names)
      : spec_(spec),
        covariate_names_(std::move(covariate_names)),
        activity_names_(std::move(activity_names)) {
    const int S = spec_.n_states;
    if (S >= 2) {
      names_.push_back("mu(2,1)");
      for (int s = 2; s <= S - 1; ++s) {
        names_.push_back("mu(" + std::to_string(s - 1) + "," + std::to_string(s) + ")");
        names_.push_back("log(mu(" + std::to_string(s + 1) + "," + std::to_string(s) + ")-mu(" +
                         std::to_string(s - 1) + "," + std::to_string(s) + "))");
      }
      names_.push_back("mu(" + std::to_string(S - 1) + "," + std::to_string(S) + ")");
      for (int s = 1; s <= S; ++s) {
        for (const auto& a : activity_names_) {
          names_.push_back("beta[" + std::to_string(s) + "]." + a);
        }
      }
    }
    for (int s = 1; s <= S; ++s) {
      for (const auto& c : covariate_names_) {
        names_.push_back("rho[" + std::to_string(s) + "]." + c);
      }
    }
    for (int s = 1; s <= S; ++s) names_.push_back("log_delta[" + std::to_string(s) + "]");
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const ModelSpec& spec() const { return spec_; }

  Eigen::VectorXd flatten(const CommonParams& p) const {
    const int S = spec_.n_states;
    Eigen::VectorXd v(size());
    int k = 0;
    if (S >= 2) {
      for (double x : p.thresholds.raw) v[k++] = x;
      for (int s = 0; s < S; ++s)
        for (int j = 0; j < spec_.n_activities; ++j) v[k++] = p.beta[s][j];
    }
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < spec_.n_covariates; ++j) v[k++] = p.rho[s][j];
    for (int s = 0; s < S; ++s) v[k++] = p.log_delta[s];
    return v;
  }

  CommonParams unflatten(const Eigen::VectorXd& v) const {
    if (v.size() != size()) throw NumericalError("unflatten: psi vector length mismatch");
    const int S = spec_.n_states;
    CommonParams p = CommonParams::zeros(spec_);
    int k = 0;
    if (S >= 2) {
      for (auto& x : p.thresholds.raw) x = v[k++];
      for (int s = 0; s < S; ++s)
        for (int j = 0; j < spec_.n_activities; ++j) p.beta[s][j] = v[k++];
    }
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < spec_.n_covariates; ++j) p.rho[s][j] = v[k++];
    for (int s = 0; s < S; ++s) p.log_delta[s] = v[k++];
    return p;
  }

  /// Index of rho[state].constant within the flat vector (1-based state).
  int rho_constant_index(int state) const {
    int base = spec_.n_states >= 2
                   ? ThresholdSet::raw_size(spec_.n_states) + spec_.n_states * spec_.n_activities
                   : 0;
    return base + (state - 1) * spec_.n_covariates;
  }

 private:
  ModelSpec spec_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> activity_names_;
  std::vector<std::string> names_;
};

/// State-reversal relabeling: state s -> S+1-s. The ordered-logit transition
/// family is closed under reversal with negated learning stock, so beta and
/// zeta flip sign, thresholds map to their negated mirror, and the interior
/// log gaps are carried over unchanged. Emission blocks are just reversed.
inline CommonParams reverse_states(const CommonParams& p, const ModelSpec& spec) {
  const int S = spec.n_states;
  if (S < 2) return p;
  CommonParams out = CommonParams::zeros(spec);
  // thresholds: new mu_up(s) = -old mu_down(S+1-s), new mu_down(s) = -old mu_up(S+1-s)
  out.thresholds.raw[0] = -p.thresholds.mu_down(S, S);
  for (int s = 2; s <= S - 1; ++s) {
    const int sp = S + 1 - s;  // also interior
    out.thresholds.raw[2 * s - 3] = -p.thresholds.mu_up(sp, S);
    out.thresholds.raw[2 * (s - 1)] = p.thresholds.log_gap(sp);
  }
  out.thresholds.raw[2 * S - 3] = -p.thresholds.mu_up(1, S);
  for (int s = 0; s < S; ++s) {
    out.beta[s] = -p.beta[S - 1 - s];
    out.rho[s] = p.rho[S - 1 - s];
    out.log_delta[s] = p.log_delta[S - 1 - s];
  }
  return out;
}

inline RandomEffects reverse_states(const RandomEffects& re) {
  return RandomEffects{-re.zeta, re.eta};
}

}  // namespace panelhmm
