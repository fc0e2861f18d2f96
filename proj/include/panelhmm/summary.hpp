#pragma once

#include <optional>
#include <string>
#include <vector>

#include "panelhmm/baseline.hpp"
#include "panelhmm/diagnostics.hpp"
#include "panelhmm/mcmc.hpp"

namespace panelhmm {

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
  std::optional<HpdInterval> hpd;
  bool significant = false;  // 95% HPD excludes 0
  std::optional<double> rhat;
};

struct FitBlock {
  double neg2_loglik = 0.0;
  double aic = 0.0, bic = 0.0;
  long k = 0, n = 0;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  std::optional<FitBlock> fit;
  std::vector<std::pair<std::string, double>> acceptance_rates;
  int n_chains = 0;
  long pooled_draws = 0;
};

/// Post-hoc label alignment. The ordered transition structure is closed only
/// under state reversal, so the choice is identity vs reversal: pick the one
/// whose posterior-mean emission intercepts are in descending order (state 1
/// most positive, i.e. slowest). Applied per chain before pooling.
inline bool chain_needs_reversal(const ChainTrace& trace) {
  if (trace.spec.n_states < 2) return false;
  const ParamLayout layout(trace.spec, trace.covariate_names, trace.activity_names);
  const int first = layout.rho_constant_index(1);
  const int last = layout.rho_constant_index(trace.spec.n_states);
  return trace.draws.col(first).mean() < trace.draws.col(last).mean();
}

inline void reverse_chain_labels(ChainTrace& trace) {
  const ParamLayout layout(trace.spec, trace.covariate_names, trace.activity_names);
  const int n_psi = layout.size();
  for (Eigen::Index r = 0; r < trace.draws.rows(); ++r) {
    const Eigen::VectorXd flat = trace.draws.row(r).head(n_psi);
    const CommonParams rev = reverse_states(layout.unflatten(flat), trace.spec);
    trace.draws.row(r).head(n_psi) = layout.flatten(rev);
    trace.draws(r, n_psi + 1) = -trace.draws(r, n_psi + 1);  // cov(zeta, eta) flips
  }
  for (auto& tm : trace.theta_means) tm[0] = -tm[0];
  for (Eigen::Index r = 0; r < trace.theta_draws.rows(); ++r) {
    for (Eigen::Index i = 0; i + 1 < trace.theta_draws.cols(); i += 2) {
      trace.theta_draws(r, i) = -trace.theta_draws(r, i);
    }
  }
}

inline void relabel_chains(std::vector<ChainTrace>& traces) {
  for (auto& t : traces) {
    if (chain_needs_reversal(t)) reverse_chain_labels(t);
  }
}

/// Pools post-burn-in draws across chains into Table-3-style parameter rows
/// plus fit measures evaluated at the posterior mean of (Psi, {Theta_i}).
/// Relabels chains first. The panel is optional; without it the fit block is
/// omitted.
inline PosteriorSummary summarize(std::vector<ChainTrace> traces, const PanelData* panel = nullptr) {
  if (traces.empty()) throw DataError("summarize: no traces");
  relabel_chains(traces);
  const auto& names = traces[0].names;
  for (const auto& t : traces) {
    if (t.names != names) throw DataError("summarize: traces have mismatched parameters");
  }

  PosteriorSummary out;
  out.n_chains = static_cast<int>(traces.size());
  long pooled_n = 0;
  for (const auto& t : traces) pooled_n += t.retained();
  out.pooled_draws = pooled_n;

  for (std::size_t j = 0; j < names.size(); ++j) {
    ParameterSummary ps;
    ps.name = names[j];
    std::vector<double> pooled;
    pooled.reserve(pooled_n);
    std::vector<Eigen::VectorXd> per_chain;
    for (const auto& t : traces) {
      per_chain.push_back(t.draws.col(static_cast<Eigen::Index>(j)));
      for (Eigen::Index r = 0; r < t.draws.rows(); ++r) {
        pooled.push_back(t.draws(r, static_cast<Eigen::Index>(j)));
      }
    }
    double mean = 0.0;
    for (double x : pooled) mean += x;
    mean /= static_cast<double>(pooled.size());
    double var = 0.0;
    for (double x : pooled) var += (x - mean) * (x - mean);
    var = pooled.size() > 1 ? var / static_cast<double>(pooled.size() - 1) : 0.0;
    ps.mean = mean;
    ps.stddev = std::sqrt(var);
    ps.hpd = hpd_interval(pooled, 0.95);
    ps.significant = ps.hpd && (ps.hpd->lo > 0.0 || ps.hpd->hi < 0.0);
    if (traces.size() >= 2 && traces[0].retained() >= 10) {
      ps.rhat = gelman_rubin(per_chain);
    }
    out.parameters.push_back(std::move(ps));
  }

  for (std::size_t b = 0; b < traces[0].block_names.size(); ++b) {
    double acc = 0.0;
    for (const auto& t : traces) acc += t.acceptance_rates[b];
    out.acceptance_rates.emplace_back(traces[0].block_names[b],
                                      acc / static_cast<double>(traces.size()));
  }

  if (panel != nullptr) {
    const ModelSpec& spec = traces[0].spec;
    const ParamLayout layout(spec, traces[0].covariate_names, traces[0].activity_names);
    Eigen::VectorXd psi_mean(layout.size());
    for (int j = 0; j < layout.size(); ++j) psi_mean[j] = out.parameters[j].mean;
    const CommonParams params = layout.unflatten(psi_mean);

    // posterior-mean random effects, averaged over chains, matched by id
    std::vector<RandomEffects> all_re(panel->analysts.size());
    for (std::size_t i = 0; i < panel->analysts.size(); ++i) {
      const std::string& id = panel->analysts[i].analyst_id;
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for (const auto& t : traces) {
        auto it = std::find(t.analyst_ids.begin(), t.analyst_ids.end(), id);
        if (it == t.analyst_ids.end()) throw DataError("summarize: analyst missing from trace");
        acc += t.theta_means[it - t.analyst_ids.begin()];
      }
      acc /= static_cast<double>(traces.size());
      all_re[i] = {acc[0], acc[1]};
    }

    FitBlock fit;
    fit.neg2_loglik = -2.0 * full_log_likelihood(spec, params, all_re, *panel);
    fit.k = layout.size() + 2 * static_cast<long>(panel->analysts.size()) + 3;
    fit.n = static_cast<long>(panel->total_queries());
    auto [aic, bic] = information_criteria(fit.neg2_loglik, fit.k, fit.n);
    fit.aic = aic;
    fit.bic = bic;
    out.fit = fit;
  }
  return out;
}

}  // namespace panelhmm
