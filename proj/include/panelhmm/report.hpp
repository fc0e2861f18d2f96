#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "panelhmm/baseline.hpp"
#include "panelhmm/decode.hpp"
#include "panelhmm/summary.hpp"

namespace panelhmm {

namespace detail {

inline std::string fixed3(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3) << v;
  return ss.str();
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/// Plain-text run report: parameter table (starred rows where the HPD
/// excludes 0), optional fit comparison, R-hat table, acceptance rates, and
/// per-period modal-state occupancy counts. Deterministic given inputs.
inline std::string render_report(const PosteriorSummary& summary,
                                 const std::vector<StatePosterior>& posteriors = {},
                                 const std::vector<ModelComparisonRow>& comparison = {}) {
  using detail::fixed3;
  using detail::pad;
  std::ostringstream out;

  out << "Posterior parameter estimates (" << summary.n_chains << " chain"
      << (summary.n_chains == 1 ? "" : "s") << ", * = 95% HPD excludes 0)\n";
  std::size_t name_w = 9;
  for (const auto& p : summary.parameters) name_w = std::max(name_w, p.name.size());
  out << pad("parameter", name_w) << "  " << pad("mean", 10) << pad("std", 10) << pad("hpd_lo", 11)
      << pad("hpd_hi", 11) << "sig\n";
  for (const auto& p : summary.parameters) {
    out << pad(p.name, name_w) << "  " << pad(fixed3(p.mean), 10) << pad(fixed3(p.stddev), 10);
    if (p.hpd) {
      out << pad(fixed3(p.hpd->lo), 11) << pad(fixed3(p.hpd->hi), 11);
    } else {
      out << pad("-", 11) << pad("-", 11);
    }
    out << (p.significant ? "*" : "") << "\n";
  }
  out << "\n";

  if (summary.fit) {
    out << "Fit: -2logL = " << fixed3(summary.fit->neg2_loglik) << "  AIC = "
        << fixed3(summary.fit->aic) << "  BIC = " << fixed3(summary.fit->bic)
        << "  (k = " << summary.fit->k << ", n = " << summary.fit->n << ")\n\n";
  }

  if (!comparison.empty()) {
    out << "Model comparison (sorted by BIC)\n";
    std::size_t cmp_w = 5;
    for (const auto& r : comparison) cmp_w = std::max(cmp_w, r.name.size());
    out << pad("model", cmp_w) << "  " << pad("-2logL", 14) << pad("AIC", 14) << pad("BIC", 14)
        << "k\n";
    for (const auto& r : comparison) {
      out << pad(r.name, cmp_w) << "  " << pad(fixed3(r.neg2_loglik), 14) << pad(fixed3(r.aic), 14)
          << pad(fixed3(r.bic), 14) << r.k << "\n";
    }
    out << "\n";
  }

  if (summary.n_chains >= 2) {
    out << "Convergence (Gelman-Rubin R-hat)\n";
    for (const auto& p : summary.parameters) {
      if (p.rhat) out << pad(p.name, name_w) << "  " << fixed3(*p.rhat) << "\n";
    }
    out << "\n";
  }

  if (!summary.acceptance_rates.empty()) {
    out << "Acceptance rates (post-adaptation)\n";
    std::size_t blk_w = 5;
    for (const auto& [name, rate] : summary.acceptance_rates) blk_w = std::max(blk_w, name.size());
    for (const auto& [name, rate] : summary.acceptance_rates) {
      out << pad(name, blk_w) << "  " << fixed3(rate) << "\n";
    }
    out << "\n";
  }

  if (!posteriors.empty()) {
    const int n_states = static_cast<int>(posteriors.front().smoothed.cols());
    const int horizon = static_cast<int>(posteriors.front().smoothed.rows());
    out << "State occupancy by period (modal smoothed state)\n";
    out << pad("t", 5);
    for (int s = 1; s <= n_states; ++s) out << pad("state " + std::to_string(s), 10);
    out << "\n";
    for (int t = 0; t < horizon; ++t) {
      std::vector<long> counts(static_cast<std::size_t>(n_states), 0);
      for (const auto& sp : posteriors) {
        if (t >= sp.smoothed.rows()) continue;
        int best = 0;
        sp.smoothed.row(t).maxCoeff(&best);
        ++counts[static_cast<std::size_t>(best)];
      }
      out << pad(std::to_string(t + 1), 5);
      for (long c : counts) out << pad(std::to_string(c), 10);
      out << "\n";
    }
  }

  return out.str();
}

}  // namespace panelhmm
