#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "panelhmm/common.hpp"

namespace panelhmm {

/// Potential scale reduction for one parameter given >= 2 equal-length chains.
/// W = mean within-chain variance, B/n = variance of chain means,
/// Vhat = ((n-1)/n) W + B/n, Rhat = sqrt(Vhat / W).
/// Returns nullopt when fewer than two chains are supplied.
inline std::optional<double> gelman_rubin(const std::vector<Eigen::VectorXd>& chains) {
  const int m = static_cast<int>(chains.size());
  if (m < 2) return std::nullopt;
  const Eigen::Index n = chains[0].size();
  if (n < 10) throw DataError("gelman_rubin: need chain length >= 10");
  for (const auto& c : chains) {
    if (c.size() != n) throw DataError("gelman_rubin: unequal chain lengths");
  }
  double w = 0.0;
  double grand = 0.0;
  std::vector<double> means(m);
  for (int j = 0; j < m; ++j) {
    means[j] = chains[j].mean();
    grand += means[j];
    w += (chains[j].array() - means[j]).square().sum() / static_cast<double>(n - 1);
  }
  w /= m;
  grand /= m;
  double b_over_n = 0.0;
  for (int j = 0; j < m; ++j) b_over_n += (means[j] - grand) * (means[j] - grand);
  b_over_n /= (m - 1);
  const double nn = static_cast<double>(n);
  const double vhat = (nn - 1.0) / nn * w + b_over_n;
  if (w <= 0.0) return 1.0;  // constant chains
  return std::sqrt(vhat / w);
}

struct HpdInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate = false;  // zero-width window
};

/// Shortest contiguous window containing ceil(mass * n) sorted draws.
/// Returns nullopt for n < 20.
inline std::optional<HpdInterval> hpd_interval(std::vector<double> draws, double mass = 0.95) {
  const std::size_t n = draws.size();
  if (n < 20) return std::nullopt;
  std::sort(draws.begin(), draws.end());
  const std::size_t w = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n)));
  std::size_t best = 0;
  double best_width = draws[w - 1] - draws[0];
  for (std::size_t i = 1; i + w <= n; ++i) {
    const double width = draws[i + w - 1] - draws[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  HpdInterval out;
  out.lo = draws[best];
  out.hi = draws[best + w - 1];
  out.degenerate = (best_width == 0.0);
  return out;
}

}  // namespace panelhmm
