#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <string>
#include <vector>

#include "panelhmm/hmm.hpp"
#include "panelhmm/panel.hpp"

namespace panelhmm {

/// Column selection for the static model: state-invariant covariates plus
/// contemporaneous activity counts of the query's period.
struct StaticDesign {
  std::vector<std::string> covariates;  // empty = all panel covariates
  std::vector<std::string> activities;  // empty = all panel activities
  bool use_activities = true;           // false = covariates only
};

struct StaticModelFit {
  std::vector<std::string> coefficient_names;
  Eigen::VectorXd coefficients;
  double log_dispersion = 0.0;
  Eigen::VectorXd std_errors;  // observed-information inverse diagonal
  double neg2_loglik = 0.0;
  long k = 0;  // coefficients + dispersion
  long n = 0;
  double aic = 0.0, bic = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_max_norm = 0.0;
};

inline std::pair<double, double> information_criteria(double neg2_loglik, long k, long n) {
  if (n < 1) throw DataError("information_criteria: n must be >= 1");
  if (k < 0) throw DataError("information_criteria: k must be >= 0");
  const double aic = neg2_loglik + 2.0 * static_cast<double>(k);
  const double bic = neg2_loglik + static_cast<double>(k) * std::log(static_cast<double>(n));
  return {aic, bic};
}

namespace detail {

/// NB regression log-likelihood and gradient in theta = (coefficients b,
/// log_delta). Same pmf as the HMM emission with one state and no random
/// effects.
struct NbRegression {
  Eigen::MatrixXd x;  // n x p
  Eigen::VectorXd y;
  Eigen::VectorXd lgamma_y_p1;

  double log_lik(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) const {
    const int p = static_cast<int>(x.cols());
    const Eigen::VectorXd b = theta.head(p);
    const double log_delta = theta[p];
    const double delta = std::exp(log_delta);
    const double lgamma_delta = std::lgamma(delta);
    if (grad) grad->setZero(p + 1);
    double ll = 0.0;
    const Eigen::VectorXd v = x * b;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double m = log_add_exp(v[i], log_delta);
      const double h = std::exp(log_delta - m);  // delta / (e^v + delta)
      ll += std::lgamma(delta + y[i]) - lgamma_y_p1[i] - lgamma_delta +
            delta * (log_delta - m) + y[i] * (v[i] - m);
      if (grad) {
        const double dv = y[i] * h - delta * (1.0 - h);
        grad->head(p) += dv * x.row(i).transpose();
        const double ddelta = digamma(delta + y[i]) - digamma(delta) + (log_delta - m) +
                              (1.0 - h) - y[i] * h / delta;
        (*grad)[p] += delta * ddelta;
      }
    }
    return ll;
  }
};

}  // namespace detail

/// Maximizes the one-state NB log-likelihood by BFGS with backtracking line
/// search and the analytic gradient. Converged when the gradient max-norm
/// drops below 1e-6.
inline StaticModelFit fit_static(const PanelData& panel, const StaticDesign& design = {}) {
  std::vector<std::string> cov_names =
      design.covariates.empty() ? panel.covariate_names : design.covariates;
  std::vector<std::string> act_names;
  if (design.use_activities) {
    act_names = design.activities.empty() ? panel.activity_names : design.activities;
  }
  std::vector<int> cov_idx, act_idx;
  for (const auto& name : cov_names) {
    auto it = std::find(panel.covariate_names.begin(), panel.covariate_names.end(), name);
    if (it == panel.covariate_names.end()) throw ConfigError("fit_static: unknown covariate " + name);
    cov_idx.push_back(static_cast<int>(it - panel.covariate_names.begin()));
  }
  for (const auto& name : act_names) {
    auto it = std::find(panel.activity_names.begin(), panel.activity_names.end(), name);
    if (it == panel.activity_names.end()) throw ConfigError("fit_static: unknown activity " + name);
    act_idx.push_back(static_cast<int>(it - panel.activity_names.begin()));
  }

  const int p = static_cast<int>(cov_idx.size() + act_idx.size());
  const long n = static_cast<long>(panel.total_queries());
  if (n < p + 1) throw DataError("fit_static: need at least k+1 queries");

  detail::NbRegression reg;
  reg.x.resize(n, p);
  reg.y.resize(n);
  reg.lgamma_y_p1.resize(n);
  long row = 0;
  for (const auto& a : panel.analysts) {
    for (const auto& period : a.periods) {
      for (const auto& q : period.queries) {
        for (std::size_t j = 0; j < cov_idx.size(); ++j) reg.x(row, j) = q.covariates[cov_idx[j]];
        for (std::size_t j = 0; j < act_idx.size(); ++j) {
          reg.x(row, cov_idx.size() + j) = period.activities[act_idx[j]];
        }
        reg.y[row] = static_cast<double>(q.completion_time);
        reg.lgamma_y_p1[row] = std::lgamma(reg.y[row] + 1.0);
        ++row;
      }
    }
  }

  // rank check, naming the columns past the independent set
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(reg.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      std::vector<std::string> all_names = cov_names;
      all_names.insert(all_names.end(), act_names.begin(), act_names.end());
      std::string bad;
      const auto perm = qr.colsPermutation().indices();
      for (int j = qr.rank(); j < p; ++j) {
        if (!bad.empty()) bad += ", ";
        bad += all_names[perm[j]];
      }
      throw DataError("fit_static: design matrix rank deficient; collinear columns: " + bad);
    }
  }

  // BFGS on f = -log_lik
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  const double ymean = reg.y.mean();
  theta[0] = std::log(std::max(ymean, 1e-3));  // intercept start at log mean
  Eigen::VectorXd grad(p + 1);
  double ll = reg.log_lik(theta, &grad);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p + 1, p + 1);
  const int max_iter = 1000;
  int iter = 0;
  bool converged = grad.cwiseAbs().maxCoeff() < 1e-6;
  while (!converged && iter < max_iter) {
    ++iter;
    Eigen::VectorXd dir = hinv * grad;  // ascent direction
    if (dir.dot(grad) <= 0.0) {
      hinv = Eigen::MatrixXd::Identity(p + 1, p + 1);
      dir = grad;
    }
    double step = 1.0;
    Eigen::VectorXd theta_new;
    Eigen::VectorXd grad_new(p + 1);
    double ll_new = ll;
    const double slope = dir.dot(grad);
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      theta_new = theta + step * dir;
      ll_new = reg.log_lik(theta_new, &grad_new);
      if (std::isfinite(ll_new) && ll_new >= ll + 1e-4 * step * slope) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    const Eigen::VectorXd s = theta_new - theta;
    const Eigen::VectorXd yk = -(grad_new - grad);  // gradient of f = -ll
    const double sy = s.dot(yk);
    if (sy > 1e-12) {
      const Eigen::VectorXd hy = hinv * yk;
      hinv += ((sy + yk.dot(hy)) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    theta = theta_new;
    grad = grad_new;
    ll = ll_new;
    converged = grad.cwiseAbs().maxCoeff() < 1e-6;
  }

  // Newton polish: near the optimum the Armijo test on the log-likelihood
  // stalls on roundoff, so finish with damped Newton steps accepted whenever
  // they shrink the gradient max-norm.
  auto fd_information = [&](const Eigen::VectorXd& at) {
    const int d = p + 1;
    Eigen::MatrixXd info(d, d);
    Eigen::VectorXd gp(d), gm(d);
    for (int j = 0; j < d; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(at[j]));
      Eigen::VectorXd tp = at, tm = at;
      tp[j] += h;
      tm[j] -= h;
      reg.log_lik(tp, &gp);
      reg.log_lik(tm, &gm);
      info.col(j) = -(gp - gm) / (2.0 * h);
    }
    return Eigen::MatrixXd(0.5 * (info + info.transpose()));
  };
  for (int polish = 0; polish < 40 && !converged; ++polish) {
    const Eigen::MatrixXd info = fd_information(theta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::VectorXd newton = ldlt.solve(grad);
    double scale = 1.0;
    bool better = false;
    Eigen::VectorXd g2(p + 1);
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd th2 = theta + scale * newton;
      const double ll2 = reg.log_lik(th2, &g2);
      if (std::isfinite(ll2) && g2.cwiseAbs().maxCoeff() < grad.cwiseAbs().maxCoeff()) {
        theta = th2;
        grad = g2;
        ll = ll2;
        better = true;
        break;
      }
      scale *= 0.5;
    }
    if (!better) break;
    ++iter;
    converged = grad.cwiseAbs().maxCoeff() < 1e-6;
  }

  StaticModelFit fit;
  fit.coefficient_names = cov_names;
  for (const auto& a : act_names) fit.coefficient_names.push_back(a);
  fit.coefficients = theta.head(p);
  fit.log_dispersion = theta[p];
  fit.neg2_loglik = -2.0 * ll;
  fit.k = p + 1;
  fit.n = n;
  fit.converged = converged;
  fit.iterations = iter;
  fit.grad_max_norm = grad.cwiseAbs().maxCoeff();
  auto [aic, bic] = information_criteria(fit.neg2_loglik, fit.k, fit.n);
  fit.aic = aic;
  fit.bic = bic;

  // observed information from central differences of the analytic gradient
  {
    const int d = p + 1;
    const Eigen::MatrixXd info = fd_information(theta);
    const Eigen::MatrixXd cov = info.inverse();
    fit.std_errors.resize(d);
    for (int j = 0; j < d; ++j) {
      fit.std_errors[j] = cov(j, j) > 0.0 ? std::sqrt(cov(j, j)) : std::nan("");
    }
  }
  return fit;
}

struct ModelComparisonRow {
  std::string name;
  double neg2_loglik = 0.0;
  long k = 0;
  long n = 0;
  double aic = 0.0, bic = 0.0;
};

/// Fit-measure table sorted by BIC ascending (ties broken by name).
inline std::vector<ModelComparisonRow> compare_models(
    const std::vector<ModelComparisonRow>& fits) {
  if (fits.size() < 2) throw DataError("compare_models: need at least two fits");
  std::vector<ModelComparisonRow> rows = fits;
  for (auto& r : rows) {
    if (r.n != rows.front().n) {
      throw DataError("compare_models: mismatched observation counts");
    }
    auto [aic, bic] = information_criteria(r.neg2_loglik, r.k, r.n);
    r.aic = aic;
    r.bic = bic;
  }
  std::sort(rows.begin(), rows.end(), [](const ModelComparisonRow& a, const ModelComparisonRow& b) {
    if (a.bic != b.bic) return a.bic < b.bic;
    return a.name < b.name;
  });
  return rows;
}

}  // namespace panelhmm
