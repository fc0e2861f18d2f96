#pragma once

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/Core>
#include <random>

#include "panelhmm/common.hpp"

namespace panelhmm {

/// PRNG wrapper. Substreams derived by seed mixing so per-analyst draws are
/// independent of iteration order and thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_mix_(splitmix64(seed)), engine_(seed_mix_) {}

  Rng substream(std::uint64_t stream_id) const {
    return Rng(seed_mix_ ^ splitmix64(stream_id ^ 0xa5a5a5a5a5a5a5a5ull));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<long>(mean)(engine_);
  }
  double chi_squared(double dof) { return std::gamma_distribution<double>(dof / 2.0, 2.0)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

  /// Index draw from a probability vector (entries >= 0, sum ~ 1).
  int categorical(const Eigen::VectorXd& probs) {
    double u = uniform();
    double acc = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u <= acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = normal();
    return z;
  }

  /// Multivariate normal N(mean, cov) via Cholesky.
  Eigen::VectorXd mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("mvn: covariance not positive definite");
    }
    return mean + llt.matrixL() * normal_vector(static_cast<int>(mean.size()));
  }

  /// Wishart(dof, scale) via Bartlett decomposition.
  Eigen::MatrixXd wishart(double dof, const Eigen::MatrixXd& scale) {
    const int p = static_cast<int>(scale.rows());
    if (dof < p) throw NumericalError("wishart: dof < dimension");
    Eigen::LLT<Eigen::MatrixXd> llt(scale);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("wishart: scale not positive definite");
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
      A(i, i) = std::sqrt(chi_squared(dof - i));
      for (int j = 0; j < i; ++j) A(i, j) = normal();
    }
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd LA = L * A;
    return LA * LA.transpose();
  }

  /// InverseWishart(dof, scale): X^-1 where X ~ Wishart(dof, scale^-1).
  Eigen::MatrixXd inverse_wishart(double dof, const Eigen::MatrixXd& scale) {
    Eigen::MatrixXd W = wishart(dof, scale.inverse());
    Eigen::MatrixXd S = W.inverse();
    return 0.5 * (S + S.transpose());  // enforce exact symmetry
  }

 private:
  std::uint64_t seed_mix_;
  std::mt19937_64 engine_;
};

}  // namespace panelhmm
