#pragma once

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

#include "panelhmm/hmm.hpp"
#include "panelhmm/rng.hpp"

namespace panelhmm {

/// Diffuse priors: Psi ~ Normal(0, psi_variance * I),
/// Sigma_Theta ~ InverseWishart(N_theta + iw_extra_dof + N_ind, I).
struct PriorSpec {
  double psi_variance = 30.0;
  double iw_extra_dof = 5.0;

  double iw_dof(int n_ind) const { return 2.0 + iw_extra_dof + static_cast<double>(n_ind); }
  void check() const {
    if (psi_variance <= 0.0) throw ConfigError("prior: psi_variance must be positive");
  }
};

struct McmcConfig {
  long n_iterations = 100000;
  long burn_in = 85000;
  int n_chains = 2;
  int thinning = 1;
  double target_acceptance = 0.234;
  double adapt_decay = 0.6;  // Robbins-Monro exponent
  long freeze_at = -1;       // -1: freeze at burn_in
  std::uint64_t seed = 0;
  bool psi_blocked = false;  // grouped sub-blocks instead of one joint Psi block
  bool store_random_effects = false;
  int n_workers = 1;
  int init_retries = 100;

  long effective_freeze() const { return freeze_at < 0 ? burn_in : freeze_at; }
  void check() const {
    if (n_iterations < 1) throw ConfigError("mcmc: n_iterations must be >= 1");
    if (burn_in < 0 || burn_in >= n_iterations) {
      throw ConfigError("mcmc: burn_in must be in [0, n_iterations)");
    }
    if (n_chains < 1) throw ConfigError("mcmc: n_chains must be >= 1");
    if (thinning < 1) throw ConfigError("mcmc: thinning must be >= 1");
    if (adapt_decay <= 0.5 || adapt_decay > 1.0) {
      throw ConfigError("mcmc: adapt_decay must be in (0.5, 1]");
    }
  }
};

/// Adaptive random-walk proposal state for one MH block: scalar scale lambda
/// tuned by Robbins-Monro toward the target acceptance rate, shape matrix
/// from the running draw covariance. Immutable once frozen.
class AdaptState {
 public:
  explicit AdaptState(int dim, double target = 0.234, double decay = 0.6)
      : dim_(dim),
        target_(target),
        decay_(decay),
        log_lambda_(std::log(2.38 * 2.38 / static_cast<double>(dim))),
        mean_(Eigen::VectorXd::Zero(dim)),
        m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

  int dim() const { return dim_; }
  double lambda() const { return std::exp(log_lambda_); }
  bool frozen() const { return frozen_; }
  long accepted() const { return accepted_; }
  long proposed() const { return proposed_; }
  /// Post-freeze acceptance rate when available, overall rate otherwise.
  double acceptance_rate() const {
    if (proposed_post_ > 0) {
      return static_cast<double>(accepted_post_) / static_cast<double>(proposed_post_);
    }
    return proposed_ > 0 ? static_cast<double>(accepted_) / static_cast<double>(proposed_) : 0.0;
  }

  Eigen::MatrixXd sigma_tilde() const {
    if (count_ < 2 * dim_ + 4) return Eigen::MatrixXd::Identity(dim_, dim_);
    Eigen::MatrixXd s = m2_ / static_cast<double>(count_ - 1);
    s.diagonal().array() += 1e-8;
    return s;
  }

  Eigen::VectorXd propose(const Eigen::VectorXd& current, Rng& rng) {
    ++proposed_;
    if (!chol_valid_) {
      Eigen::LLT<Eigen::MatrixXd> llt(sigma_tilde());
      chol_ = (llt.info() == Eigen::Success)
                  ? Eigen::MatrixXd(llt.matrixL())
                  : Eigen::MatrixXd::Identity(dim_, dim_);
      chol_valid_ = true;
    }
    return current + std::sqrt(lambda()) * (chol_ * rng.normal_vector(dim_));
  }

  /// Record the post-step chain value; when not frozen, advance the
  /// Robbins-Monro scale and the running covariance.
  void update(bool accepted, double accept_prob, const Eigen::VectorXd& value) {
    if (accepted) ++accepted_;
    if (frozen_) {
      ++proposed_post_;
      if (accepted) ++accepted_post_;
      return;
    }
    ++adapt_iter_;
    log_lambda_ +=
        std::pow(static_cast<double>(adapt_iter_), -decay_) * (accept_prob - target_);
    ++count_;
    const Eigen::VectorXd delta = value - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (value - mean_).transpose();
    chol_valid_ = false;
  }

  void freeze() { frozen_ = true; }


 private:
  int dim_;
  double target_, decay_, log_lambda_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  long count_ = 0, adapt_iter_ = 0;
  long accepted_ = 0, proposed_ = 0;
  long accepted_post_ = 0, proposed_post_ = 0;
  bool frozen_ = false;
  Eigen::MatrixXd chol_;
  bool chol_valid_ = false;
};

/// One symmetric random-walk MH step. Rejection is not an error: on reject
/// the value is unchanged. Returns whether the candidate was accepted and
/// keeps current/current_log_post in sync.
template <typename LogPostFn>
inline bool mh_step(Eigen::VectorXd& current, double& current_log_post, LogPostFn&& log_post,
                    AdaptState& adapt, Rng& rng) {
  const Eigen::VectorXd cand = adapt.propose(current, rng);
  const double cand_lp = log_post(cand);
  const double delta = cand_lp - current_log_post;
  const double accept_prob = delta >= 0.0 ? 1.0 : std::exp(delta);
  const bool accepted = rng.uniform() < accept_prob;
  if (accepted) {
    current = cand;
    current_log_post = cand_lp;
  }
  adapt.update(accepted, accept_prob, current);
  return accepted;
}

/// Conjugate covariance draw, Algorithm 1 Step 2:
/// Sigma_Theta ~ InverseWishart(N_theta + 5 + N_ind, I + sum Theta_i Theta_i').
inline Eigen::Matrix2d gibbs_sigma_theta(const std::vector<RandomEffects>& all_re,
                                         const PriorSpec& prior, Rng& rng) {
  Eigen::Matrix2d scale = Eigen::Matrix2d::Identity();
  for (const auto& re : all_re) {
    if (!std::isfinite(re.zeta) || !std::isfinite(re.eta)) {
      throw NumericalError("gibbs_sigma_theta: non-finite random effect");
    }
    Eigen::Vector2d th(re.zeta, re.eta);
    scale += th * th.transpose();
  }
  return rng.inverse_wishart(prior.iw_dof(static_cast<int>(all_re.size())), scale);
}

/// Full log posterior for the common block (up to terms constant in Psi).
inline double log_posterior_common(const CommonParams& psi, const ModelSpec& spec,
                                   const std::vector<RandomEffects>& all_re,
                                   const PanelData& panel, const PriorSpec& prior) {
  const ParamLayout layout(spec, panel.covariate_names, panel.activity_names);
  const Eigen::VectorXd flat = layout.flatten(psi);
  const double lp_prior = -0.5 * flat.squaredNorm() / prior.psi_variance;
  const double ll = full_log_likelihood(spec, psi, all_re, panel);
  const double out = ll + lp_prior;
  if (!std::isfinite(out)) throw NumericalError("log_posterior_common: non-finite value");
  return out;
}

struct ChainTrace {
  ModelSpec spec;
  std::vector<std::string> covariate_names, activity_names;
  std::vector<std::string> names;  // psi names + sigma_theta unique entries
  Eigen::MatrixXd draws;           // retained x names.size()
  Eigen::VectorXd log_post;        // retained
  std::vector<std::string> block_names;
  std::vector<double> acceptance_rates;        // post-freeze, per block
  std::vector<Eigen::Vector2d> theta_means;    // per analyst, post burn-in
  std::vector<std::string> analyst_ids;
  Eigen::MatrixXd theta_draws;  // retained x 2*N_ind when stored, else 0x0
  std::uint64_t chain_seed = 0;
  long n_iterations = 0, burn_in = 0;
  int thinning = 1;
  // freeze bookkeeping, for the adaptation-invariance check
  std::vector<double> lambda_at_freeze, lambda_final;

  long retained() const { return draws.rows(); }
};

namespace detail {

inline void parallel_for(std::size_t n, int n_workers, const std::function<void(std::size_t)>& fn) {
  if (n_workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min<int>(n_workers, static_cast<int>(n));
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Index groups for the blocked Psi proposal: thresholds, all betas, one
/// block per state's rho vector, all log-deltas.
inline std::vector<std::pair<std::string, std::vector<int>>> psi_blocks(const ParamLayout& layout,
                                                                        bool blocked) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  const int S = layout.spec().n_states;
  const int C = layout.spec().n_covariates;
  const int A = layout.spec().n_activities;
  if (!blocked) {
    std::vector<int> all(layout.size());
    for (int i = 0; i < layout.size(); ++i) all[i] = i;
    out.emplace_back("psi", std::move(all));
    return out;
  }
  int k = 0;
  if (S >= 2) {
    std::vector<int> thr(ThresholdSet::raw_size(S));
    for (auto& i : thr) i = k++;
    out.emplace_back("psi.thresholds", std::move(thr));
    std::vector<int> beta(S * A);
    for (auto& i : beta) i = k++;
    out.emplace_back("psi.beta", std::move(beta));
  }
  for (int s = 1; s <= S; ++s) {
    std::vector<int> rho(C);
    for (auto& i : rho) i = k++;
    out.emplace_back("psi.rho[" + std::to_string(s) + "]", std::move(rho));
  }
  std::vector<int> ld(S);
  for (auto& i : ld) i = k++;
  out.emplace_back("psi.log_delta", std::move(ld));
  return out;
}

}  // namespace detail

/// One full Metropolis-within-Gibbs chain, Algorithm-1 structure: per-analyst
/// MH on Theta_i, conjugate Sigma_Theta, MH on Psi. Adaptation is frozen at
/// freeze_at so retained draws come from a fixed-kernel chain.
inline ChainTrace run_chain(const PanelData& panel, const ModelSpec& spec, const PriorSpec& prior,
                            const McmcConfig& config, std::uint64_t chain_seed) {
  spec.check();
  prior.check();
  config.check();
  const int n_ind = static_cast<int>(panel.analysts.size());
  if (n_ind == 0) throw DataError("run_chain: empty panel");

  // analysts processed in ascending id order for reproducible accumulation
  std::vector<std::size_t> order(panel.analysts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return panel.analysts[a].analyst_id < panel.analysts[b].analyst_id;
  });
  std::vector<FlatAnalyst> flat;
  flat.reserve(order.size());
  for (std::size_t i : order) {
    flat.push_back(
        flatten_analyst(panel.analysts[i], static_cast<int>(panel.covariate_names.size())));
  }

  const ParamLayout layout(spec, panel.covariate_names, panel.activity_names);
  const int n_psi = layout.size();
  Rng root(chain_seed);

  // --- initialization from the priors, retried on a non-finite posterior ---
  Eigen::VectorXd psi_flat;
  CommonParams params = CommonParams::zeros(spec);
  Eigen::Matrix2d sigma_theta;
  std::vector<RandomEffects> theta(n_ind);
  std::vector<double> seq_ll(n_ind);
  bool ok = false;
  for (int attempt = 0; attempt < config.init_retries && !ok; ++attempt) {
    Rng init = root.substream(0xfeed0000ull + static_cast<std::uint64_t>(attempt));
    sigma_theta = init.inverse_wishart(prior.iw_dof(n_ind), Eigen::Matrix2d::Identity());
    for (int i = 0; i < n_ind; ++i) {
      Eigen::VectorXd th = init.mvn(Eigen::VectorXd::Zero(2), sigma_theta);
      theta[i] = {th[0], th[1]};
    }
    psi_flat = std::sqrt(prior.psi_variance) * init.normal_vector(n_psi);
    params = layout.unflatten(psi_flat);
    ok = true;
    try {
      for (int i = 0; i < n_ind; ++i) {
        seq_ll[i] = sequence_log_likelihood(spec, params, theta[i], flat[i]);
        if (!std::isfinite(seq_ll[i])) ok = false;
      }
    } catch (const NumericalError&) {
      ok = false;
    }
  }
  if (!ok) throw NumericalError("run_chain: no finite initialization found");

  // --- burn-in accelerator: coordinate-wise pattern search on Psi ---
  // A prior draw Psi0 ~ Normal(0, 30I) sits tens of posterior standard
  // deviations from the mode on informative data; a random-walk kernel
  // cannot cover that distance within burn-in, and once adaptation freezes
  // the chain is locked on the transient. Worse, the random effects absorb
  // the misfit of a far-off Psi and the chain settles in a self-consistent
  // wrong basin. So before sampling starts, climb the fixed-theta log
  // posterior coordinate by coordinate; deterministic, consumes no
  // randomness, and only moves the point the burn-in starts from.
  if (config.burn_in > 0) {
    std::vector<double> ll_buf(n_ind);
    auto objective = [&](const Eigen::VectorXd& p) {
      const CommonParams cp = layout.unflatten(p);
      detail::parallel_for(static_cast<std::size_t>(n_ind), config.n_workers,
                           [&](std::size_t i) {
                             try {
                               ll_buf[i] = sequence_log_likelihood(spec, cp, theta[i], flat[i]);
                             } catch (const NumericalError&) {
                               ll_buf[i] = kNegInf;
                             }
                           });
      double s = -0.5 * p.squaredNorm() / prior.psi_variance;
      for (int i = 0; i < n_ind; ++i) s += ll_buf[i];
      return std::isfinite(s) ? s : kNegInf;
    };
    // Label-aligned deterministic climb start: emission constants at the
    // pooled log mean completion time, staggered descending across states,
    // everything else zero. Every chain then climbs into the same labeling
    // basin (state 1 = highest constant, the relabeling convention); a climb
    // from the raw prior draw picks a state permutation by luck, and a
    // transposed basin cannot be repaired afterwards. The prior draw still
    // decides the start when the panel carries no queries.
    {
      double y_sum = 0.0;
      long y_n = 0;
      for (const auto& a : panel.analysts) {
        for (const auto& period : a.periods) {
          for (const auto& q : period.queries) {
            y_sum += static_cast<double>(q.completion_time);
            ++y_n;
          }
        }
      }
      if (y_n > 0) {
        const double log_mean = std::log(std::max(y_sum / static_cast<double>(y_n), 0.1));
        CommonParams start = CommonParams::zeros(spec);
        for (int s = 0; s < spec.n_states; ++s) {
          start.rho[s][0] = log_mean + (spec.n_states - 1 - 2.0 * s) / 2.0;
        }
        psi_flat = layout.flatten(start);
      }
    }
    double best = objective(psi_flat);
    auto climb = [&] {
    Eigen::VectorXd step = Eigen::VectorXd::Constant(n_psi, 1.0);
    for (int sweep = 0; sweep < 100; ++sweep) {
      const double before = best;
      const Eigen::VectorXd sweep_start = psi_flat;
      for (int j = 0; j < n_psi; ++j) {
        while (step[j] >= 1e-4) {
          double moved_dir = 0.0;
          for (const double dir : {1.0, -1.0}) {
            Eigen::VectorXd cand = psi_flat;
            cand[j] += dir * step[j];
            const double v = objective(cand);
            if (v > best) {
              best = v;
              psi_flat = std::move(cand);
              moved_dir = dir;
              break;
            }
          }
          if (moved_dir == 0.0) {
            step[j] *= 0.5;
            continue;
          }
          for (;;) {  // ride the improving direction
            Eigen::VectorXd cand = psi_flat;
            cand[j] += moved_dir * step[j];
            const double v = objective(cand);
            if (v <= best) break;
            best = v;
            psi_flat = std::move(cand);
          }
          step[j] *= 1.5;
          break;
        }
      }
      // Hooke-Jeeves pattern move: ride the sweep's net displacement, which
      // tracks diagonal ridges that axis-aligned steps cannot follow.
      const Eigen::VectorXd d = psi_flat - sweep_start;
      if (d.squaredNorm() > 0.0) {
        double t = 1.0;
        for (int k = 0; k < 60; ++k) {
          Eigen::VectorXd cand = psi_flat + t * d;
          const double v = objective(cand);
          if (v > best) {
            best = v;
            psi_flat = std::move(cand);
            t *= 2.0;
          } else {
            t *= 0.5;
            if (t < 1e-3) break;
          }
        }
      }
      if (best - before < 1e-3) break;
    }
    };
    climb();
    params = layout.unflatten(psi_flat);
    for (int i = 0; i < n_ind; ++i) {
      seq_ll[i] = sequence_log_likelihood(spec, params, theta[i], flat[i]);
    }
  }

  // --- blocks and adaptation state ---
  auto blocks = detail::psi_blocks(layout, config.psi_blocked);
  std::vector<AdaptState> theta_adapt(
      n_ind, AdaptState(2, config.target_acceptance, config.adapt_decay));
  std::vector<AdaptState> psi_adapt;
  for (const auto& b : blocks) {
    psi_adapt.emplace_back(static_cast<int>(b.second.size()), config.target_acceptance,
                           config.adapt_decay);
  }
  std::vector<Rng> analyst_rng;
  analyst_rng.reserve(n_ind);
  for (int i = 0; i < n_ind; ++i) {
    analyst_rng.push_back(root.substream(0xa0000000ull + static_cast<std::uint64_t>(i)));
  }

  const long freeze_at = config.effective_freeze();
  const long n_retained = (config.n_iterations - config.burn_in) / config.thinning;
  ChainTrace trace;
  trace.spec = spec;
  trace.covariate_names = panel.covariate_names;
  trace.activity_names = panel.activity_names;
  trace.names = layout.names();
  trace.names.push_back("sigma_theta[1,1]");
  trace.names.push_back("sigma_theta[2,1]");
  trace.names.push_back("sigma_theta[2,2]");
  trace.draws.resize(n_retained, static_cast<Eigen::Index>(trace.names.size()));
  trace.log_post.resize(n_retained);
  trace.chain_seed = chain_seed;
  trace.n_iterations = config.n_iterations;
  trace.burn_in = config.burn_in;
  trace.thinning = config.thinning;
  for (std::size_t i : order) trace.analyst_ids.push_back(panel.analysts[i].analyst_id);
  if (config.store_random_effects) trace.theta_draws.resize(n_retained, 2 * n_ind);
  std::vector<Eigen::Vector2d> theta_sum(n_ind, Eigen::Vector2d::Zero());

  std::vector<double> cand_ll(n_ind);
  Eigen::VectorXd psi_prior_cache = psi_flat;  // scratch
  long recorded = 0;

  for (long m = 1; m <= config.n_iterations; ++m) {
    // Step 1: per-analyst random effects, conditionally independent given
    // (Psi, Sigma_Theta); per-analyst RNG substreams keep this deterministic
    // under any worker count.
    const Eigen::Matrix2d sigma_inv = sigma_theta.inverse();
    detail::parallel_for(
        static_cast<std::size_t>(n_ind), config.n_workers, [&](std::size_t i) {
          Eigen::VectorXd cur(2);
          cur << theta[i].zeta, theta[i].eta;
          auto prior_quad = [&](const Eigen::VectorXd& th) {
            return -0.5 * th.dot(sigma_inv * th);
          };
          double cur_lp = prior_quad(cur) + seq_ll[i];
          double cached_cand_ll = 0.0;
          auto lp = [&](const Eigen::VectorXd& th) {
            double ll;
            try {
              ll = sequence_log_likelihood(spec, params, RandomEffects{th[0], th[1]}, flat[i]);
            } catch (const NumericalError&) {
              ll = kNegInf;
            }
            cached_cand_ll = ll;
            return prior_quad(th) + ll;
          };
          if (mh_step(cur, cur_lp, lp, theta_adapt[i], analyst_rng[i])) {
            theta[i] = {cur[0], cur[1]};
            seq_ll[i] = cached_cand_ll;
          }
        });

    // Step 2: conjugate covariance draw.
    sigma_theta = gibbs_sigma_theta(theta, prior, root);

    // Step 3: common parameters, one MH update per block.
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& idx = blocks[b].second;
      Eigen::VectorXd sub(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) sub[j] = psi_flat[idx[j]];
      const Eigen::VectorXd cand_sub = psi_adapt[b].propose(sub, root);
      Eigen::VectorXd cand_flat = psi_flat;
      for (std::size_t j = 0; j < idx.size(); ++j) cand_flat[idx[j]] = cand_sub[j];
      const CommonParams cand_params = layout.unflatten(cand_flat);
      bool finite = true;
      detail::parallel_for(static_cast<std::size_t>(n_ind), config.n_workers,
                           [&](std::size_t i) {
                             try {
                               cand_ll[i] = sequence_log_likelihood(spec, cand_params, theta[i],
                                                                    flat[i]);
                             } catch (const NumericalError&) {
                               cand_ll[i] = kNegInf;
                             }
                           });
      double cand_sum = 0.0, cur_sum = 0.0;
      for (int i = 0; i < n_ind; ++i) {
        cand_sum += cand_ll[i];
        cur_sum += seq_ll[i];
      }
      if (!std::isfinite(cand_sum)) finite = false;
      const double delta = finite
                               ? (cand_sum - cur_sum) -
                                     0.5 * (cand_flat.squaredNorm() - psi_flat.squaredNorm()) /
                                         prior.psi_variance
                               : kNegInf;
      const double accept_prob = delta >= 0.0 ? 1.0 : std::exp(delta);
      const bool accepted = root.uniform() < accept_prob;
      if (accepted) {
        psi_flat = cand_flat;
        params = cand_params;
        seq_ll = cand_ll;
        for (std::size_t j = 0; j < idx.size(); ++j) sub[j] = psi_flat[idx[j]];
      }
      psi_adapt[b].update(accepted, accept_prob, sub);
    }

    if (m == freeze_at) {
      for (auto& a : theta_adapt) a.freeze();
      for (auto& a : psi_adapt) a.freeze();
      trace.lambda_at_freeze.clear();
      for (const auto& a : psi_adapt) trace.lambda_at_freeze.push_back(a.lambda());
    }

    if (m > config.burn_in) {
      for (int i = 0; i < n_ind; ++i) theta_sum[i] += Eigen::Vector2d(theta[i].zeta, theta[i].eta);
      if ((m - config.burn_in) % config.thinning == 0 && recorded < n_retained) {
        for (int j = 0; j < n_psi; ++j) trace.draws(recorded, j) = psi_flat[j];
        trace.draws(recorded, n_psi + 0) = sigma_theta(0, 0);
        trace.draws(recorded, n_psi + 1) = sigma_theta(1, 0);
        trace.draws(recorded, n_psi + 2) = sigma_theta(1, 1);
        double ll_sum = 0.0;
        for (int i = 0; i < n_ind; ++i) ll_sum += seq_ll[i];
        trace.log_post(recorded) =
            ll_sum - 0.5 * psi_flat.squaredNorm() / prior.psi_variance;
        if (config.store_random_effects) {
          for (int i = 0; i < n_ind; ++i) {
            trace.theta_draws(recorded, 2 * i) = theta[i].zeta;
            trace.theta_draws(recorded, 2 * i + 1) = theta[i].eta;
          }
        }
        ++recorded;
      }
    }
  }

  const double denom = static_cast<double>(config.n_iterations - config.burn_in);
  for (int i = 0; i < n_ind; ++i) trace.theta_means.push_back(theta_sum[i] / denom);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    trace.block_names.push_back(blocks[b].first);
    trace.acceptance_rates.push_back(psi_adapt[b].acceptance_rate());
    trace.lambda_final.push_back(psi_adapt[b].lambda());
  }
  {
    // per-analyst blocks summarized as one averaged entry
    double acc = 0.0;
    for (const auto& a : theta_adapt) acc += a.acceptance_rate();
    trace.block_names.push_back("theta (mean over analysts)");
    trace.acceptance_rates.push_back(acc / static_cast<double>(n_ind));
  }
  return trace;
}

/// Independent chains with derived seeds. Chains never share mutable state.
inline std::vector<ChainTrace> run_chains(const PanelData& panel, const ModelSpec& spec,
                                          const PriorSpec& prior, const McmcConfig& config,
                                          bool chains_in_threads = false) {
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < config.n_chains; ++c) {
    seeds.push_back(splitmix64(config.seed ^ splitmix64(0xc4a1ull + static_cast<std::uint64_t>(c))));
  }
  std::vector<ChainTrace> traces(config.n_chains);
  if (chains_in_threads && config.n_chains > 1) {
    std::vector<std::thread> pool;
    for (int c = 0; c < config.n_chains; ++c) {
      pool.emplace_back([&, c] { traces[c] = run_chain(panel, spec, prior, config, seeds[c]); });
    }
    for (auto& t : pool) t.join();
  } else {
    for (int c = 0; c < config.n_chains; ++c) {
      traces[c] = run_chain(panel, spec, prior, config, seeds[c]);
    }
  }
  return traces;
}

}  // namespace panelhmm
