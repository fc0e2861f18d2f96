#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "panelhmm/mcmc.hpp"
#include "panelhmm/summary.hpp"

using namespace panelhmm;

TEST_CASE("config validation") {
  McmcConfig c;
  c.n_iterations = 100;
  c.burn_in = 50;
  REQUIRE_NOTHROW(c.check());
  c.burn_in = 100;
  REQUIRE_THROWS_AS(c.check(), ConfigError);
  c.burn_in = 50;
  c.adapt_decay = 0.5;
  REQUIRE_THROWS_AS(c.check(), ConfigError);
  c.adapt_decay = 0.6;
  c.thinning = 0;
  REQUIRE_THROWS_AS(c.check(), ConfigError);

  PriorSpec prior;
  REQUIRE(prior.iw_dof(10) == 17.0);  // N_theta + 5 + N_ind
  prior.psi_variance = -1.0;
  REQUIRE_THROWS_AS(prior.check(), ConfigError);
}

TEST_CASE("gibbs sigma_theta matches the inverse-wishart mean") {
  // all Theta_i = 0, N_ind = 10: posterior = IW(17, I); mean = I/14
  std::vector<RandomEffects> re(10);
  PriorSpec prior;
  Rng rng(2024);
  const int n = 100000;
  Eigen::Matrix2d mean = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix2d draw = gibbs_sigma_theta(re, prior, rng);
    REQUIRE(draw(0, 1) == draw(1, 0));
    REQUIRE(draw(0, 0) > 0.0);
    REQUIRE(draw.determinant() > 0.0);
    mean += draw;
    m2 += draw.cwiseProduct(draw);
  }
  mean /= n;
  m2 /= n;
  const Eigen::Matrix2d expected = Eigen::Matrix2d::Identity() / 14.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double var = m2(a, b) - mean(a, b) * mean(a, b);
      const double se = std::sqrt(var / n);
      INFO("entry (" << a << "," << b << "): " << mean(a, b) << " vs " << expected(a, b));
      REQUIRE(std::abs(mean(a, b) - expected(a, b)) < 3.0 * se);
    }
  }
  re[0].zeta = std::nan("");
  REQUIRE_THROWS_AS(gibbs_sigma_theta(re, prior, rng), NumericalError);
}

TEST_CASE("metropolis acceptance rule frequencies") {
  Rng rng(99);
  AdaptState adapt(1);
  adapt.freeze();

  // delta = 0: same-value candidate always accepted
  {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    double lp = 0.0;
    const bool acc = mh_step(x, lp, [](const Eigen::VectorXd&) { return 0.0; }, adapt, rng);
    REQUIRE(acc);
  }
  // delta = -inf: never accepted
  {
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
      double lp = 0.0;
      REQUIRE(!mh_step(x, lp, [](const Eigen::VectorXd&) { return kNegInf; }, adapt, rng));
      REQUIRE(x[0] == 0.0);
      REQUIRE(lp == 0.0);
    }
  }
  // delta = log 0.5: accept frequency ~ 0.5 over 1e5 trials (3 sigma binomial)
  {
    long accepted = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
      double lp = 0.0;
      if (mh_step(x, lp, [](const Eigen::VectorXd&) { return std::log(0.5); }, adapt, rng)) {
        ++accepted;
      }
    }
    const double freq = static_cast<double>(accepted) / n;
    REQUIRE(std::abs(freq - 0.5) < 3.0 * std::sqrt(0.25 / n));
  }
}

TEST_CASE("adaptation tunes toward the target and freezes immutably") {
  // target a 1-d standard normal; Robbins-Monro should land acceptance in range
  Rng rng(7);
  AdaptState adapt(1, 0.234, 0.6);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  double lp = 0.0;
  auto log_post = [](const Eigen::VectorXd& v) { return -0.5 * v.squaredNorm(); };
  for (int i = 0; i < 20000; ++i) mh_step(x, lp, log_post, adapt, rng);
  const double lambda_frozen = adapt.lambda();
  adapt.freeze();
  long accepted = 0;
  const int n_post = 20000;
  for (int i = 0; i < n_post; ++i) {
    if (mh_step(x, lp, log_post, adapt, rng)) ++accepted;
  }
  REQUIRE(adapt.lambda() == lambda_frozen);  // immutable once frozen
  const double rate = static_cast<double>(accepted) / n_post;
  REQUIRE(rate > 0.15);
  REQUIRE(rate < 0.40);
  REQUIRE(adapt.acceptance_rate() == Catch::Approx(rate));
}

TEST_CASE("frozen chain reproduces bivariate normal moments") {
  // tractable toy posterior: N(mu, C) with correlation 0.6
  Eigen::Vector2d mu(1.0, -2.0);
  Eigen::Matrix2d cov;
  cov << 1.0, 0.6, 0.6, 1.0;
  const Eigen::Matrix2d prec = cov.inverse();
  auto log_post = [&](const Eigen::VectorXd& v) {
    const Eigen::Vector2d d = v - mu;
    return -0.5 * d.dot(prec * d);
  };
  Rng rng(41);
  AdaptState adapt(2, 0.234, 0.6);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  double lp = log_post(x);
  for (int i = 0; i < 30000; ++i) mh_step(x, lp, log_post, adapt, rng);
  adapt.freeze();
  const long n = 400000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sum2 = Eigen::Matrix2d::Zero();
  for (long i = 0; i < n; ++i) {
    mh_step(x, lp, log_post, adapt, rng);
    sum += x;
    sum2 += x * x.transpose();
  }
  const Eigen::Vector2d mean = sum / static_cast<double>(n);
  const Eigen::Matrix2d second = sum2 / static_cast<double>(n) - mean * mean.transpose();
  // autocorrelated chain: allow a generous effective-sample-size deflation
  const double ess = static_cast<double>(n) / 60.0;
  for (int j = 0; j < 2; ++j) {
    REQUIRE(std::abs(mean[j] - mu[j]) < 3.0 / std::sqrt(ess));
    REQUIRE(std::abs(second(j, j) - 1.0) < 3.0 * std::sqrt(2.0 / ess));
  }
  REQUIRE(std::abs(second(0, 1) - 0.6) < 3.0 * std::sqrt(2.0 / ess));
}

TEST_CASE("flat-prior limit: posterior differences become likelihood differences") {
  Rng rng(55);
  const auto spec = ModelSpec::make(2, 2, 3);
  AnalystSeries series = testing::random_series(spec, rng, 4, 2.0);
  PanelData panel = testing::single_analyst_panel(spec, std::move(series));
  const std::vector<RandomEffects> re = {{0.1, -0.2}};
  const CommonParams p1 = testing::random_params(spec, rng);
  const CommonParams p2 = testing::random_params(spec, rng);
  PriorSpec flat;
  flat.psi_variance = 1e6;
  const double post_delta = log_posterior_common(p1, spec, re, panel, flat) -
                            log_posterior_common(p2, spec, re, panel, flat);
  const double lik_delta = full_log_likelihood(spec, p1, re, panel) -
                           full_log_likelihood(spec, p2, re, panel);
  REQUIRE(post_delta == Catch::Approx(lik_delta).margin(1e-6));
}

TEST_CASE("run_chain output shapes, determinism, and bookkeeping") {
  Rng rng(61);
  const auto spec = ModelSpec::make(2, 2, 3);
  PanelData panel;
  panel.horizon = 5;
  panel.covariate_names = {"constant", "x1", "x2"};
  panel.activity_names = {"w", "v"};
  for (int i = 0; i < 4; ++i) {
    AnalystSeries a = testing::random_series(spec, rng, 5, 1.5);
    a.analyst_id = "r" + std::to_string(i + 1);
    panel.analysts.push_back(std::move(a));
  }
  McmcConfig config;
  config.n_iterations = 300;
  config.burn_in = 200;
  config.thinning = 2;
  config.n_chains = 2;
  config.seed = 9;
  config.store_random_effects = true;

  const ChainTrace t1 = run_chain(panel, spec, PriorSpec{}, config, 777);
  REQUIRE(t1.retained() == 50);
  const ParamLayout layout(spec, panel.covariate_names, panel.activity_names);
  REQUIRE(static_cast<int>(t1.names.size()) == layout.size() + 3);
  REQUIRE(t1.names.back() == "sigma_theta[2,2]");
  REQUIRE(t1.theta_means.size() == 4);
  REQUIRE(t1.theta_draws.rows() == 50);
  REQUIRE(t1.theta_draws.cols() == 8);
  REQUIRE(t1.draws.allFinite());
  for (double rate : t1.acceptance_rates) {
    REQUIRE(rate >= 0.0);
    REQUIRE(rate <= 1.0);
  }
  // sigma_theta draws stay SPD
  for (Eigen::Index r = 0; r < t1.draws.rows(); ++r) {
    const double v1 = t1.draws(r, layout.size());
    const double cv = t1.draws(r, layout.size() + 1);
    const double v2 = t1.draws(r, layout.size() + 2);
    REQUIRE(v1 > 0.0);
    REQUIRE(v2 > 0.0);
    REQUIRE(v1 * v2 - cv * cv > 0.0);
  }

  const ChainTrace t2 = run_chain(panel, spec, PriorSpec{}, config, 777);
  REQUIRE(t1.draws == t2.draws);  // bitwise determinism
  const ChainTrace t3 = run_chain(panel, spec, PriorSpec{}, config, 778);
  REQUIRE(t1.draws != t3.draws);

  // per-analyst updates are worker-count invariant
  McmcConfig threaded = config;
  threaded.n_workers = 3;
  const ChainTrace t4 = run_chain(panel, spec, PriorSpec{}, threaded, 777);
  REQUIRE(t1.draws == t4.draws);

  // chains derive distinct seeds
  const auto traces = run_chains(panel, spec, PriorSpec{}, config);
  REQUIRE(traces.size() == 2);
  REQUIRE(traces[0].chain_seed != traces[1].chain_seed);
  REQUIRE(traces[0].draws != traces[1].draws);

  REQUIRE_THROWS_AS(run_chain(PanelData{}, spec, PriorSpec{}, config, 1), DataError);
}

TEST_CASE("blocked psi proposal covers every index exactly once") {
  const auto spec = ModelSpec::make(3, 2, 6);
  const ParamLayout layout(spec, default_covariate_names(), default_activity_names());
  const auto blocks = detail::psi_blocks(layout, true);
  REQUIRE(blocks.size() == 6);  // thresholds, beta, rho x3, log_delta
  std::vector<int> seen(layout.size(), 0);
  for (const auto& [name, idx] : blocks) {
    for (int i : idx) ++seen[i];
  }
  for (int c : seen) REQUIRE(c == 1);
  const auto joint = detail::psi_blocks(layout, false);
  REQUIRE(joint.size() == 1);
  REQUIRE(static_cast<int>(joint[0].second.size()) == layout.size());
}

TEST_CASE("prior recovery on a zero-information panel") {
  // no queries anywhere and a single state: the emission block has no
  // likelihood, so the psi posterior is exactly the prior N(0, 30I).
  const auto spec = ModelSpec::make(1, 2, 6);
  const PanelData panel = testing::empty_panel(spec, 10, 5);
  McmcConfig config;
  config.n_iterations = 60000;
  config.burn_in = 10000;
  config.n_chains = 1;
  config.seed = 17;
  const ChainTrace trace = run_chain(panel, spec, PriorSpec{}, config, 4242);
  const ParamLayout layout(spec, panel.covariate_names, panel.activity_names);
  for (int j = 0; j < layout.size(); ++j) {
    const Eigen::VectorXd col = trace.draws.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (col.size() - 1));
    INFO(trace.names[j] << ": sd " << sd);
    REQUIRE(sd > std::sqrt(30.0) * 0.9);
    REQUIRE(sd < std::sqrt(30.0) * 1.1);
  }
}

TEST_CASE("relabeling: reversed chains pool consistently") {
  // construct a symmetric two-chain situation by manually reversing one trace
  Rng rng(71);
  const auto spec = ModelSpec::make(3, 2, 3);
  const std::vector<std::string> cov = {"constant", "x1", "x2"};
  const std::vector<std::string> act = {"w", "v"};
  const ParamLayout layout(spec, cov, act);

  ChainTrace a;
  a.spec = spec;
  a.covariate_names = cov;
  a.activity_names = act;
  a.names = layout.names();
  a.names.push_back("sigma_theta[1,1]");
  a.names.push_back("sigma_theta[2,1]");
  a.names.push_back("sigma_theta[2,2]");
  a.draws.resize(40, static_cast<Eigen::Index>(a.names.size()));
  a.log_post.resize(40);
  for (int r = 0; r < 40; ++r) {
    CommonParams p = testing::random_params(spec, rng, 0.2);
    p.rho[0][0] = 5.0 + 0.01 * rng.normal();  // descending intercepts: correctly labeled
    p.rho[1][0] = 3.0 + 0.01 * rng.normal();
    p.rho[2][0] = 1.0 + 0.01 * rng.normal();
    a.draws.row(r).head(layout.size()) = layout.flatten(p);
    a.draws(r, layout.size()) = 1.0;
    a.draws(r, layout.size() + 1) = 0.3;
    a.draws(r, layout.size() + 2) = 1.0;
    a.log_post[r] = 0.0;
  }
  a.theta_means.assign(2, Eigen::Vector2d(0.5, -0.5));
  a.analyst_ids = {"a1", "a2"};
  a.n_iterations = 80;
  a.burn_in = 40;

  ChainTrace b = a;  // same posterior, reversed labels
  for (int r = 0; r < 40; ++r) {
    const CommonParams p = layout.unflatten(a.draws.row(r).head(layout.size()));
    b.draws.row(r).head(layout.size()) = layout.flatten(reverse_states(p, spec));
    b.draws(r, layout.size() + 1) = -0.3;
  }
  for (auto& tm : b.theta_means) tm[0] = -tm[0];

  REQUIRE(!chain_needs_reversal(a));
  REQUIRE(chain_needs_reversal(b));
  std::vector<ChainTrace> traces = {a, b};
  relabel_chains(traces);
  REQUIRE((traces[0].draws - traces[1].draws).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE(traces[1].theta_means[0][0] == Catch::Approx(0.5));

  const PosteriorSummary summary = summarize(traces);
  const auto& first_intercept = summary.parameters[layout.rho_constant_index(1)];
  REQUIRE(first_intercept.mean == Catch::Approx(5.0).margin(0.1));
  REQUIRE(first_intercept.rhat);
  REQUIRE(*first_intercept.rhat < 1.05);
}

TEST_CASE("summarize flags significance iff the HPD excludes zero") {
  const auto spec = ModelSpec::make(1, 2, 2);
  const std::vector<std::string> cov = {"constant", "x1"};
  const std::vector<std::string> act = {"w", "v"};
  const ParamLayout layout(spec, cov, act);
  ChainTrace t;
  t.spec = spec;
  t.covariate_names = cov;
  t.activity_names = act;
  t.names = layout.names();
  t.names.push_back("sigma_theta[1,1]");
  t.names.push_back("sigma_theta[2,1]");
  t.names.push_back("sigma_theta[2,2]");
  const int n = 500;
  t.draws.resize(n, static_cast<Eigen::Index>(t.names.size()));
  t.log_post = Eigen::VectorXd::Zero(n);
  Rng rng(83);
  for (int r = 0; r < n; ++r) {
    t.draws(r, 0) = 5.0 + rng.normal();   // far from zero: significant
    t.draws(r, 1) = 0.1 * rng.normal();   // straddles zero: not significant
    t.draws(r, 2) = -4.0 + rng.normal();  // negative significant
    t.draws(r, 3) = 1.0;
    t.draws(r, 4) = 0.0;
    t.draws(r, 5) = 1.0;
  }
  const PosteriorSummary summary = summarize({t});
  REQUIRE(summary.parameters[0].significant);
  REQUIRE(summary.parameters[0].hpd->lo > 0.0);
  REQUIRE(!summary.parameters[1].significant);
  REQUIRE(summary.parameters[1].hpd->lo < 0.0);
  REQUIRE(summary.parameters[1].hpd->hi > 0.0);
  REQUIRE(summary.parameters[2].significant);
  REQUIRE(summary.parameters[2].hpd->hi < 0.0);
  for (const auto& p : summary.parameters) {
    const bool excludes = p.hpd && (p.hpd->lo > 0.0 || p.hpd->hi < 0.0);
    REQUIRE(p.significant == excludes);
  }
}
