#include <unistd.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "panelhmm/config.hpp"
#include "panelhmm/io.hpp"

using namespace panelhmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("panelhmm-io-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ChainTrace tiny_trace(std::uint64_t seed) {
  const auto spec = ModelSpec::make(2, 2, 2);
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
  Rng rng(seed);
  t.draws.resize(5, static_cast<Eigen::Index>(t.names.size()));
  t.log_post.resize(5);
  for (int r = 0; r < 5; ++r) {
    for (Eigen::Index j = 0; j < t.draws.cols(); ++j) t.draws(r, j) = rng.normal();
    t.log_post[r] = -100.0 * rng.uniform();
  }
  t.draws(0, 0) = 0.1;  // value without an exact short decimal
  t.draws(1, 0) = 1.0 / 3.0;
  t.draws(2, 0) = -1e-17;
  t.chain_seed = 12345;
  t.n_iterations = 20;
  t.burn_in = 10;
  t.thinning = 2;
  return t;
}

}  // namespace

TEST_CASE("format_double round-trips exactly and is shortest") {
  for (double v : {0.1, 1.0 / 3.0, -1e-300, 2.5, 0.0, 1e17, -0.3333333333333333,
                   std::numeric_limits<double>::denorm_min()}) {
    const std::string s = detail::format_double(v);
    REQUIRE(std::strtod(s.c_str(), nullptr) == v);  // stod throws on subnormals
  }
  REQUIRE(detail::format_double(2.5) == "2.5");
  REQUIRE(detail::format_double(0.1) == "0.1");
  REQUIRE(detail::format_double(1.0) == "1");
}

TEST_CASE("csv escaping") {
  REQUIRE(detail::csv_escape("plain") == "plain");
  REQUIRE(detail::csv_escape("a,b") == "\"a,b\"");
  REQUIRE(detail::csv_escape("q\"x") == "\"q\"\"x\"");
}

TEST_CASE("trace files round-trip losslessly") {
  TempDir dir;
  const ChainTrace t = tiny_trace(31);
  const std::string path = dir.file("trace.csv");
  write_trace(t, path, 0xdeadbeefcafef00dull, 1);

  const TraceFile tf = read_trace(path);
  REQUIRE(tf.format == "trace/1");
  REQUIRE(tf.config_hash == "deadbeefcafef00d");
  REQUIRE(tf.chain == 1);
  REQUIRE(tf.chain_seed == 12345);
  REQUIRE(tf.n_iterations == 20);
  REQUIRE(tf.burn_in == 10);
  REQUIRE(tf.thinning == 2);
  REQUIRE(tf.n_states == 2);
  REQUIRE(tf.names == t.names);
  REQUIRE(tf.draws.size() == 5);
  for (int r = 0; r < 5; ++r) {
    for (Eigen::Index j = 0; j < t.draws.cols(); ++j) {
      REQUIRE(tf.draws[r][j] == t.draws(r, j));  // bitwise via shortest round-trip
    }
    REQUIRE(tf.log_post[r] == t.log_post[r]);
  }

  // rewriting the same trace is byte-identical
  const std::string again = dir.file("trace2.csv");
  write_trace(t, again, 0xdeadbeefcafef00dull, 1);
  REQUIRE(slurp(path) == slurp(again));
}

TEST_CASE("trace reader rejects malformed input") {
  TempDir dir;
  {
    std::ofstream out(dir.file("bad_format.csv"));
    out << "# format: trace/99\niteration,a,log_posterior\n11,1,2\n";
  }
  REQUIRE_THROWS_AS(read_trace(dir.file("bad_format.csv")), DataError);
  {
    std::ofstream out(dir.file("bad_header.csv"));
    out << "# format: trace/1\nwrong,a,log_posterior\n";
  }
  REQUIRE_THROWS_AS(read_trace(dir.file("bad_header.csv")), DataError);
  {
    std::ofstream out(dir.file("bad_row.csv"));
    out << "# format: trace/1\niteration,a,log_posterior\n11,1\n";
  }
  REQUIRE_THROWS_AS(read_trace(dir.file("bad_row.csv")), DataError);
  {
    std::ofstream out(dir.file("bad_num.csv"));
    out << "# format: trace/1\niteration,a,log_posterior\n11,zz,2\n";
  }
  REQUIRE_THROWS_AS(read_trace(dir.file("bad_num.csv")), DataError);
  REQUIRE_THROWS_AS(read_trace(dir.file("missing.csv")), DataError);
}

TEST_CASE("config defaults, file loading, and overrides") {
  const RunConfig defaults;
  REQUIRE(defaults.model_n_states == 3);
  REQUIRE(defaults.seed == 1);

  TempDir dir;
  {
    std::ofstream out(dir.file("c.json"));
    out << R"({"seed": 7, "model": {"n_states": 2}, "mcmc": {"n_iterations": 500, "burn_in": 100}})";
  }
  const RunConfig c = load_config(dir.file("c.json"), {"sim.horizon=5", "output.dir=/tmp/x"});
  REQUIRE(c.seed == 7);
  REQUIRE(c.model_n_states == 2);
  REQUIRE(c.mcmc_n_iterations == 500);
  REQUIRE(c.sim_horizon == 5);
  REQUIRE(c.output_dir == "/tmp/x");
  REQUIRE(c.mcmc_burn_in == 100);
  REQUIRE(c.sim_n_analysts == 50);  // untouched default

  REQUIRE_THROWS_AS(load_config(dir.file("c.json"), {"model.bogus=1"}), ConfigError);
  REQUIRE_THROWS_AS(load_config(dir.file("c.json"), {"model.n_states=true"}), ConfigError);
  REQUIRE_THROWS_AS(load_config(dir.file("c.json"), {"no-equals"}), ConfigError);
  REQUIRE_THROWS_AS(load_config(dir.file("absent.json"), {}), ConfigError);
  {
    std::ofstream out(dir.file("bad.json"));
    out << "{nope";
  }
  REQUIRE_THROWS_AS(load_config(dir.file("bad.json"), {}), ConfigError);
  {
    std::ofstream out(dir.file("unknown.json"));
    out << R"({"model": {"n_statez": 3}})";
  }
  REQUIRE_THROWS_AS(load_config(dir.file("unknown.json"), {}), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  const RunConfig a;
  RunConfig b;
  REQUIRE(config_hash(a) == config_hash(b));
  b.seed = 2;
  REQUIRE(config_hash(a) != config_hash(b));
  b = a;
  b.mcmc_n_iterations += 1;
  REQUIRE(config_hash(a) != config_hash(b));
  // canonical dump covers every schema key
  const nlohmann::json dump = config_to_json(a);
  for (const auto& k : detail::config_schema()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    if (dot == std::string::npos) {
      REQUIRE(dump.contains(name));
    } else {
      REQUIRE(dump.at(name.substr(0, dot)).contains(name.substr(dot + 1)));
    }
  }
}

TEST_CASE("derived configs honor the run config") {
  RunConfig c;
  c.model_n_states = 2;
  c.model_initial_distribution = {0.25, 0.75};
  const ModelSpec spec = model_spec_from_config(c);
  REQUIRE(spec.initial_distribution[0] == 0.25);
  c.model_initial_distribution = {0.5, 0.6};
  REQUIRE_THROWS_AS(model_spec_from_config(c), ConfigError);
  c.model_initial_distribution.clear();
  REQUIRE(model_spec_from_config(c).initial_distribution[0] == 0.5);  // uniform default

  RunConfig s;
  s.sim_psi = {1.0};  // wrong length
  REQUIRE_THROWS_AS(sim_config_from_config(s), ConfigError);
  s.sim_psi.clear();
  s.sim_sigma_theta = {1.0, 2.0};
  REQUIRE_THROWS_AS(sim_config_from_config(s), ConfigError);
  s.sim_sigma_theta = {1.0, 0.5, 1.0};
  s.seed = 99;
  const SimConfig sim = sim_config_from_config(s);
  REQUIRE(sim.seed == 99);
  REQUIRE(sim.sigma_theta(0, 1) == 0.5);

  RunConfig m;
  m.mcmc_burn_in = 5000;  // >= n_iterations
  REQUIRE_THROWS_AS(mcmc_config_from_config(m), ConfigError);
  m.mcmc_burn_in = 1500;
  m.mcmc_prior_variance = 0.0;
  REQUIRE_THROWS_AS(prior_spec_from_config(m), ConfigError);

  // every schema key is mentioned in the help text
  const std::string help = config_help_text();
  for (const auto& k : detail::config_schema()) {
    REQUIRE(help.find(k.name) != std::string::npos);
  }
}

TEST_CASE("summary json carries significance, hpd, and fit") {
  PosteriorSummary s;
  ParameterSummary p;
  p.name = "rho[1].constant";
  p.mean = 8.0;
  p.stddev = 0.5;
  p.hpd = HpdInterval{7.0, 9.0};
  p.significant = true;
  p.rhat = 1.001;
  s.parameters.push_back(p);
  p.name = "beta[1].n_written";
  p.mean = 0.01;
  p.hpd = HpdInterval{-0.4, 0.5};
  p.significant = false;
  p.rhat.reset();
  s.parameters.push_back(p);
  s.n_chains = 2;
  s.acceptance_rates = {{"psi", 0.23}};
  FitBlock fit;
  fit.neg2_loglik = 100.0;
  fit.k = 3;
  fit.n = 50;
  std::tie(fit.aic, fit.bic) = information_criteria(fit.neg2_loglik, fit.k, fit.n);
  s.fit = fit;

  const nlohmann::json j = summary_to_json(s, 0xABCull, 42);
  REQUIRE(j.at("format") == "summary/1");
  REQUIRE(j.at("config_hash") == "0000000000000abc");
  REQUIRE(j.at("seed") == 42);
  REQUIRE(j.at("parameters")[0].at("significant") == true);
  REQUIRE(j.at("parameters")[0].at("hpd_lo") == 7.0);
  REQUIRE(j.at("parameters")[0].at("rhat") == 1.001);
  REQUIRE(j.at("parameters")[1].at("significant") == false);
  REQUIRE(!j.at("parameters")[1].contains("rhat"));
  REQUIRE(j.at("fit").at("aic") == 106.0);
}

TEST_CASE("posterior csv layout") {
  TempDir dir;
  StatePosterior sp;
  sp.smoothed.resize(2, 2);
  sp.smoothed << 0.25, 0.75, 1.0, 0.0;
  sp.filtered = sp.smoothed;
  sp.viterbi_path = {2, 1};
  const std::string path = dir.file("post.csv");
  write_posteriors_csv({"a01"}, {sp}, path, 1);
  const std::string text = slurp(path);
  REQUIRE(text.find("analyst_id,t,state,probability\n") != std::string::npos);
  REQUIRE(text.find("a01,1,1,0.25\n") != std::string::npos);
  REQUIRE(text.find("a01,1,2,0.75\n") != std::string::npos);
  REQUIRE(text.find("a01,2,1,1\n") != std::string::npos);
  REQUIRE_THROWS_AS(write_posteriors_csv({"a", "b"}, {sp}, path, 1), ConfigError);
}

TEST_CASE("truth json exposes generating parameters") {
  SimConfig config;
  config.spec = ModelSpec::make(2, 2, 6);
  config.params = CommonParams::zeros(config.spec);
  config.params.rho[0][0] = 3.0;
  config.n_analysts = 2;
  config.horizon = 3;
  config.seed = 5;
  config.sigma_theta << 2.0, 0.5, 0.5, 1.0;
  const SimOutput sim = simulate(config);
  const nlohmann::json j = truth_to_json(sim, config);
  REQUIRE(j.at("format") == "truth/1");
  const ParamLayout layout(config.spec, default_covariate_names(), default_activity_names());
  REQUIRE(j.at("psi_names").size() == static_cast<std::size_t>(layout.size()));
  REQUIRE(j.at("psi").size() == static_cast<std::size_t>(layout.size()));
  const auto names = j.at("psi_names").get<std::vector<std::string>>();
  const auto psi = j.at("psi").get<std::vector<double>>();
  const auto it = std::find(names.begin(), names.end(), "rho[1].constant");
  REQUIRE(it != names.end());
  REQUIRE(psi[it - names.begin()] == 3.0);
  REQUIRE(j.at("sigma_theta") == nlohmann::json({2.0, 0.5, 1.0}));
  REQUIRE(j.at("analysts").size() == 2);
  REQUIRE(j.at("analysts")[0].at("states").size() == 3);
  REQUIRE(j.at("analysts")[0].contains("zeta"));
  REQUIRE(j.at("analysts")[0].contains("eta"));
}
