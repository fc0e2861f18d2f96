// panelhmm command-line driver: ingest | simulate | fit | baseline | compare
// | decode | diagnose, all driven by one JSON config plus --set overrides.
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "panelhmm/baseline.hpp"
#include "panelhmm/config.hpp"
#include "panelhmm/decode.hpp"
#include "panelhmm/diagnostics.hpp"
#include "panelhmm/ingest.hpp"
#include "panelhmm/io.hpp"
#include "panelhmm/mcmc.hpp"
#include "panelhmm/report.hpp"
#include "panelhmm/simulate.hpp"
#include "panelhmm/summary.hpp"

namespace {

using namespace panelhmm;

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

PanelData load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("panel file " + path + " is not valid JSON");
  return panel_from_json(j);
}

std::string out_path(const RunConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.output_dir);
  return (std::filesystem::path(config.output_dir) / name).string();
}

int cmd_ingest(const RunConfig& config) {
  if (config.ingest_queries_csv.empty()) throw ConfigError("ingest.queries_csv is required");
  IngestConfig ic;
  ic.queries_csv = config.ingest_queries_csv;
  ic.views_csv = config.ingest_views_csv;
  ic.period_months = config.ingest_period_months;
  ic.shift_by_one = config.ingest_shift_by_one;
  ic.winsorize_cap = config.ingest_winsorize_cap;
  ic.zscore = config.ingest_zscore;
  PanelData panel = ingest_events(ic);
  const auto problems = validate_panel(panel);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "invalid: " << p << "\n";
    throw DataError("ingested panel failed validation (" + std::to_string(problems.size()) +
                    " problems)");
  }
  panel.metadata["config_hash"] = hash_hex(config_hash(config));
  panel.metadata["seed"] = config.seed;
  const std::string path = out_path(config, "panel.json");
  write_text(path, panel_to_json(panel).dump(2) + "\n");
  std::cout << "wrote " << path << " (" << panel.analysts.size() << " analysts, T="
            << panel.horizon << ", " << panel.total_queries() << " queries)\n";
  return 0;
}

int cmd_simulate(const RunConfig& config) {
  const SimConfig sim_config = sim_config_from_config(config);
  SimOutput sim = simulate(sim_config);
  sim.panel.metadata["config_hash"] = hash_hex(config_hash(config));
  sim.panel.metadata["seed"] = config.seed;
  const std::string panel_path = out_path(config, "panel.json");
  write_text(panel_path, panel_to_json(sim.panel).dump(2) + "\n");
  nlohmann::json truth = truth_to_json(sim, sim_config);
  truth["config_hash"] = hash_hex(config_hash(config));
  truth["seed"] = config.seed;
  const std::string truth_path = out_path(config, "truth.json");
  write_text(truth_path, truth.dump(2) + "\n");
  std::cout << "wrote " << panel_path << " and " << truth_path << "\n";
  return 0;
}

int cmd_fit(const RunConfig& config, const std::string& panel_path) {
  const PanelData panel = load_panel(panel_path);
  const ModelSpec spec = model_spec_from_config(config);
  const PriorSpec prior = prior_spec_from_config(config);
  const McmcConfig mcmc = mcmc_config_from_config(config);
  const std::uint64_t hash = config_hash(config);

  std::vector<ChainTrace> traces = run_chains(panel, spec, prior, mcmc);
  for (std::size_t c = 0; c < traces.size(); ++c) {
    const std::string path =
        out_path(config, "trace_chain" + std::to_string(c + 1) + ".csv");
    write_trace(traces[c], path, hash, static_cast<int>(c + 1));
    std::cout << "wrote " << path << "\n";
  }

  relabel_chains(traces);  // so the exported point estimates match the summary
  PosteriorSummary summary = summarize(traces, &panel);
  nlohmann::json sj = summary_to_json(summary, hash, config.seed);
  {
    const ParamLayout layout(spec, panel.covariate_names, panel.activity_names);
    nlohmann::json psi_mean = nlohmann::json::array();
    for (int j = 0; j < layout.size(); ++j) psi_mean.push_back(summary.parameters[j].mean);
    sj["psi_mean"] = std::move(psi_mean);
    sj["n_states"] = spec.n_states;
    nlohmann::json theta = nlohmann::json::array();
    for (std::size_t i = 0; i < traces[0].analyst_ids.size(); ++i) {
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for (const auto& t : traces) acc += t.theta_means[i];
      acc /= static_cast<double>(traces.size());
      theta.push_back({{"analyst_id", traces[0].analyst_ids[i]},
                       {"zeta", acc[0]},
                       {"eta", acc[1]}});
    }
    sj["theta_means"] = std::move(theta);
  }
  const std::string summary_path = out_path(config, "summary.json");
  write_text(summary_path, sj.dump(2) + "\n");
  const std::string report_path = out_path(config, "report.txt");
  write_text(report_path, "# config_hash: " + hash_hex(hash) + "\n# seed: " +
                              std::to_string(config.seed) + "\n\n" + render_report(summary));
  std::cout << "wrote " << summary_path << " and " << report_path << "\n";
  return 0;
}

int cmd_baseline(const RunConfig& config, const std::string& panel_path) {
  const PanelData panel = load_panel(panel_path);
  StaticDesign design;
  design.covariates = config.baseline_covariates;
  design.activities = config.baseline_activities;
  const StaticModelFit fit = fit_static(panel, design);

  std::ostringstream report;
  report << "One-state negative binomial fit (" << (fit.converged ? "converged" : "NOT converged")
         << ", " << fit.iterations << " iterations, grad max-norm " << fit.grad_max_norm << ")\n";
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    report << "  " << fit.coefficient_names[j] << " = " << fit.coefficients[j] << " (se "
           << fit.std_errors[j] << ")\n";
  }
  report << "  log_delta = " << fit.log_dispersion << " (se "
         << fit.std_errors[fit.std_errors.size() - 1] << ")\n";
  report << "  -2logL = " << std::fixed << fit.neg2_loglik << "  AIC = " << fit.aic
         << "  BIC = " << fit.bic << "  (k = " << fit.k << ", n = " << fit.n << ")\n";
  std::cout << report.str();

  nlohmann::json j = {{"format", "baselinefit/1"},
                      {"config_hash", hash_hex(config_hash(config))},
                      {"seed", config.seed},
                      {"name", "one-state"},
                      {"neg2_loglik", fit.neg2_loglik},
                      {"k", fit.k},
                      {"n", fit.n},
                      {"aic", fit.aic},
                      {"bic", fit.bic},
                      {"converged", fit.converged},
                      {"log_dispersion", fit.log_dispersion}};
  nlohmann::json coeffs = nlohmann::json::object();
  for (Eigen::Index c = 0; c < fit.coefficients.size(); ++c) {
    coeffs[fit.coefficient_names[c]] = {{"estimate", fit.coefficients[c]},
                                        {"se", fit.std_errors[c]}};
  }
  j["coefficients"] = std::move(coeffs);
  const std::string path = out_path(config, "baseline.json");
  write_text(path, j.dump(2) + "\n");
  std::cout << "wrote " << path << "\n";
  if (!fit.converged) throw NumericalError("baseline fit did not converge");
  return 0;
}

ModelComparisonRow comparison_row_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fit file " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("fit file " + path + " is not valid JSON");
  ModelComparisonRow row;
  if (j.contains("fit")) {  // summary.json from cmd_fit
    row.name = std::to_string(j.value("n_states", 0)) + "-state";
    row.neg2_loglik = j.at("fit").at("neg2_loglik").get<double>();
    row.k = j.at("fit").at("k").get<long>();
    row.n = j.at("fit").at("n").get<long>();
  } else if (j.value("format", "") == "baselinefit/1") {
    row.name = j.at("name").get<std::string>();
    row.neg2_loglik = j.at("neg2_loglik").get<double>();
    row.k = j.at("k").get<long>();
    row.n = j.at("n").get<long>();
  } else {
    throw DataError("fit file " + path + " has no recognizable fit block");
  }
  return row;
}

int cmd_compare(const RunConfig& config, const std::vector<std::string>& fit_files) {
  if (fit_files.size() < 2) throw ConfigError("compare: need at least two fit files");
  std::vector<ModelComparisonRow> rows;
  for (const auto& f : fit_files) rows.push_back(comparison_row_from_file(f));
  const auto sorted = compare_models(rows);

  std::ostringstream text, csv;
  std::size_t name_w = 5;
  for (const auto& r : sorted) name_w = std::max(name_w, r.name.size());
  text << detail::pad("model", name_w) << "  " << detail::pad("-2logL", 16)
       << detail::pad("AIC", 16) << detail::pad("BIC", 16) << "k\n";
  csv << "model,neg2_loglik,aic,bic,k,n\n";
  for (const auto& r : sorted) {
    text << detail::pad(r.name, name_w) << "  " << detail::pad(detail::fixed3(r.neg2_loglik), 16)
         << detail::pad(detail::fixed3(r.aic), 16) << detail::pad(detail::fixed3(r.bic), 16)
         << r.k << "\n";
    csv << r.name << "," << detail::format_double(r.neg2_loglik) << ","
        << detail::format_double(r.aic) << "," << detail::format_double(r.bic) << "," << r.k
        << "," << r.n << "\n";
  }
  std::cout << text.str();
  const std::string path = out_path(config, "comparison.csv");
  write_text(path, csv.str());
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_decode(const RunConfig& config, const std::string& panel_path,
               const std::string& summary_path) {
  const PanelData panel = load_panel(panel_path);
  std::ifstream in(summary_path);
  if (!in) throw DataError("cannot open summary file " + summary_path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("summary file " + summary_path + " is not valid JSON");
  if (!j.contains("psi_mean") || !j.contains("theta_means")) {
    throw DataError("summary file lacks psi_mean/theta_means (produced by an older fit?)");
  }
  ModelSpec spec = model_spec_from_config(config);
  spec.n_states = j.value("n_states", spec.n_states);
  spec.initial_distribution =
      Eigen::VectorXd::Constant(spec.n_states, 1.0 / static_cast<double>(spec.n_states));
  const ParamLayout layout(spec, panel.covariate_names, panel.activity_names);
  const auto psi_vec = j.at("psi_mean").get<std::vector<double>>();
  if (static_cast<int>(psi_vec.size()) != layout.size()) {
    throw DataError("decode: psi_mean length does not match the model spec");
  }
  const CommonParams params = layout.unflatten(Eigen::Map<const Eigen::VectorXd>(
      psi_vec.data(), static_cast<Eigen::Index>(psi_vec.size())));
  std::map<std::string, RandomEffects> re_by_id;
  for (const auto& t : j.at("theta_means")) {
    re_by_id[t.at("analyst_id").get<std::string>()] = {t.at("zeta").get<double>(),
                                                       t.at("eta").get<double>()};
  }

  std::vector<std::string> ids;
  std::vector<StatePosterior> posteriors;
  for (const auto& a : panel.analysts) {
    auto it = re_by_id.find(a.analyst_id);
    if (it == re_by_id.end()) {
      throw DataError("decode: analyst " + a.analyst_id + " missing from summary");
    }
    ids.push_back(a.analyst_id);
    posteriors.push_back(smooth_states(spec, params, it->second, a.periods));
  }

  const std::uint64_t hash = config_hash(config);
  const std::string csv_path = out_path(config, "posteriors.csv");
  write_posteriors_csv(ids, posteriors, csv_path, hash);

  PosteriorSummary summary;
  summary.n_chains = j.value("n_chains", 0);
  for (const auto& p : j.at("parameters")) {
    ParameterSummary ps;
    ps.name = p.at("name").get<std::string>();
    ps.mean = p.at("mean").get<double>();
    ps.stddev = p.at("std").get<double>();
    if (p.contains("hpd_lo")) {
      ps.hpd = HpdInterval{p.at("hpd_lo").get<double>(), p.at("hpd_hi").get<double>(), false};
    }
    ps.significant = p.value("significant", false);
    if (p.contains("rhat")) ps.rhat = p.at("rhat").get<double>();
    summary.parameters.push_back(std::move(ps));
  }
  const std::string report_path = out_path(config, "decode_report.txt");
  write_text(report_path, "# config_hash: " + hash_hex(hash) + "\n\n" +
                              render_report(summary, posteriors));
  std::cout << "wrote " << csv_path << " and " << report_path << "\n";
  return 0;
}

int cmd_diagnose(const std::vector<std::string>& trace_files) {
  if (trace_files.empty()) throw ConfigError("diagnose: need at least one trace file");
  std::vector<TraceFile> traces;
  for (const auto& f : trace_files) traces.push_back(read_trace(f));
  for (const auto& t : traces) {
    if (t.format != traces[0].format || t.config_hash != traces[0].config_hash) {
      throw DataError("diagnose: trace files have mismatched format or config hash");
    }
    if (t.names != traces[0].names) {
      throw DataError("diagnose: trace files have mismatched parameters");
    }
  }
  std::size_t min_rows = traces[0].draws.size();
  for (const auto& t : traces) min_rows = std::min(min_rows, t.draws.size());

  std::cout << "chains: " << traces.size() << ", retained draws per chain: " << min_rows << "\n";
  if (traces.size() >= 2 && min_rows >= 10) {
    std::size_t name_w = 9;
    for (const auto& n : traces[0].names) name_w = std::max(name_w, n.size());
    std::cout << detail::pad("parameter", name_w) << "  rhat\n";
    double worst = 0.0;
    for (std::size_t p = 0; p < traces[0].names.size(); ++p) {
      std::vector<Eigen::VectorXd> chains;
      for (const auto& t : traces) {
        Eigen::VectorXd col(static_cast<Eigen::Index>(min_rows));
        for (std::size_t r = 0; r < min_rows; ++r) col[static_cast<Eigen::Index>(r)] = t.draws[r][static_cast<Eigen::Index>(p)];
        chains.push_back(std::move(col));
      }
      const auto rhat = gelman_rubin(chains);
      if (rhat) {
        worst = std::max(worst, *rhat);
        std::cout << detail::pad(traces[0].names[p], name_w) << "  " << detail::fixed3(*rhat)
                  << "\n";
      }
    }
    std::cout << "max rhat: " << detail::fixed3(worst) << (worst < 1.1 ? " (< 1.1)" : " (>= 1.1)")
              << "\n";
  } else {
    std::cout << "rhat requires >= 2 chains with >= 10 retained draws each\n";
  }
  for (std::size_t c = 0; c < traces.size(); ++c) {
    double mean_lp = 0.0;
    for (double lp : traces[c].log_post) mean_lp += lp;
    if (!traces[c].log_post.empty()) mean_lp /= static_cast<double>(traces[c].log_post.size());
    std::cout << "chain " << (c + 1) << ": seed " << traces[c].chain_seed << ", mean log posterior "
              << detail::fixed3(mean_lp) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panelhmm: nonhomogeneous hidden Markov panel model of analyst learning"};
  app.require_subcommand(1);
  app.footer(panelhmm::config_help_text());

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "override a config key, e.g. --set mcmc.n_chains=4");

  std::string panel_path = "panel.json";
  std::string summary_path = "summary.json";
  std::vector<std::string> input_files;

  auto* ingest = app.add_subcommand("ingest", "build a panel from query/view event CSVs");
  auto* simulate = app.add_subcommand("simulate", "sample a synthetic panel from the model");
  auto* fit = app.add_subcommand("fit", "run the MCMC sampler on a panel");
  fit->add_option("--panel", panel_path, "panel/1 JSON file");
  auto* baseline = app.add_subcommand("baseline", "fit the one-state NB regression benchmark");
  baseline->add_option("--panel", panel_path, "panel/1 JSON file");
  auto* compare = app.add_subcommand("compare", "rank fit files by information criteria");
  compare->add_option("files", input_files, "fit JSON files (summary.json / baseline.json)");
  auto* decode = app.add_subcommand("decode", "state probabilities and Viterbi paths");
  decode->add_option("--panel", panel_path, "panel/1 JSON file");
  decode->add_option("--summary", summary_path, "summary JSON from fit");
  auto* diagnose = app.add_subcommand("diagnose", "convergence report from trace files");
  diagnose->add_option("files", input_files, "trace/1 CSV files");
  for (auto* sub : {ingest, simulate, fit, baseline, compare, decode, diagnose}) {
    sub->fallthrough();  // accept --config/--set after the subcommand too
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const panelhmm::RunConfig config = panelhmm::load_config(config_path, overrides);
    if (ingest->parsed()) return cmd_ingest(config);
    if (simulate->parsed()) return cmd_simulate(config);
    if (fit->parsed()) return cmd_fit(config, panel_path);
    if (baseline->parsed()) return cmd_baseline(config, panel_path);
    if (compare->parsed()) return cmd_compare(config, input_files);
    if (decode->parsed()) return cmd_decode(config, panel_path, summary_path);
    if (diagnose->parsed()) return cmd_diagnose(input_files);
  } catch (const panelhmm::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const panelhmm::DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 3;
  } catch (const panelhmm::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
