#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "panelhmm/panel.hpp"

using namespace panelhmm;

namespace {

PanelData small_valid_panel() {
  PanelData panel;
  panel.horizon = 2;
  panel.covariate_names = default_covariate_names();
  panel.activity_names = default_activity_names();
  AnalystSeries a;
  a.analyst_id = "a1";
  for (int t = 1; t <= 2; ++t) {
    PeriodObservation p;
    p.period_index = t;
    p.activities = Eigen::VectorXd::Zero(2);
    if (t == 1) {
      p.activities << 1.0, 2.0;
      QueryObservation q;
      q.query_id = "a1-q1";
      q.completion_time = 42;
      q.covariates = Eigen::VectorXd(6);
      q.covariates << 1.0, 1.5, 3.0, 0.0, 1.0, 4.0;
      p.queries.push_back(std::move(q));
    }
    a.periods.push_back(std::move(p));
  }
  panel.analysts.push_back(std::move(a));
  return panel;
}

}  // namespace

TEST_CASE("validate_panel accepts a well-formed panel") {
  REQUIRE(validate_panel(small_valid_panel()).empty());
}

TEST_CASE("validate_panel reports each violation") {
  auto panel = small_valid_panel();
  panel.analysts[0].periods[1].period_index = 7;
  panel.analysts[0].periods[0].queries[0].completion_time = -3;
  panel.analysts[0].periods[0].queries[0].covariates[0] = 2.0;
  panel.analysts[0].periods[0].activities[1] = -1.0;
  const auto problems = validate_panel(panel);
  REQUIRE(problems.size() == 4);

  auto missing = small_valid_panel();
  missing.analysts[0].periods.pop_back();
  REQUIRE(validate_panel(missing).size() == 1);

  auto empty = small_valid_panel();
  empty.analysts[0].periods[0].queries.clear();
  const auto no_queries = validate_panel(empty);
  REQUIRE(no_queries.size() == 1);
  REQUIRE(no_queries[0].find("no queries") != std::string::npos);
}

TEST_CASE("panel json round trip is lossless") {
  const auto panel = small_valid_panel();
  const auto j = panel_to_json(panel);
  REQUIRE(j.at("version") == "panel/1");
  const PanelData back = panel_from_json(j);
  REQUIRE(back.horizon == panel.horizon);
  REQUIRE(back.covariate_names == panel.covariate_names);
  REQUIRE(back.analysts.size() == 1);
  REQUIRE(back.analysts[0].analyst_id == "a1");
  REQUIRE(back.analysts[0].periods[0].queries[0].completion_time == 42);
  REQUIRE((back.analysts[0].periods[0].queries[0].covariates -
           panel.analysts[0].periods[0].queries[0].covariates)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  REQUIRE(back.analysts[0].periods[0].activities[1] == 2.0);
  // byte-stable serialization
  REQUIRE(panel_to_json(back).dump() == j.dump());
}

TEST_CASE("panel json version gate") {
  auto j = panel_to_json(small_valid_panel());
  j["version"] = "panel/9";
  REQUIRE_THROWS_AS(panel_from_json(j), DataError);
  j.erase("version");
  REQUIRE_THROWS_AS(panel_from_json(j), DataError);
}

TEST_CASE("total_queries counts across analysts and periods") {
  auto panel = small_valid_panel();
  REQUIRE(panel.total_queries() == 1);
  panel.analysts.push_back(panel.analysts[0]);
  panel.analysts[1].analyst_id = "a2";
  REQUIRE(panel.total_queries() == 2);
}
