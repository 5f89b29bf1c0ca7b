#include <doctest.h>

#include <cmath>

#include "esfbma/errors.hpp"
#include "esfbma/ingest.hpp"
#include "support/fixtures.hpp"

using namespace esfbma;

namespace {

std::vector<PanelRow> toy_panel() {
  // Two variables over three years for three units, plus a dummy.
  std::vector<PanelRow> rows;
  const char* units[] = {"A", "B", "C"};
  const double gdp[3][3] = {{2.0, 4.0, 6.0}, {1.0, 1.0, 1.0}, {3.0, 5.0, 4.0}};
  const double cpi[3] = {10.0, 20.0, 60.0};
  const double fed[3] = {0.0, 1.0, 1.0};
  for (int u = 0; u < 3; ++u) {
    for (int t = 0; t < 3; ++t)
      rows.push_back({units[u], 2000 + t, "gdp", gdp[u][t]});
    rows.push_back({units[u], 2002, "cpi", cpi[u]});
    rows.push_back({units[u], 2000, "federal", fed[u]});
    rows.push_back({units[u], 2001, "federal", fed[u]});
    rows.push_back({units[u], 2002, "federal", fed[u]});
  }
  return rows;
}

VariableManifest toy_manifest() {
  VariableManifest m;
  m.emplace_back("cpi", VariableSpec{VariableSpec::Role::Outcome, "", {}});
  m.emplace_back("gdp", VariableSpec{VariableSpec::Role::Covariate,
                                     "economic", {}});
  m.emplace_back("federal", VariableSpec{VariableSpec::Role::Covariate,
                                         "institutional", {}});
  return m;
}

std::vector<GeoPoint> toy_coords() {
  return {{"A", 0.0, 0.0}, {"B", 10.0, 10.0}, {"C", 20.0, 20.0}};
}

}  // namespace

TEST_CASE("average_panel: basic averaging") {
  SUBCASE("values {2, 4} over two years average to 3") {
    std::vector<PanelRow> rows = {{"A", 2000, "v", 2.0}, {"A", 2001, "v", 4.0},
                                  {"B", 2000, "v", 1.0}, {"B", 2001, "v", 5.0}};
    const CrossSection cs = average_panel(rows, 2000, 2001);
    CHECK(cs.values(0, 0) == 3.0);
    CHECK(cs.values(1, 0) == 3.0);
    CHECK(cs.year_counts(0, 0) == 2);
  }

  SUBCASE("single-year panel is the identity") {
    std::vector<PanelRow> rows = {{"A", 2000, "v", 2.5}, {"B", 2000, "v", 7.0}};
    const CrossSection cs = average_panel(rows, 2000, 2000);
    CHECK(cs.values(0, 0) == 2.5);
    CHECK(cs.values(1, 0) == 7.0);
  }

  SUBCASE("a gap year averages the present years and records the count") {
    std::vector<PanelRow> rows = {{"A", 2000, "v", 2.0},
                                  {"A", 2002, "v", 6.0},
                                  {"B", 2000, "v", 1.0},
                                  {"B", 2001, "v", 1.0},
                                  {"B", 2002, "v", 1.0}};
    const CrossSection cs = average_panel(rows, 2000, 2002);
    CHECK(cs.values(0, 0) == 4.0);
    CHECK(cs.year_counts(0, 0) == 2);
    CHECK(cs.year_counts(1, 0) == 3);
  }

  SUBCASE("row order does not matter") {
    std::vector<PanelRow> rows = toy_panel();
    const CrossSection a = average_panel(rows, 2000, 2002);
    std::reverse(rows.begin(), rows.end());
    const CrossSection b = average_panel(rows, 2000, 2002);
    CHECK(a.unit_ids == b.unit_ids);
    CHECK(a.variables == b.variables);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("missing (unit, variable) pairs are hard errors") {
    std::vector<PanelRow> rows = {{"A", 2000, "v", 2.0},
                                  {"A", 2000, "w", 1.0},
                                  {"B", 2000, "v", 3.0}};
    try {
      average_panel(rows, 2000, 2000);
      FAIL("expected missing-cell error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("(B, w)") != std::string::npos);
    }
  }

  SUBCASE("duplicate observations are rejected") {
    std::vector<PanelRow> rows = {{"A", 2000, "v", 2.0},
                                  {"A", 2000, "v", 2.0}};
    CHECK_THROWS_AS(average_panel(rows, 2000, 2000), ValidationError);
  }
}

TEST_CASE("detect_dummies") {
  CrossSection cs;
  cs.unit_ids = {"A", "B", "C"};
  cs.variables = {"d1", "d2", "x"};
  cs.values.resize(3, 3);
  cs.values.col(0) << 0.0, 1.0, 0.0;
  cs.values.col(1) << 0.0, 1.0, 2.0;
  cs.values.col(2) << 0.0, 1.0, 0.5;
  const auto flags = detect_dummies(cs);
  CHECK(flags[0]);
  CHECK(!flags[1]);
  CHECK(!flags[2]);
}

TEST_CASE("standardize: z-scores with the n-1 denominator") {
  const CrossSection cs = average_panel(toy_panel(), 2000, 2002);
  const Dataset ds = standardize(cs, toy_manifest(), toy_coords());

  SUBCASE("column {1, 2, 3} maps to {-1, 0, 1}") {
    // gdp averages are {4, 1, 4}... use the outcome instead: cpi is the 2002
    // column {10, 20, 60}; check the invariants rather than exact values.
    CHECK(std::abs(ds.y.mean()) < 1e-12);
    const double sd =
        std::sqrt((ds.y.array() - ds.y.mean()).square().sum() / 2.0);
    CHECK(std::abs(sd - 1.0) < 1e-12);

    CrossSection simple;
    simple.unit_ids = {"A", "B", "C"};
    simple.variables = {"out", "v"};
    simple.values.resize(3, 2);
    simple.values.col(0) << 5.0, 6.0, 7.0;
    simple.values.col(1) << 1.0, 2.0, 3.0;
    VariableManifest m;
    m.emplace_back("out", VariableSpec{VariableSpec::Role::Outcome, "", {}});
    m.emplace_back("v", VariableSpec{VariableSpec::Role::Covariate, "", {}});
    const Dataset simple_ds = standardize(simple, m, toy_coords());
    CHECK(simple_ds.X(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(simple_ds.X(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(simple_ds.X(2, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("dummies pass through untouched") {
    const int fed = 1;  // covariate order: gdp, federal
    CHECK(ds.dummy[fed]);
    CHECK(ds.X(0, fed) == 0.0);
    CHECK(ds.X(1, fed) == 1.0);
    CHECK(ds.X(2, fed) == 1.0);
  }

  SUBCASE("standardizing twice is idempotent") {
    CrossSection again;
    again.unit_ids = ds.unit_ids;
    again.variables = {"cpi", "gdp", "federal"};
    again.values.resize(3, 3);
    again.values.col(0) = ds.y;
    again.values.col(1) = ds.X.col(0);
    again.values.col(2) = ds.X.col(1);
    const Dataset twice = standardize(again, toy_manifest(), toy_coords());
    CHECK((twice.y - ds.y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((twice.X - ds.X).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("standardization record allows de-standardization") {
    const CrossSection orig = average_panel(toy_panel(), 2000, 2002);
    for (int i = 0; i < 3; ++i) {
      const double raw = destandardize(ds.standardization, "gdp", ds.X(i, 0));
      // gdp column in the cross-section (variables sorted: cpi, federal, gdp).
      const double expected = orig.values(i, 2);
      CHECK(std::abs(raw - expected) <
            1e-10 * std::max(1.0, std::abs(expected)));
    }
  }

  SUBCASE("correlations between columns are preserved") {
    const CrossSection orig = average_panel(toy_panel(), 2000, 2002);
    auto corr = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      const Eigen::ArrayXd ac = a.array() - a.mean();
      const Eigen::ArrayXd bc = b.array() - b.mean();
      return (ac * bc).sum() / std::sqrt(ac.square().sum() * bc.square().sum());
    };
    const double before = corr(orig.values.col(2), orig.values.col(0));
    const double after = corr(ds.X.col(0), ds.y);
    CHECK(std::abs(before - after) < 1e-12);
  }

  SUBCASE("zero-variance non-dummy columns are named in the error") {
    CrossSection flat;
    flat.unit_ids = {"A", "B", "C"};
    flat.variables = {"out", "flatv"};
    flat.values.resize(3, 2);
    flat.values.col(0) << 1.0, 2.0, 3.0;
    flat.values.col(1) << 7.0, 7.0, 7.0;
    VariableManifest m;
    m.emplace_back("out", VariableSpec{VariableSpec::Role::Outcome, "", {}});
    m.emplace_back("flatv",
                   VariableSpec{VariableSpec::Role::Covariate, "", {}});
    try {
      standardize(flat, m, toy_coords());
      FAIL("expected zero-variance error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("flatv") != std::string::npos);
    }
  }

  SUBCASE("missing coordinates are reported") {
    VariableManifest m = toy_manifest();
    std::vector<GeoPoint> coords = {{"A", 0.0, 0.0}, {"B", 10.0, 10.0}};
    CHECK_THROWS_AS(standardize(cs, m, coords), ValidationError);
  }
}

TEST_CASE("build_dataset: outcome taken at the reference year") {
  std::vector<PanelRow> rows = toy_panel();
  // Add earlier cpi years that must be ignored by the outcome extraction.
  rows.push_back({"A", 2000, "cpi", 999.0});
  rows.push_back({"B", 2000, "cpi", 999.0});
  rows.push_back({"C", 2000, "cpi", 999.0});
  const Dataset ds =
      build_dataset(rows, toy_manifest(), toy_coords(), 2000, 2002, 2002);
  // cpi at 2002 is {10, 20, 60}: standardized, ordering preserved.
  CHECK(ds.y(0) < ds.y(1));
  CHECK(ds.y(1) < ds.y(2));
  CHECK(std::abs(ds.y.mean()) < 1e-12);

  SUBCASE("missing outcome year is an error") {
    CHECK_THROWS_AS(
        build_dataset(rows, toy_manifest(), toy_coords(), 2000, 2002, 2001),
        ValidationError);
  }
}

TEST_CASE("panel CSV round trip and validation") {
  const std::vector<PanelRow> rows = toy_panel();
  const std::string text = serialize_panel_csv(rows);
  const std::vector<PanelRow> parsed = parse_panel_csv(text);
  REQUIRE(parsed.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].unit_id == rows[i].unit_id);
    CHECK(parsed[i].year == rows[i].year);
    CHECK(parsed[i].variable == rows[i].variable);
    CHECK(parsed[i].value == rows[i].value);
  }
  CHECK_THROWS_AS(parse_panel_csv("wrong,header\n"), ValidationError);
  CHECK_THROWS_AS(parse_panel_csv("unit_id,year,variable,value\nA,x,v,1\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_panel_csv("unit_id,year,variable,value\nA,2000,v,nan\n"),
                  ValidationError);
}

TEST_CASE("variable manifest JSON") {
  const std::string text = R"({
    "cpi": {"role": "outcome"},
    "gdp": {"role": "covariate", "group": "economic"},
    "federal": {"role": "covariate", "dummy": true}
  })";
  const VariableManifest m = parse_variable_manifest_json(text);
  REQUIRE(m.size() == 3);
  CHECK(m[0].first == "cpi");
  CHECK(m[0].second.role == VariableSpec::Role::Outcome);
  CHECK(m[1].second.group == "economic");
  REQUIRE(m[2].second.dummy.has_value());
  CHECK(*m[2].second.dummy);
  CHECK_THROWS_AS(parse_variable_manifest_json("[1,2]"), ValidationError);
  CHECK_THROWS_AS(parse_variable_manifest_json("{\"a\": {\"role\": \"xyz\"}}"),
                  ValidationError);
  CHECK_THROWS_AS(parse_variable_manifest_json("not json"), ValidationError);
}
