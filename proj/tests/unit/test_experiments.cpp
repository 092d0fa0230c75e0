#include "starsee/experiments.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace starsee;
using namespace starsee::exp;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"system": {"N": 2, "M": 2, "J_r": 1, "J_t": 1}})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("starsee_test_" + name);
  fs::remove_all(d);
  return d;
}

// Small perfect-CSI campaign: 2 protocols x 3 powers x 3 seeds.
ExperimentConfig small_campaign(const fs::path& out) {
  ExperimentConfig cfg = parse_config(R"({
    "system": {"N": 2, "M": 2, "J_r": 1, "J_t": 1},
    "uncertainty": {"kappa_sq": 0},
    "sweep": {"axis": "p_max", "values": ["30 dBm", "35 dBm", "40 dBm"]},
    "run": {"protocols": ["ES", "SF"], "seeds": 3, "max_iterations": 5}
  })");
  cfg.out_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("power and ratio units") {
  CHECK(parse_power("40 dBm", "x") == doctest::Approx(10.0));
  CHECK(parse_power("10 dBW", "x") == doctest::Approx(10.0));
  CHECK(parse_power("250 mW", "x") == doctest::Approx(0.25));
  CHECK(parse_power("0.5 W", "x") == 0.5);
  CHECK(parse_ratio("-30 dB", "x") == doctest::Approx(1e-3));
  CHECK(parse_ratio("2", "x") == 2.0);
  CHECK_THROWS_WITH_AS(parse_power("40", "system.p_max"), doctest::Contains("system.p_max"), std::invalid_argument);
  CHECK_THROWS_AS(parse_power("forty dBm", "x"), std::invalid_argument);
}

TEST_CASE("config defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.params.N == 2);
  CHECK(c.params.p_max == 10.0);
  CHECK(c.axis == SweepAxis::None);
  CHECK(c.values.size() == 1);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  REQUIRE(c.runs.size() == 1);
  CHECK(c.runs[0].label() == "ES");
  CHECK(c.uncertainty.kappa_h_bob == doctest::Approx(std::sqrt(0.1)));
}

TEST_CASE("config errors name the field") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"system": {"N": 2, "J_r": 1, "J_t": 1}})"), doctest::Contains("system.M"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"system": {"N": 2, "M": 2, "J_r": 1, "J_t": 1, "Nn": 3}})"),
                       doctest::Contains("system.Nn"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"system": {"N": 2, "M": 2, "J_r": 1, "J_t": 1, "p_max": 10}})"),
                       doctest::Contains("system.p_max"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config(R"({"system": {"N": 2, "M": 2, "J_r": 1, "J_t": 1}, "extra": {}})"),
                       doctest::Contains("extra"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("{not json"), std::invalid_argument);
}

TEST_CASE("power sweep values are stored in dBm") {
  const ExperimentConfig c = parse_config(R"({"system": {"N": 2, "M": 2, "J_r": 1, "J_t": 1},
    "sweep": {"axis": "p_max", "values": ["20 dBm", "1 W"]}})");
  REQUIRE(c.values.size() == 2);
  CHECK(c.values[0] == doctest::Approx(20.0));
  CHECK(c.values[1] == doctest::Approx(30.0));
  SystemParams p = c.params;
  Geometry g;
  UncertaintyConfig u;
  apply_sweep_value(c.axis, 40.0, p, g, u);
  CHECK(p.p_max == doctest::Approx(10.0));
}

TEST_CASE("run labels") {
  CHECK(RunKind::parse("OMA-TS").oma);
  CHECK(RunKind::parse("OMA-TS").protocol == Protocol::TS);
  CHECK(RunKind::parse("MS").label() == "MS");
  CHECK_THROWS(RunKind::parse("XX"));
}

TEST_CASE("mean and standard error") {
  CHECK(mean({0.1, 0.3}) == doctest::Approx(0.2));
  CHECK(standard_error({0.7}) == 0.0);
  CHECK(standard_error({1.0, 3.0}) == doctest::Approx(1.0));
}

TEST_CASE("csv round trip") {
  ResultRow r;
  r.protocol = "OMA-ES";
  r.axis = "p_max";
  r.value = 30.0;
  r.seed = 4;
  r.ssr = 3.0;
  r.power = 12.5;
  r.see = r.ssr / r.power;
  r.iterations = 7;
  r.converged = true;
  r.feasible = true;
  r.beta_r = {0.25, 1.0 / 3.0};
  r.beta_t = {0.75, 2.0 / 3.0};
  r.note = "a, b";
  const ResultRow b = from_csv(to_csv(r));
  CHECK(b.key() == r.key());
  CHECK(b.see == r.see);
  CHECK(b.beta_r == r.beta_r);
  CHECK(b.beta_t == r.beta_t);
  CHECK(b.note == "a; b");
  CHECK(to_csv(b) == to_csv(r));
}

TEST_CASE("summary groups by protocol and value") {
  std::vector<ResultRow> rows;
  for (int s = 1; s <= 2; ++s) {
    ResultRow r;
    r.protocol = "ES";
    r.value = 40.0;
    r.seed = s;
    r.feasible = true;
    r.see = s == 1 ? 0.1 : 0.3;
    rows.push_back(r);
  }
  ResultRow bad = rows[0];
  bad.seed = 3;
  bad.feasible = false;
  bad.see = 5.0;
  rows.push_back(bad);
  const auto sum = summarize(rows);
  REQUIRE(sum.size() == 1);
  CHECK(sum[0].runs == 3);
  CHECK(sum[0].feasible == 2);
  CHECK(sum[0].mean == doctest::Approx(0.2));
}

TEST_CASE("amplitude report averages converged ES rows") {
  ResultRow r;
  r.protocol = "ES";
  r.converged = true;
  r.feasible = true;
  r.beta_r = {0.2, 0.4};
  r.beta_t = {0.8, 0.6};
  ResultRow other = r;
  other.protocol = "SF";
  other.beta_r = {1.0, 1.0};
  const AmplitudeReport a = amplitude_report({r, other});
  CHECK(a.rows == 1);
  CHECK(a.mean_r == doctest::Approx(0.3));
  CHECK(a.mean_t == doctest::Approx(0.7));
}

TEST_CASE("more transmission-side users draw more transmitted energy") {
  ExperimentConfig cfg = parse_config(R"({
    "system": {"N": 5, "M": 8, "J_r": 1, "J_t": 2},
    "uncertainty": {"kappa_sq": 0},
    "run": {"seeds": 6}
  })");
  std::vector<ResultRow> rows;
  for (std::uint64_t s : cfg.seeds) rows.push_back(run_cell(cfg, cfg.runs[0], 0.0, s));
  const AmplitudeReport a = amplitude_report(rows);
  REQUIRE(a.rows > 0);
  CHECK(a.mean_t > a.mean_r);
}

TEST_CASE("campaign output is complete, deterministic and restartable") {
  const fs::path d1 = fresh_dir("a"), d2 = fresh_dir("b");
  const auto rows = run_campaign(small_campaign(d1));
  CHECK(rows.size() == 18);
  for (const auto& r : rows) {
    if (r.feasible) CHECK(r.see == doctest::Approx(r.ssr / r.power));
    else CHECK(r.ssr == 0.0);
  }
  const std::string first = slurp(d1 / "results.csv");
  CHECK(read_csv((d1 / "results.csv").string()).size() == 18);

  run_campaign(small_campaign(d2));
  CHECK(slurp(d2 / "results.csv") == first);

  // drop the last five rows and resume
  {
    std::istringstream in(first);
    std::string line, kept;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (std::size_t i = 0; i + 5 < lines.size(); ++i) kept += lines[i] + "\n";
    std::ofstream(d2 / "results.csv") << kept;
  }
  int fresh = 0;
  run_campaign(small_campaign(d2), [&](const ResultRow&) { ++fresh; });
  CHECK(fresh == 5);
  CHECK(slurp(d2 / "results.csv") == first);

  write_summary(rows, d1.string());
  for (const char* f : {"summary.csv", "see.svg", "amplitudes.csv", "amplitudes.svg"}) CHECK(fs::exists(d1 / f));
  fs::remove_all(d1);
  fs::remove_all(d2);
}
