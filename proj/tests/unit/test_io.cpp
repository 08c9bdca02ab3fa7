#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hydrosdp/io.hpp"
#include "hydrosdp/pipeline.hpp"

using namespace hydro;
namespace fs = std::filesystem;

namespace {

ValueFunction small_vf() {
  ValueFunction vf;
  vf.method = Method::m3;
  vf.reserves_enabled = true;
  vf.filling = {0.0, 1.0 / 3.0, 2.5e6, 1e7};
  vf.theta = {{0.0, 1.25, 3.0e5, 7.123456789e6}, {0.0, 0.1, 0.2, 0.3}, {0.0, 1e-300, 5.0, 6.0}};
  return vf;
}

std::string tiny_config(const std::string& dir) {
  return R"({
    "stochastic": {"weeks": 3},
    "grids": {"filling_levels": 5, "discharge_levels": 5},
    "valuation": {"methods": ["M1", 2], "reserves": "both", "n_scenarios": 2},
    "simulation": {"samples": 3},
    "seed": 11,
    "output": {"dir": ")" +
         dir + R"("}
  })";
}

}  // namespace

TEST_CASE("doubles survive text exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e9, 1e9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(std::isnan(parse_double(format_double(std::numeric_limits<double>::quiet_NaN()))));
  CHECK(parse_double("-inf") == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(parse_double("12x"), FormatError);
  CHECK_THROWS_AS(parse_double(""), FormatError);
}

TEST_CASE("value function round trip") {
  const auto vf = small_vf();
  std::stringstream ss;
  write_value_function(ss, vf);
  CHECK(ss.str().rfind("# hydrosdp theta v1 reserves=on\nmethod,week,filling_m3,theta_eur\n", 0) == 0);
  const auto back = read_value_function(ss);
  CHECK(back.method == vf.method);
  CHECK(back.reserves_enabled);
  CHECK(back.filling == vf.filling);
  CHECK(back.theta == vf.theta);
}

TEST_CASE("malformed theta files are rejected") {
  std::stringstream no_preamble("method,week,filling_m3,theta_eur\nM1,1,0,0\n");
  CHECK_THROWS_AS(read_value_function(no_preamble), FormatError);
  std::stringstream wrong_version("# hydrosdp theta v9 reserves=on\nmethod,week,filling_m3,theta_eur\n");
  CHECK_THROWS_AS(read_value_function(wrong_version), FormatError);
  std::stringstream ragged(
      "# hydrosdp theta v1 reserves=off\nmethod,week,filling_m3,theta_eur\nM1,1,0,0\nM1,1,5,1\nM1,2,0,0\n");
  CHECK_THROWS_AS(read_value_function(ragged), FormatError);
  std::stringstream mixed(
      "# hydrosdp theta v1 reserves=off\nmethod,week,filling_m3,theta_eur\nM1,1,0,0\nM2,2,0,0\n");
  CHECK_THROWS_AS(read_value_function(mixed), FormatError);
}

TEST_CASE("water values, summaries and samples round trip") {
  const auto wv = water_values(small_vf());
  std::stringstream a;
  write_water_values(a, wv);
  const auto wv2 = read_water_values(a);
  CHECK(wv2.filling_mid == wv.filling_mid);
  CHECK(wv2.values == wv.values);

  const std::vector<SummaryRow> rows{{Method::m1, false, 1.5e6, 3.25, 9.5e5}, {Method::m4, true, 2e6, 0.0, -1.0}};
  std::stringstream b;
  write_summary(b, rows);
  const auto rows2 = read_summary(b);
  REQUIRE(rows2.size() == 2);
  CHECK(rows2[1].method == Method::m4);
  CHECK(rows2[1].reserves);
  CHECK(rows2[0].rel_std_pct == 3.25);
  CHECK(rows2[1].cvar10 == -1.0);

  const std::vector<SampleRow> samples{{Method::m2, true, 7, 12.5, 0.0, 1e-9, 3}};
  std::stringstream c;
  write_samples(c, samples);
  const auto s2 = read_samples(c);
  REQUIRE(s2.size() == 1);
  CHECK(s2[0].sample == 7);
  CHECK(s2[0].balance_residual_m3 == 1e-9);
  CHECK(s2[0].reserve_weeks == 3);
}

TEST_CASE("LP text lists every row and bound") {
  lp::LinearProgram p;
  const int x = p.add_variable(0.0, 4.0, 3.0, "x");
  const int y = p.add_variable(-lp::kInf, lp::kInf, -1.0, "y flow");
  p.add_equality({{x, 1.0}, {y, 1.0}}, 2.0);
  p.add_inequality({{x, 2.0}, {y, -1.0}}, 5.0);
  std::stringstream ss;
  write_lp_format(ss, p, "toy");
  const auto text = ss.str();
  CHECK(text.find("Maximize\n obj: 3 x - 1 y_flow") != std::string::npos);
  CHECK(text.find(" e0: 1 x + 1 y_flow = 2") != std::string::npos);
  CHECK(text.find(" l0: 2 x - 1 y_flow <= 5") != std::string::npos);
  CHECK(text.find(" 0 <= x <= 4") != std::string::npos);
  CHECK(text.find(" y_flow free") != std::string::npos);
  CHECK(text.substr(text.size() - 4) == "End\n");
}

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({"stochastic": {"weeks": 4, "price_scale": 2},
                                  "valuation": {"methods": [3, "m4"], "reserves": "on", "n_scenarios": 6,
                                                "n_scenarios_per_method": {"M4": 1}}})");
  CHECK(c.params.num_weeks() == 4);
  CHECK(c.methods == std::vector<Method>{Method::m3, Method::m4});
  CHECK(c.reserve_flags == std::vector<bool>{true});
  CHECK(c.scenarios_for(Method::m3) == 6);
  CHECK(c.scenarios_for(Method::m4) == 1);
  const auto base = reference_params(reference_plant());
  CHECK(c.params.weekly_price_mean[2] == doctest::Approx(2.0 * base.weekly_price_mean[2]));
  CHECK(c.valuation(Method::m4, true).n_scenarios == 1);

  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"valuation": {"methods": [5]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"valuation": {"reserves": "maybe"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stochastic": {"weeks": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stochastic": {"rho": 2}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"plant": "alps"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"plant": {"reservoirs": [], "units": []}})"), ConfigError);
}

TEST_CASE("an inline plant matches the preset") {
  const auto c = parse_config(R"({"plant": {"name": "one", "inflow_points": ["S"],
      "reservoirs": [{"id": "S", "class": "seasonal", "v_max": 1e6}],
      "units": [{"id": "T", "kind": "turbine", "from": "S", "p_max": 10, "k": 1000}]},
      "stochastic": {"preset": "none", "weekly_price_mean": [40, 50], "hourly_profile": [)" +
                              [] {
                                std::string s;
                                for (int h = 0; h < kHoursPerWeek; ++h) s += h ? ",1" : "1";
                                return s;
                              }() +
                              R"(], "inflow_mean": [[1000, 2000]], "reserve_price": [0, 0]}})");
  CHECK(c.plant.reservoirs.size() == 1);
  CHECK(c.plant.units[0].k == 1000.0);
  CHECK(c.params.num_weeks() == 2);
}

TEST_CASE("water value agreement counts cells within tolerance") {
  WaterValueTable a, b;
  a.filling_mid = b.filling_mid = {1.0, 2.0};
  a.values = {{1.0, 0.0}, {2.0, 2.0}, {9.0, 9.0}};
  b.values = {{1.05, 0.0}, {2.0, 3.0}, {0.0, 0.0}};
  // week 1: both agree (one by 5 %, one both zero); week 2: one of two; terminal ignored
  CHECK(water_value_agreement(a, b) == doctest::Approx(0.75));
  b.filling_mid = {1.0};
  CHECK_THROWS(water_value_agreement(a, b));
}

TEST_CASE("optimize, simulate and compare on a tiny configuration") {
  const auto dir = fs::temp_directory_path() / "hydrosdp_pipeline_test";
  fs::remove_all(dir);
  const auto c = parse_config(tiny_config(dir.string()));
  std::ostringstream log;

  CHECK_THROWS_AS(run_simulate(c, log), ConfigError);

  const auto timing = run_optimize(c, log);
  REQUIRE(timing.size() == 4);
  for (const char* f : {"theta_M1_off.csv", "theta_M2_on.csv", "water_values_M1_on.csv", "timing.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  std::ifstream th(dir / "theta_M2_on.csv");
  const auto vf = read_value_function(th);
  CHECK(vf.method == Method::m2);
  CHECK(vf.num_weeks() == 3);
  CHECK(vf.filling.size() == 5);

  const auto summary = run_simulate(c, log);
  REQUIRE(summary.size() == 4);
  std::ifstream sm(dir / "samples.csv");
  const auto samples = read_samples(sm);
  CHECK(samples.size() == 12);
  for (const auto& s : samples) CHECK(s.balance_residual_m3 < 1e-6 * c.plant.total_v_max());
  for (const auto& r : summary) {
    double mean = 0.0;
    for (const auto& s : samples) {
      if (s.method == r.method && s.reserves == r.reserves) mean += s.profit / 3.0;
    }
    CHECK(r.expected_profit == doctest::Approx(mean).epsilon(1e-12));
  }

  // identical configuration and seed reproduce the summary byte for byte
  std::ifstream s1(dir / "summary.csv");
  std::stringstream first;
  first << s1.rdbuf();
  run_simulate(c, log);
  std::ifstream s2(dir / "summary.csv");
  std::stringstream second;
  second << s2.rdbuf();
  CHECK(first.str() == second.str());

  const auto rep = run_compare(c, log);
  CHECK(rep.summary.size() == 4);
  CHECK(rep.timing.size() == 4);
  CHECK(rep.agreement_m3_m4.empty());
  CHECK(fs::exists(dir / "compare.txt"));
  std::ifstream cc(dir / "compare.csv");
  std::stringstream ctext;
  ctext << cc.rdbuf();
  CHECK(ctext.str().find("reserve_profit_delta,M2,,") != std::string::npos);

  auto one = c;
  one.methods = {Method::m1};
  CHECK_THROWS_AS(run_compare(one, log), ConfigError);
  fs::remove_all(dir);
}
