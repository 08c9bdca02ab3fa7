#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hydrosdp/intrastage.hpp"

using namespace hydro;

namespace {

// One reservoir feeding one turbine to the tailwater, optionally a pump from
// the lower basin; already in aggregated form.
PlantTopology single_plant(double p_max, double k, double spill_max, double pump_max = 0.0, double k_p = 1400.0,
                           bool qualified = false, double q_min = 0.0, double q_max = 0.0) {
  PlantTopology p;
  p.name = "single";
  p.reservoirs = {{"S", ReservoirClass::seasonal, 1e9, 5e8, spill_max}};
  p.units = {{"T", UnitKind::turbine, "S", "", p_max, k, qualified, q_min, q_max}};
  if (pump_max > 0.0) p.units.push_back({"P", UnitKind::pump, "", "S", pump_max, k_p, false, 0.0, 0.0});
  p.inflow_points = {"S"};
  return validate_topology(p);
}

WeeklyScenario week_with(std::vector<double> prices, int reservoirs, double weekly_inflow = 0.0,
                         double reserve_price = 0.0) {
  WeeklyScenario s;
  const auto hours = prices.size();
  s.prices = std::move(prices);
  s.inflows.assign(reservoirs, std::vector<double>(hours, weekly_inflow / hours));
  s.reserve_price = reserve_price;
  return s;
}

std::vector<double> peak_offpeak_prices(double peak, double off) {
  const auto mask = default_peak_mask();
  std::vector<double> c(kHoursPerWeek);
  for (int h = 0; h < kHoursPerWeek; ++h) c[h] = mask[h] ? peak : off;
  return c;
}

int peak_hours() {
  const auto mask = default_peak_mask();
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

// Independent check of a schedule against the bundle balances.
double balance_residual(const PlantTopology& plant, const ScenarioTree& tree, const Schedule& sch, double W) {
  double worst = 0.0;
  const int seasonal = plant.seasonal_reservoirs()[0];
  for (int r : plant.daily_reservoirs()) {
    for (int n = 0; n < tree.num_nodes(); ++n) {
      const auto& node = tree.node(n);
      const double before = node.parent >= 0 ? sch.volume[r][node.parent] : 0.0;
      double flow = tree.inflows()[r][node.hour] - sch.spill[r][n];
      for (std::size_t u = 0; u < plant.units.size(); ++u) {
        const auto& unit = plant.units[u];
        if (unit.from == plant.reservoirs[r].id) flow -= unit.k * sch.unit_power[u][n];
        if (unit.to == plant.reservoirs[r].id) flow += unit.k * sch.unit_power[u][n];
      }
      worst = std::max(worst, std::abs(sch.volume[r][n] - (before + flow)));
      if (node.hour == tree.num_hours() - 1) worst = std::max(worst, std::abs(sch.volume[r][n]));
    }
  }
  for (int s = 0; s < tree.num_scenarios(); ++s) {
    double out = sch.seasonal_spill[s];
    for (int h = 0; h < tree.num_hours(); ++h) {
      const int n = tree.node_of(h, s);
      out -= tree.inflows()[seasonal][h];
      for (std::size_t u = 0; u < plant.units.size(); ++u) {
        const auto& unit = plant.units[u];
        if (unit.from == plant.reservoirs[seasonal].id) out += unit.k * sch.unit_power[u][n];
        if (unit.to == plant.reservoirs[seasonal].id) out -= unit.k * sch.unit_power[u][n];
      }
    }
    worst = std::max(worst, std::abs(out - W));
  }
  return worst;
}

}  // namespace

TEST_CASE("method 1: zero prices give zero value") {
  const auto plant = single_plant(100.0, 2000.0, 1e5, 50.0);
  const auto s = week_with(std::vector<double>(kHoursPerWeek, 0.0), 1, 3e6);
  IntrastageOptions opt;
  opt.keep_schedule = true;
  const auto r = method1_stage_value(plant, s, 0.0, opt);
  REQUIRE(r.feasible());
  CHECK(r.value == doctest::Approx(0.0).scale(1.0));
  for (const auto& row : r.schedule->unit_power) {
    for (double p : row) CHECK(p == doctest::Approx(0.0).scale(1.0));
  }
}

TEST_CASE("method 1: forced full peak output") {
  const double u_bar = 120.0, k = 1800.0;
  const auto plant = single_plant(u_bar, k, 0.0);
  const auto s = week_with(peak_offpeak_prices(80.0, 30.0), 1);
  const double W = peak_hours() * k * u_bar;
  const auto r = method1_stage_value(plant, s, W);
  REQUIRE(r.feasible());
  CHECK(r.value == doctest::Approx(80.0 * u_bar * peak_hours()).epsilon(1e-9));
  CHECK_FALSE(method1_stage_value(plant, s, 1.01 * W).feasible());
}

TEST_CASE("method 1: a dominant reserve price commits the turbine") {
  const auto plant = single_plant(100.0, 1800.0, 1e5, 0.0, 1400.0, true, 10.0, 20.0);
  const auto s = week_with(peak_offpeak_prices(60.0, 40.0), 1, 0.0, 1e5);
  IntrastageOptions opt;
  opt.reserves_enabled = true;
  const auto r = method1_stage_value(plant, s, kHoursPerWeek * 1800.0 * 40.0, opt);
  REQUIRE(r.feasible());
  CHECK(r.q == std::vector<int>{1});
  opt.reserves_enabled = false;
  const auto off = method1_stage_value(plant, s, kHoursPerWeek * 1800.0 * 40.0, opt);
  CHECK(off.q == std::vector<int>{0});
  CHECK(r.value > off.value);
}

TEST_CASE("method 2 equals method 1 on two-level prices") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n_pk = peak_hours();
  for (int trial = 0; trial < 25; ++trial) {
    const double u_bar = 50.0 + 100.0 * u(rng), k = 1500.0 + 800.0 * u(rng);
    const double peak = 40.0 + 60.0 * u(rng);
    const bool with_pump = trial % 2 == 1;
    const double k_p = 0.8 * k;
    // Off-peak below peak but expensive enough that pumping never pays.
    const double off = with_pump ? peak * (k_p / k + (1.0 - k_p / k) * u(rng)) : 10.0 + 30.0 * u(rng);
    const auto plant = single_plant(u_bar, k, 0.0, with_pump ? 40.0 : 0.0, k_p);
    const int h = static_cast<int>(rng() % (n_pk + 1));
    const double water = h * k * u_bar;
    const double a = water * u(rng);
    const auto s = week_with(peak_offpeak_prices(peak, off), 1, a);
    const auto r1 = method1_stage_value(plant, s, water - a);
    const auto r2 = method2_stage_value(plant, s, water - a);
    REQUIRE(r1.feasible());
    REQUIRE(r2.feasible());
    CHECK(r2.value == doctest::Approx(r1.value).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("method 2: flat prices and a lossy pump stay idle") {
  const double u_bar = 100.0, k = 1800.0, p_bar = 60.0, k_p = 1400.0;
  const auto plant = single_plant(u_bar, k, 0.0, p_bar, k_p);
  const auto s = week_with(std::vector<double>(kHoursPerWeek, 50.0), 1);
  IntrastageOptions opt;
  opt.keep_schedule = true;
  const auto r = method2_stage_value(plant, s, 0.0, opt);
  REQUIRE(r.feasible());
  // Full grid search over (h_u, h_p).
  double best = -1e300;
  int best_u = -1, best_p = -1;
  for (int hu = 0; hu <= kHoursPerWeek; ++hu) {
    for (int hp = 0; hu + hp <= kHoursPerWeek; ++hp) {
      if (std::abs(hu * k * u_bar - hp * k_p * p_bar) > 1e-6) continue;
      const double v = 50.0 * (hu * u_bar - hp * p_bar);
      if (v > best) {
        best = v;
        best_u = hu;
        best_p = hp;
      }
    }
  }
  CHECK(best_u == 0);
  CHECK(best_p == 0);
  CHECK(r.value == doctest::Approx(best).scale(1.0));
  for (const auto& row : r.schedule->unit_power) {
    for (double p : row) CHECK(p == 0.0);
  }
}

TEST_CASE("method 2: forced hours on a flat curve") {
  const double u_bar = 90.0, k = 2000.0;
  const auto plant = single_plant(u_bar, k, 0.0);
  const auto s = week_with(std::vector<double>(kHoursPerWeek, 50.0), 1);
  const auto r = method2_stage_value(plant, s, 10 * k * u_bar);
  REQUIRE(r.feasible());
  CHECK(r.value == doctest::Approx(u_bar * 500.0));
}

TEST_CASE("method 3: two-hour week puts generation in the expensive hour") {
  const double u_bar = 100.0, k = 1800.0;
  const auto plant = single_plant(u_bar, k, 0.0);
  const auto s = week_with({100.0, 10.0}, 1);
  const double W = k * u_bar;
  const auto tree = degenerate_tree(s);
  BundleLp lp(plant, tree);
  const double value = lp.solve(W);
  // Enumerate the split of one hour of water over the two hours.
  double best = -1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double u1 = u_bar * i / 1000.0;
    best = std::max(best, 100.0 * u1 + 10.0 * (u_bar - u1));
  }
  CHECK(value == doctest::Approx(best).epsilon(1e-9));
  CHECK(value == doctest::Approx(100.0 * u_bar).epsilon(1e-9));
  const auto sch = lp.schedule();
  CHECK(sch.unit_power[0][0] == doctest::Approx(u_bar));
  CHECK(sch.unit_power[0][1] == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("method 3: uniform prices value the energy content of the water") {
  auto plant = reference_plant();
  plant.units.pop_back();  // no pump
  for (auto& r : plant.reservoirs) r.spill_max = 0.0;
  const double price = 42.0;
  auto s = week_with(std::vector<double>(kHoursPerWeek, price), 2);
  s.inflows[0].assign(kHoursPerWeek, 2e4);
  s.inflows[1].assign(kHoursPerWeek, 1e3);
  const double a_s = 2e4 * kHoursPerWeek, a_b = 1e3 * kHoursPerWeek;
  for (double W : {0.0, 5e6, 1.2e7}) {
    const auto r = method3_intrastage(plant, s, W);
    REQUIRE(r.feasible());
    const double energy = (W + a_s) / 1800.0 + (W + a_s + a_b) / 2250.0;
    CHECK(r.value == doctest::Approx(price * energy).epsilon(1e-9));
  }
}

TEST_CASE("method 3: a committed turbine stays inside its band") {
  const auto plant = reference_plant();
  const auto params = reference_params(plant);
  const auto s = expected_week(params, 20);
  const auto tree = degenerate_tree(s);
  BundleLp lp(plant, tree);
  lp.set_q({1, 1});
  REQUIRE(lp.solve(1.5e7) != kInfeasible);
  const auto sch = lp.schedule();
  const auto qualified = plant.qualified_turbines();
  for (int i : qualified) {
    const auto& u = plant.units[i];
    for (double p : sch.unit_power[i]) {
      CHECK(p >= u.q_min + u.q_max - 1e-6);
      CHECK(p <= u.p_max - u.q_max + 1e-6);
    }
  }
  CHECK(balance_residual(plant, tree, sch, 1.5e7) < 1e-6 * plant.total_v_max());
}

TEST_CASE("method 4 on a degenerate tree equals method 3") {
  const auto plant = reference_plant();
  const auto params = reference_params(plant);
  IntrastageOptions opt;
  opt.reserves_enabled = true;
  for (int i = 0; i < 4; ++i) {
    auto stream = RandomStream::derive(9, static_cast<std::uint64_t>(i));
    const int week = 5 + 11 * i;
    const auto tree = build_price_tree(params, week, 1, stream);
    auto again = RandomStream::derive(9, static_cast<std::uint64_t>(i));
    const auto s = sample_week(params, week, again);
    const double W = 2e6 + 4e6 * i;
    const auto r4 = method4_intrastage(plant, tree, W, opt);
    const auto r3 = method3_intrastage(plant, s, W, opt);
    REQUIRE(r3.feasible());
    CHECK(r4.value == doctest::Approx(r3.value).epsilon(1e-9));
    CHECK(r4.q == r3.q);
  }
}

TEST_CASE("method 4 on a binary tree: size, nonanticipativity and the information bound") {
  const auto plant = reference_plant();
  const auto params = reference_params(plant);
  auto stream = RandomStream::derive(4, 1);
  const auto tree = build_price_tree(params, 30, 2, stream);
  REQUIRE(tree.num_nodes() == 6096);
  REQUIRE(tree.num_scenarios() == 128);
  BundleLp lp(plant, tree);
  CHECK(lp.program().num_variables() == 6096 * 5 + 128);

  const double W = 8e6;
  const double v4 = lp.solve(W);
  REQUIRE(v4 != kInfeasible);
  const auto sch = lp.schedule();
  CHECK(balance_residual(plant, tree, sch, W) < 1e-6 * plant.total_v_max());
  for (int h = 0; h < tree.num_hours(); ++h) {
    for (int s = 0; s < tree.num_scenarios(); ++s) {
      const auto& node = tree.node(tree.node_of(h, s));
      CHECK(node.hour == h);
      CHECK(s >= node.first_scenario);
      CHECK(s < node.first_scenario + node.num_scenarios);
    }
  }
  double m3 = 0.0;
  for (int s = 0; s < tree.num_scenarios(); ++s) {
    const auto leaf = tree.scenario(s);
    const double v = method3_intrastage(plant, leaf, W).value;
    REQUIRE(v != kInfeasible);
    m3 += tree.scenario_probability(s) * v;
  }
  CHECK(m3 >= v4 - 1e-9 * std::abs(v4));
}

TEST_CASE("hourly stage value is concave in W for a fixed reserve choice") {
  const auto plant = reference_plant();
  const auto params = reference_params(plant);
  auto stream = RandomStream::derive(2, 2);
  const auto s = sample_week(params, 12, stream);
  const auto tree = degenerate_tree(s);
  std::vector<double> grid;
  for (int i = 0; i <= 24; ++i) grid.push_back(-1e7 + 1.6e6 * i);
  IntrastageOptions opt;
  opt.reserves_enabled = true;
  const auto cube = hourly_value_table(plant, std::span<const ScenarioTree>(&tree, 1), grid, opt);
  int checked = 0;
  for (const auto& values : cube[0]) {
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      if (values[i - 1] == kInfeasible || values[i + 1] == kInfeasible) continue;
      CHECK(values[i] >= 0.5 * (values[i - 1] + values[i + 1]) - 1e-7 * std::abs(values[i]));
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("reserves never lower the stage value") {
  const auto plant = reference_plant();
  const auto params = reference_params(plant);
  const auto agg = aggregate_plant(plant);
  IntrastageOptions on, off;
  on.reserves_enabled = true;
  for (int week : {3, 26, 45}) {
    auto stream = RandomStream::derive(8, static_cast<std::uint64_t>(week));
    const auto s = sample_week(params, week, stream);
    for (double W : {-5e6, 0.0, 6e6, 1.8e7}) {
      const auto a = method3_intrastage(plant, s, W, on), b = method3_intrastage(plant, s, W, off);
      if (b.feasible()) CHECK(a.value >= b.value);
      const auto c = method1_stage_value(agg, s, W, on), d = method1_stage_value(agg, s, W, off);
      if (d.feasible()) CHECK(c.value >= d.value);
      const auto e = method2_stage_value(agg, s, W, on), f = method2_stage_value(agg, s, W, off);
      if (f.feasible()) CHECK(e.value >= f.value);
    }
  }
}

TEST_CASE("reserve fixings are enumerated zero first") {
  const auto f = reserve_fixings(2, true);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == std::vector<int>{0, 0});
  CHECK(f[1] == std::vector<int>{0, 1});
  CHECK(f[3] == std::vector<int>{1, 1});
  CHECK(reserve_fixings(2, false).size() == 1);
}
