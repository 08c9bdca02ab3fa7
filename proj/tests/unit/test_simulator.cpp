#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hydrosdp/simulator.hpp"

using namespace hydro;

namespace {

PlantTopology pumped_single(double v_max, double v_init) {
  PlantTopology p;
  p.name = "single";
  p.reservoirs = {{"S", ReservoirClass::seasonal, v_max, v_init, 0.0}};
  p.units = {{"T", UnitKind::turbine, "S", "", 100.0, 1800.0, false, 0.0, 0.0},
             {"P", UnitKind::pump, "", "S", 50.0, 1400.0, false, 0.0, 0.0}};
  p.inflow_points = {"S"};
  return validate_topology(p);
}

WeeklyScenario dry_week(std::vector<double> prices, std::size_t reservoirs, double reserve_price = 0.0) {
  WeeklyScenario s;
  s.inflows.assign(reservoirs, std::vector<double>(prices.size(), 0.0));
  s.prices = std::move(prices);
  s.reserve_price = reserve_price;
  return s;
}

StochasticParams first_weeks(StochasticParams p, int n) {
  p.weekly_price_mean.resize(n);
  p.reserve_price.resize(n);
  for (auto& row : p.inflow_mean) row.resize(n);
  return p;
}

ValueFunction flat_value_function(Method m, double v_max, int weeks, double slope) {
  ValueFunction vf;
  vf.method = m;
  for (int i = 0; i <= 4; ++i) vf.filling.push_back(v_max * i / 4);
  vf.theta.assign(weeks + 1, {});
  for (auto& row : vf.theta) {
    for (double v : vf.filling) row.push_back(slope * v);
  }
  return vf;
}

// Largest balance residual of a schedule, recomputed from its flows.
double schedule_residual(const PlantTopology& plant, const std::vector<double>& start, const WeeklyScenario& s,
                         const WeekSchedule& w) {
  double worst = 0.0;
  for (std::size_t r = 0; r < plant.reservoirs.size(); ++r) {
    double v = start[r];
    for (int h = 0; h < s.num_hours(); ++h) {
      v += s.inflows[r][h] - w.spill[r][h];
      for (std::size_t k = 0; k < plant.units.size(); ++k) {
        const auto& u = plant.units[k];
        if (u.from == plant.reservoirs[r].id) v -= u.k * w.power[k][h];
        if (u.to == plant.reservoirs[r].id) v += u.k * w.power[k][h];
      }
      worst = std::max(worst, std::abs(v - w.volume[r][h]));
      v = w.volume[r][h];
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("thresholds follow the water value") {
  const auto plant = pumped_single(1e9, 5e8);
  const auto thr = dispatch_thresholds(plant, 0.03, 1.0 / 1800.0);
  CHECK(thr[0] == doctest::Approx(54.0));
  CHECK(thr[1] == doctest::Approx(42.0));
  DispatchOptions opt;
  opt.reference_energy = 1.0 / 1800.0;
  const auto w = dispatch_heuristic(plant, {5e8}, dry_week({60.0, 50.0, 40.0}, 1), 0.03, {}, opt);
  CHECK(w.power[0] == std::vector<double>{100.0, 0.0, 0.0});
  CHECK(w.power[1] == std::vector<double>{0.0, 0.0, 50.0});
  CHECK(w.energy_profit == doctest::Approx(60.0 * 100.0 - 40.0 * 50.0));

  // Every MWh-equivalent of the reference plant's cascade is valued alike.
  const auto ref = reference_plant();
  const auto t = dispatch_thresholds(ref, 0.02, 1.0 / 1800.0 + 1.0 / 2250.0);
  CHECK(t[0] == doctest::Approx(20.0));
  CHECK(t[1] == doctest::Approx(20.0));
  CHECK(t[2] == doctest::Approx(20.0 * 1400.0 / 1800.0));
}

TEST_CASE("zero water value generates at any positive price and never pumps") {
  const auto plant = pumped_single(1e9, 5e8);
  const auto w = dispatch_heuristic(plant, {5e8}, dry_week({0.0, 1.0, 30.0, 0.0}, 1), 0.0, {});
  CHECK(w.power[0] == std::vector<double>{0.0, 100.0, 100.0, 0.0});
  CHECK(w.power[1] == std::vector<double>(4, 0.0));
}

TEST_CASE("empty reservoirs without inflow stay idle") {
  const auto plant = reference_plant();
  const auto w = dispatch_heuristic(plant, {0.0, 0.0}, dry_week(std::vector<double>(kHoursPerWeek, 80.0), 2), 0.0,
                                    {0, 0});
  for (double m : w.m) CHECK(m == 0.0);
  CHECK(w.profit() == 0.0);
}

TEST_CASE("committed turbines hold the band and the water balances") {
  const auto plant = reference_plant();
  const auto params = reference_params(plant);
  auto stream = RandomStream::derive(9, 1);
  const auto s = sample_week(params, 20, stream);
  for (double wv : {0.0, 0.04, 0.2}) {
    const std::vector<double> start{150e6, 1e6};
    const auto w = dispatch_heuristic(plant, start, s, wv, {1, 1});
    CHECK(w.band_shortfalls == 0);
    for (int h = 0; h < kHoursPerWeek; ++h) {
      CHECK(w.power[0][h] >= 40.0 - 1e-9);
      CHECK(w.power[0][h] <= 80.0 + 1e-9);
      CHECK(w.power[1][h] >= 25.0 - 1e-9);
      CHECK(w.power[1][h] <= 65.0 + 1e-9);
      for (std::size_t r = 0; r < 2; ++r) {
        CHECK(w.volume[r][h] >= -1e-9);
        CHECK(w.volume[r][h] <= plant.reservoirs[r].v_max);
        if (w.spill[r][h] > 0.0) CHECK(w.volume[r][h] == plant.reservoirs[r].v_max);
      }
    }
    CHECK(schedule_residual(plant, start, s, w) < 1e-6 * 300e6);
    CHECK(w.reserve_income == doctest::Approx(35.0 * s.reserve_price * 168));
  }
}

TEST_CASE("obligations never run a reservoir dry") {
  const auto plant = reference_plant();
  // T3 committed alone needs 72000 m3 per hour from the top.
  const auto keep = obligation_reserve(plant, {1, 0}, 168);
  CHECK(keep[0] == doctest::Approx(168 * 72000.0));
  CHECK(keep[1] == 0.0);
  const auto both = obligation_reserve(plant, {1, 1}, 10);
  CHECK(both[1] == 0.0);
  CHECK(obligation_reserve(plant, {0, 1}, 10)[1] == doctest::Approx(10 * 25.0 * 2250.0));
  const std::vector<double> start{keep[0], 0.0};
  const auto w = dispatch_heuristic(plant, start, dry_week(std::vector<double>(168, 500.0), 2), 0.0, {1, 0});
  CHECK(w.band_shortfalls == 0);
  for (double p : w.power[0]) CHECK(p >= 40.0 - 1e-9);
}

TEST_CASE("profit statistics") {
  std::vector<double> ten(10);
  std::iota(ten.begin(), ten.end(), 1.0);
  auto st = profit_statistics(ten);
  CHECK(st.expected == doctest::Approx(5.5));
  CHECK(st.cvar10 == doctest::Approx(1.0));
  CHECK(st.rel_std == doctest::Approx(std::sqrt(55.0 / 6.0) / 5.5));
  st = profit_statistics(std::vector<double>(7, 3.0));
  CHECK(st.rel_std == 0.0);
  CHECK(st.cvar10 == 3.0);
  CHECK_THROWS_AS(profit_statistics({}), std::invalid_argument);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(100.0, 30.0);
  std::vector<double> xs(100);
  for (auto& x : xs) x = n(rng);
  st = profit_statistics(xs);
  auto sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  double low = 0.0;
  for (int i = 0; i < 10; ++i) low += sorted[i] / 10.0;
  CHECK(st.cvar10 == doctest::Approx(low).epsilon(1e-12));
  CHECK(st.cvar10 <= st.expected);
}

TEST_CASE("reserve offers follow the reserve price") {
  const auto plant = reference_plant();
  auto params = first_weeks(reference_params(plant), 2);
  const auto vf = flat_value_function(Method::m3, 300e6, 2, 0.04);
  const std::vector<double> vol{150e6, 0.0};
  params.reserve_price = {0.0, 0.0};
  CHECK(reserve_offer_decision(plant, vf, params, 1, vol, true) == std::vector<int>{0, 0});
  CHECK(reserve_offer_decision(plant, vf, params, 1, vol, false) == std::vector<int>{0, 0});
  params.reserve_price = {1e5, 1e5};
  CHECK(reserve_offer_decision(plant, vf, params, 1, vol, true) == std::vector<int>{1, 1});
  // Too little water for the committed set point of the upper turbine.
  CHECK(reserve_offer_decision(plant, vf, params, 1, {1e6, 0.0}, true) == std::vector<int>{0, 0});
}

TEST_CASE("the offer is the best of all fixings") {
  const auto plant = reference_plant();
  auto params = first_weeks(reference_params(plant), 2);
  params.reserve_price = {7.0, 7.0};
  const auto vf = flat_value_function(Method::m3, 300e6, 2, 0.045);
  const std::vector<double> vol{120e6, 0.5e6};
  OfferPlanner planner(plant, vf, params);
  const auto cands = planner.candidates(1, vol);
  REQUIRE(cands.size() == 4);
  // The lower turbine alone would drain the basin.
  CHECK_FALSE(cands[1].feasible);
  const OfferCandidate* best = nullptr;
  for (const auto& c : cands) {
    if (c.feasible && (!best || c.total > best->total)) best = &c;
  }
  CHECK(planner.decide(1, vol) == best->q);
  // Calls in a different order give the same numbers.
  OfferPlanner again(plant, vf, params);
  again.candidates(2, vol);
  const auto repeat = again.candidates(1, vol);
  for (std::size_t f = 0; f < 4; ++f) CHECK(repeat[f].total == cands[f].total);

  // Independent rebuild of each forecast LP from scratch.
  const auto forecast = expected_week(params, 1);
  const auto tree = degenerate_tree(forecast);
  for (const auto& c : cands) {
    if (!c.feasible || !c.from_lp) continue;
    BundleLp::Options o;
    o.daily_start = vol;
    o.empty_at_end = false;
    BundleLp lp(plant, tree, o);
    lp.set_q(c.q);
    CHECK(lp.solve(c.W) == doctest::Approx(c.stage).epsilon(1e-7));
    CHECK(c.total == doctest::Approx(c.stage + reserve_income(plant, c.q, 7.0, 168) + c.future));
  }
}

TEST_CASE("zero prices: no profit and cumulative inflow capped at capacity") {
  const auto plant = reference_plant();
  auto params = first_weeks(reference_params(plant), 6);
  for (auto& c : params.weekly_price_mean) c = 0.0;
  for (auto& c : params.reserve_price) c = 0.0;
  for (auto& x : params.inflow_mean[0]) x *= 40.0;
  const auto vf = flat_value_function(Method::m3, 300e6, 6, 0.0);
  SimConfig cfg;
  cfg.n_samples = 3;
  cfg.reserves_enabled = true;
  const auto r = simulate_year(plant, vf, params, cfg);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.profits[i] == 0.0);
    double v = plant.reservoirs[0].v_init;
    for (int t = 1; t <= 6; ++t) {
      auto stream = simulation_stream(cfg.seed, i, t);
      v = std::min(300e6, v + sample_week(params, t, stream).weekly_inflow(0));
      CHECK(r.filling_paths[i][t] == doctest::Approx(v).epsilon(1e-12));
    }
  }
  CHECK(r.spill_total[0] > 0.0);
}

TEST_CASE("simulation is reproducible and conserves water") {
  const auto plant = reference_plant();
  const auto params = first_weeks(reference_params(plant), 4);
  for (Method m : {Method::m1, Method::m3}) {
    ValuationConfig vc;
    vc.method = m;
    vc.reserves_enabled = true;
    vc.n_scenarios = 2;
    const auto vf = backward_induction(plant, params, make_grids(plant, params, m, 6, 7), vc);
    SimConfig cfg;
    cfg.n_samples = 4;
    cfg.seed = 12;
    cfg.reserves_enabled = true;
    cfg.log_schedules = true;
    const auto a = simulate_year(plant, vf, params, cfg);
    const auto b = simulate_year(plant, vf, params, cfg);
    CHECK(a.profits == b.profits);
    CHECK(a.filling_paths == b.filling_paths);
    CHECK(a.offers == b.offers);
    CHECK(a.band_shortfalls == 0);
    CHECK(a.log.size() == 4u * 4 * 168);
    for (double res : a.max_balance_residual) CHECK(res < 1e-6 * 300e6);
    for (const auto& path : a.filling_paths) {
      CHECK(path.size() == 5);
      for (double v : path) {
        CHECK(v >= 0.0);
        CHECK(v <= 300e6);
      }
    }
    cfg.seed = 13;
    CHECK(simulate_year(plant, vf, params, cfg).profits != a.profits);
  }
}
