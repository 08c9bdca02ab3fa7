#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hydrosdp/stochastic.hpp"

using namespace hydro;

namespace {

StochasticParams flat_params(int reservoirs, double price, double inflow) {
  StochasticParams p;
  p.weekly_price_mean.assign(kWeeksPerYear, price);
  p.hourly_profile.assign(kHoursPerWeek, 1.0);
  p.inflow_mean.assign(reservoirs, std::vector<double>(kWeeksPerYear, inflow));
  p.reserve_price.assign(kWeeksPerYear, 0.0);
  return p;
}

}  // namespace

TEST_CASE("reference parameters validate") {
  const auto plant = reference_plant();
  const auto p = reference_params(plant);
  CHECK_NOTHROW(validate_params(p, 2));
  auto bad = p;
  bad.hourly_profile[0] += 1e-6;
  CHECK_THROWS_AS(validate_params(bad, 2), ValidationError);
  bad = p;
  bad.rho = 1.5;
  CHECK_THROWS_AS(validate_params(bad, 2), ValidationError);
}

TEST_CASE("zero volatility gives the mean week exactly") {
  const auto plant = reference_plant();
  auto p = reference_params(plant);
  p.price_sigma = p.inflow_sigma = 0.0;
  RandomStream s(3);
  const auto w = sample_week(p, 5, s);
  for (int h = 0; h < kHoursPerWeek; ++h) CHECK(w.prices[h] == p.weekly_price_mean[4] * p.hourly_profile[h]);
  for (int h = 0; h < kHoursPerWeek; ++h) CHECK(w.inflows[0][h] == p.inflow_mean[0][4] / kHoursPerWeek);
}

TEST_CASE("streams are deterministic") {
  const auto p = reference_params(reference_plant());
  auto a = RandomStream::derive(42, 3, 7);
  auto b = RandomStream::derive(42, 3, 7);
  auto c = RandomStream::derive(42, 3, 8);
  const auto wa = sample_week(p, 10, a);
  const auto wb = sample_week(p, 10, b);
  const auto wc = sample_week(p, 10, c);
  CHECK(wa.prices == wb.prices);
  CHECK(wa.inflows == wb.inflows);
  CHECK(wa.prices != wc.prices);
}

TEST_CASE("copula correlation of the weekly shocks") {
  auto p = flat_params(1, 50.0, 1e6);
  p.price_sigma = 0.25;
  p.inflow_sigma = 0.4;
  p.rho = 0.9;
  RandomStream s(11);
  std::vector<double> x, y;
  for (int i = 0; i < 10000; ++i) {
    const auto w = sample_week(p, 1, s);
    x.push_back(std::log(w.prices[0] / 50.0));
    y.push_back(std::log(w.inflows[0][0] * kHoursPerWeek / 1e6));
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  CHECK(corr >= 0.85);
  CHECK(corr <= 0.95);
}

TEST_CASE("binary tree has the documented size") {
  const auto p = reference_params(reference_plant());
  RandomStream s(1);
  const auto tree = build_price_tree(p, 10, 2, s);
  CHECK(tree.num_scenarios() == 128);
  CHECK(tree.num_nodes() == 6096);
  CHECK(tree.num_nodes() == 24 * (2 + 4 + 8 + 16 + 32 + 64 + 128));
  CHECK_NOTHROW(tree.check_structure());
  // Every bundle's members share prices up to its hour.
  for (int h = 0; h < tree.num_hours(); h += 7) {
    for (int i = tree.stage_begin(h); i < tree.stage_begin(h + 1); ++i) {
      const auto& n = tree.node(i);
      for (int s2 = n.first_scenario; s2 < n.first_scenario + n.num_scenarios; ++s2) {
        CHECK(tree.node_of(h, s2) == i);
      }
    }
  }
}

TEST_CASE("ternary tree refines at every hour") {
  const auto p = reference_params(reference_plant());
  RandomStream s(2);
  const auto tree = build_price_tree(p, 20, 3, s);
  CHECK(tree.num_scenarios() == 2187);
  CHECK_NOTHROW(tree.check_structure());
  // Independent refinement check through scenario paths.
  for (int h = 1; h < tree.num_hours(); ++h) {
    for (int sc = 0; sc < tree.num_scenarios(); sc += 13) {
      CHECK(tree.node(tree.node_of(h, sc)).parent == tree.node_of(h - 1, sc));
    }
  }
}

TEST_CASE("degenerate tree reproduces its scenario") {
  const auto p = reference_params(reference_plant());
  RandomStream s1(5), s2(5);
  const auto tree = build_price_tree(p, 3, 1, s1);
  const auto week = sample_week(p, 3, s2);
  CHECK(tree.num_scenarios() == 1);
  CHECK(tree.num_nodes() == 168);
  CHECK(tree.scenario(0).prices == week.prices);
  CHECK(tree.inflows() == week.inflows);
}

TEST_CASE("tree daily shocks preserve the conditional mean") {
  WeeklyScenario base;
  base.prices.assign(48, 40.0);
  base.inflows = {std::vector<double>(48, 0.0)};
  const auto tree = build_price_tree(base, 3, 0.3, 24);
  for (int h = 0; h < 48; h += 24) {
    double mean = 0;
    for (int i = tree.stage_begin(h); i < tree.stage_begin(h + 1); ++i) mean += tree.node(i).probability * tree.node(i).price;
    CHECK(mean == doctest::Approx(40.0).epsilon(1e-12));
  }
}

TEST_CASE("peak and off-peak means") {
  WeeklyScenario w;
  w.prices.assign(kHoursPerWeek, 40.0);
  const auto mask = default_peak_mask();
  CHECK(std::count(mask.begin(), mask.end(), true) == 60);
  auto [pk, off] = aggregate_peak_offpeak(w, mask);
  CHECK(pk == 40.0);
  CHECK(off == 40.0);
  for (int h = 0; h < kHoursPerWeek; ++h) w.prices[h] = mask[h] ? 60.0 : 20.0;
  std::tie(pk, off) = aggregate_peak_offpeak(w, mask);
  CHECK(pk == 60.0);
  CHECK(off == 20.0);

  const auto p = reference_params(reference_plant());
  const auto e = expected_week(p, 1);
  double sp = 0, so = 0;
  for (int h = 0; h < kHoursPerWeek; ++h) (mask[h] ? sp : so) += e.prices[h];
  std::tie(pk, off) = aggregate_peak_offpeak(e, mask);
  CHECK(pk == doctest::Approx(sp / 60.0));
  CHECK(off == doctest::Approx(so / 108.0));
  CHECK_THROWS(aggregate_peak_offpeak(e, std::vector<bool>(kHoursPerWeek, true)));
  CHECK_THROWS(aggregate_peak_offpeak(e, std::vector<bool>(kHoursPerWeek, false)));
}

TEST_CASE("price duration curve") {
  WeeklyScenario w;
  w.prices.assign(kHoursPerWeek, 50.0);
  auto c = make_pdc(w);
  CHECK(c.at(0.0) == 50.0);
  CHECK(c.at(168.0) == 50.0);
  CHECK(pdc_integral(c, 0, 10) == 500.0);
  CHECK(pdc_integral(c, 3, 3) == 0.0);

  for (int h = 0; h < kHoursPerWeek; ++h) w.prices[h] = h % 2 ? 30.0 : 10.0;
  c = make_pdc(w);
  CHECK(c.at(83.5) == 30.0);
  CHECK(c.at(84.0) == 10.0);
  CHECK(pdc_integral(c, 0, 168) == 3360.0);
  CHECK(pdc_integral(c, 80, 90) == 180.0);
  CHECK_THROWS(pdc_integral(c, 5, 4));
  CHECK_THROWS(pdc_integral(c, 0, 169));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (auto& x : w.prices) x = u(rng);
  c = make_pdc(w);
  const double total = std::accumulate(w.prices.begin(), w.prices.end(), 0.0);
  CHECK(pdc_integral(c, 0, 168) == doctest::Approx(total).epsilon(1e-12));
  for (double t = 0.5; t < 168; t += 1.0) CHECK(c.at(t) >= c.at(std::min(t + 1.0, 168.0)));
  auto shuffled = w;
  std::shuffle(shuffled.prices.begin(), shuffled.prices.end(), rng);
  CHECK(make_pdc(shuffled).sorted_prices() == c.sorted_prices());
}
