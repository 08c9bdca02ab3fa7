#include <random>

#include "doctest.h"
#include "hydrosdp/plant.hpp"

using namespace hydro;

TEST_CASE("reference plant is valid") {
  const auto p = reference_plant();
  CHECK(p.seasonal_reservoirs().size() == 1);
  CHECK(p.daily_reservoirs().size() == 1);
  CHECK(p.qualified_turbines().size() == 2);
  CHECK(p.pumps().size() == 1);
}

TEST_CASE("validation names the violated rule") {
  auto p = reference_plant();
  p.units[0].q_min = 70.0;
  CHECK_THROWS_WITH_AS(validate_topology(p), doctest::Contains("band does not fit"), ValidationError);

  p = reference_plant();
  p.units[1].from = "nowhere";
  CHECK_THROWS_WITH_AS(validate_topology(p), doctest::Contains("unknown reservoir"), ValidationError);

  p = reference_plant();
  p.units[2].reserve_qualified = true;
  CHECK_THROWS_AS(validate_topology(p), ValidationError);

  p = reference_plant();
  p.reservoirs[0].kind = ReservoirClass::daily;
  CHECK_THROWS_AS(validate_topology(p), ValidationError);

  p = reference_plant();
  p.units.push_back({"T9", UnitKind::turbine, "basin", "upper", 10.0, 1000.0, false, 0.0, 0.0});
  CHECK_THROWS_WITH_AS(validate_topology(p), doctest::Contains("cycle"), ValidationError);
}

TEST_CASE("energy_to_volume is linear") {
  Unit t{"t", UnitKind::turbine, "r", "", 20.0, 1800.0, false, 0.0, 0.0};
  CHECK(energy_to_volume(t, 10.0, 1.0) == 18000.0);
  CHECK(energy_to_volume(t, 0.0, 1.0) == 0.0);
  Unit pump{"p", UnitKind::pump, "", "r", 20.0, 1400.0, false, 0.0, 0.0};
  CHECK(energy_to_volume(pump, 5.0, 2.0) == 14000.0);
  CHECK_THROWS_AS(energy_to_volume(t, 21.0, 1.0), std::out_of_range);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), pw = 20.0 * u(rng);
    CHECK(energy_to_volume(t, a * pw, 1.0) == doctest::Approx(a * energy_to_volume(t, pw, 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("aggregation preserves totals and is idempotent") {
  const auto p = reference_plant();
  const auto a = aggregate_plant(p);
  REQUIRE(a.reservoirs.size() == 1);
  REQUIRE(a.turbines().size() == 1);
  REQUIRE(a.pumps().size() == 1);
  const auto& t = a.units[a.turbines()[0]];
  const auto& pump = a.units[a.pumps()[0]];
  CHECK(a.reservoirs[0].v_max == p.reservoirs[0].v_max + p.reservoirs[1].v_max);
  CHECK(t.p_max == 180.0);
  CHECK(t.q_min == 30.0);
  CHECK(t.q_max == 35.0);
  CHECK(t.reserve_qualified);
  // Full-output flow is preserved: 100*1800 + 80*2250 = 180 * k.
  CHECK(t.k * t.p_max == doctest::Approx(100.0 * 1800.0 + 80.0 * 2250.0));
  CHECK(pump.from.empty());
  CHECK(pump.k == 1400.0);

  const auto b = aggregate_plant(a);
  CHECK(b.units.size() == a.units.size());
  CHECK(b.reservoirs[0].v_max == a.reservoirs[0].v_max);
  CHECK(b.units[0].k == a.units[0].k);
  CHECK_NOTHROW(validate_topology(b));
}

TEST_CASE("aggregation without qualified turbines gives a zero band") {
  auto p = reference_plant();
  for (auto& u : p.units) {
    u.reserve_qualified = false;
    u.q_min = u.q_max = 0.0;
  }
  const auto a = aggregate_plant(p);
  CHECK(a.units[a.turbines()[0]].q_max == 0.0);
}
