#include "hydrosdp/plant.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace hydro {

int PlantTopology::reservoir_index(const std::string& id) const {
  if (id.empty()) return -1;
  for (std::size_t i = 0; i < reservoirs.size(); ++i) {
    if (reservoirs[i].id == id) return static_cast<int>(i);
  }
  throw ValidationError("unknown reservoir '" + id + "'");
}

namespace {

template <class Pred>
std::vector<int> indices_where(std::size_t n, Pred pred) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (pred(i)) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

std::vector<int> PlantTopology::seasonal_reservoirs() const {
  return indices_where(reservoirs.size(), [&](std::size_t i) { return reservoirs[i].kind == ReservoirClass::seasonal; });
}

std::vector<int> PlantTopology::daily_reservoirs() const {
  return indices_where(reservoirs.size(), [&](std::size_t i) { return reservoirs[i].kind == ReservoirClass::daily; });
}

std::vector<int> PlantTopology::turbines() const {
  return indices_where(units.size(), [&](std::size_t i) { return units[i].kind == UnitKind::turbine; });
}

std::vector<int> PlantTopology::pumps() const {
  return indices_where(units.size(), [&](std::size_t i) { return units[i].kind == UnitKind::pump; });
}

std::vector<int> PlantTopology::qualified_turbines() const {
  return indices_where(units.size(), [&](std::size_t i) {
    return units[i].kind == UnitKind::turbine && units[i].reserve_qualified;
  });
}

bool PlantTopology::is_inflow_point(int reservoir) const {
  const auto& id = reservoirs.at(reservoir).id;
  return std::find(inflow_points.begin(), inflow_points.end(), id) != inflow_points.end();
}

double PlantTopology::total_v_max() const {
  double v = 0.0;
  for (const auto& r : reservoirs) v += r.v_max;
  return v;
}

PlantTopology validate_topology(const PlantTopology& plant) {
  auto fail = [](const std::string& what, const std::string& id) {
    throw ValidationError(what + " (" + id + ")");
  };
  std::set<std::string> ids;
  for (const auto& r : plant.reservoirs) {
    if (r.id.empty()) fail("reservoir without id", "?");
    if (!ids.insert(r.id).second) fail("duplicate id", r.id);
    if (!(r.v_max >= 0.0) || !std::isfinite(r.v_max)) fail("v_max must be finite and >= 0", r.id);
    if (!(r.v_init >= 0.0 && r.v_init <= r.v_max)) fail("v_init outside [0, v_max]", r.id);
    if (!(r.spill_max >= 0.0) || !std::isfinite(r.spill_max)) fail("spill_max must be finite and >= 0", r.id);
  }
  if (plant.seasonal_reservoirs().empty()) fail("plant needs at least one seasonal reservoir", plant.name);

  auto known = [&](const std::string& id) { return id.empty() || ids.count(id) > 0; };
  std::set<std::string> unit_ids;
  for (const auto& u : plant.units) {
    if (u.id.empty()) fail("unit without id", "?");
    if (!unit_ids.insert(u.id).second || ids.count(u.id)) fail("duplicate id", u.id);
    if (!known(u.from)) fail("unit references unknown reservoir '" + u.from + "'", u.id);
    if (!known(u.to)) fail("unit references unknown reservoir '" + u.to + "'", u.id);
    if (!(u.p_max > 0.0) || !std::isfinite(u.p_max)) fail("p_max must be > 0", u.id);
    if (!(u.k > 0.0) || !std::isfinite(u.k)) fail("k must be > 0", u.id);
    if (!(u.q_min >= 0.0) || !(u.q_max >= 0.0)) fail("q_min and q_max must be >= 0", u.id);
    if (u.q_min + 2.0 * u.q_max > u.p_max) fail("band does not fit: q_min + 2 q_max > p_max", u.id);
    if (u.from == u.to) fail("unit source and sink coincide", u.id);
    if (u.kind == UnitKind::turbine) {
      if (u.from.empty()) fail("turbine needs a source reservoir", u.id);
    } else {
      if (u.to.empty()) fail("pump needs a target reservoir", u.id);
      if (u.reserve_qualified) fail("pumps cannot be reserve qualified", u.id);
    }
  }
  for (const auto& id : plant.inflow_points) {
    if (!ids.count(id)) fail("inflow point references unknown reservoir", id);
  }

  // Turbine routing must be acyclic; pumps legitimately point upstream.
  const int nr = static_cast<int>(plant.reservoirs.size());
  std::vector<std::vector<int>> down(nr);
  for (const auto& u : plant.units) {
    if (u.kind != UnitKind::turbine || u.to.empty()) continue;
    down[plant.reservoir_index(u.from)].push_back(plant.reservoir_index(u.to));
  }
  std::vector<int> mark(nr, 0);
  std::function<void(int)> visit = [&](int r) {
    if (mark[r] == 2) return;
    if (mark[r] == 1) fail("turbine routing contains a cycle", plant.reservoirs[r].id);
    mark[r] = 1;
    for (int s : down[r]) visit(s);
    mark[r] = 2;
  };
  for (int r = 0; r < nr; ++r) visit(r);
  return plant;
}

double energy_to_volume(const Unit& unit, double power, double hours) {
  if (!(power >= 0.0 && power <= unit.p_max)) {
    throw std::out_of_range("power outside [0, p_max] for unit " + unit.id);
  }
  if (!(hours >= 0.0)) throw std::out_of_range("negative duration");
  return unit.k * power * hours;
}

namespace {

bool is_aggregated(const PlantTopology& plant) {
  if (plant.reservoirs.size() != 1 || plant.reservoirs[0].kind != ReservoirClass::seasonal) return false;
  if (plant.turbines().size() > 1 || plant.pumps().size() > 1) return false;
  for (const auto& u : plant.units) {
    if (u.kind == UnitKind::turbine && !u.to.empty()) return false;
    if (u.kind == UnitKind::pump && !u.from.empty()) return false;
  }
  return true;
}

}  // namespace

PlantTopology aggregate_plant(const PlantTopology& plant) {
  validate_topology(plant);
  if (is_aggregated(plant)) return plant;

  PlantTopology agg;
  agg.name = plant.name + "-aggregated";
  Reservoir r;
  r.id = "aggregate";
  r.kind = ReservoirClass::seasonal;
  for (const auto& src : plant.reservoirs) {
    r.v_max += src.v_max;
    r.v_init += src.v_init;
    r.spill_max += src.spill_max;
  }
  agg.reservoirs.push_back(r);
  if (!plant.inflow_points.empty()) agg.inflow_points.push_back(r.id);

  auto merge = [&](UnitKind kind, const char* id) {
    Unit out;
    out.id = id;
    out.kind = kind;
    double flow = 0.0;
    bool any = false;
    for (const auto& u : plant.units) {
      if (u.kind != kind) continue;
      any = true;
      out.p_max += u.p_max;
      flow += u.p_max * u.k;
      if (u.reserve_qualified) {
        out.reserve_qualified = true;
        out.q_min += u.q_min;
        out.q_max += u.q_max;
      }
    }
    if (!any) return;
    out.k = flow / out.p_max;
    if (kind == UnitKind::turbine) {
      out.from = r.id;
    } else {
      out.to = r.id;
    }
    agg.units.push_back(out);
  };
  merge(UnitKind::turbine, "turbine");
  merge(UnitKind::pump, "pump");
  return validate_topology(agg);
}

PlantTopology reference_plant() {
  PlantTopology p;
  p.name = "reference";
  p.reservoirs = {
      {"upper", ReservoirClass::seasonal, 300e6, 150e6, 2.0e5},
      {"basin", ReservoirClass::daily, 2e6, 0.0, 1.0e5},
  };
  p.units = {
      {"T3", UnitKind::turbine, "upper", "basin", 100.0, 1800.0, true, 20.0, 20.0},
      {"T4", UnitKind::turbine, "basin", "", 80.0, 2250.0, true, 10.0, 15.0},
      {"P5", UnitKind::pump, "basin", "upper", 60.0, 1400.0, false, 0.0, 0.0},
  };
  p.inflow_points = {"upper", "basin"};
  return validate_topology(p);
}

}  // namespace hydro
