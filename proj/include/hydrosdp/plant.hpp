#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hydro {

inline constexpr int kHoursPerWeek = 168;
inline constexpr int kWeeksPerYear = 52;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ReservoirClass { seasonal, daily };

struct Reservoir {
  std::string id;
  ReservoirClass kind = ReservoirClass::daily;
  double v_max = 0.0;      // m3
  double v_init = 0.0;     // m3
  double spill_max = 0.0;  // m3/h; spilled water leaves the plant
};

enum class UnitKind { turbine, pump };

/// One generating or pumping unit with a linear water-energy conversion.
/// An empty reservoir reference means the tailwater (turbine sink) or the
/// infinite lower basin (pump source).
struct Unit {
  std::string id;
  UnitKind kind = UnitKind::turbine;
  std::string from;
  std::string to;
  double p_max = 0.0;  // MW
  double k = 0.0;      // m3/MWh
  bool reserve_qualified = false;
  double q_min = 0.0;  // MW
  double q_max = 0.0;  // MW
};

struct PlantTopology {
  std::string name;
  std::vector<Reservoir> reservoirs;
  std::vector<Unit> units;
  /// Reservoirs that receive natural inflow.
  std::vector<std::string> inflow_points;

  /// Index of the reservoir with this id, -1 for the empty id, throws when
  /// the id is unknown.
  [[nodiscard]] int reservoir_index(const std::string& id) const;
  [[nodiscard]] std::vector<int> seasonal_reservoirs() const;
  [[nodiscard]] std::vector<int> daily_reservoirs() const;
  [[nodiscard]] std::vector<int> turbines() const;
  [[nodiscard]] std::vector<int> pumps() const;
  [[nodiscard]] std::vector<int> qualified_turbines() const;
  [[nodiscard]] bool is_inflow_point(int reservoir) const;
  [[nodiscard]] double total_v_max() const;
};

/// Returns the plant unchanged when every invariant holds; otherwise throws a
/// ValidationError naming the violated rule and the entity.
PlantTopology validate_topology(const PlantTopology& plant);

/// Water moved by running the unit at `power` MW for `hours` hours.
double energy_to_volume(const Unit& unit, double power, double hours);

/// Single reservoir, one turbine, one pump drawing from an infinite lower
/// basin. Turbine and pump conversions are p_max-weighted means so total
/// flow at full output is preserved. Already aggregated plants are returned
/// unchanged.
PlantTopology aggregate_plant(const PlantTopology& plant);

/// Synthetic two-reservoir plant: seasonal upper storage feeding a daily
/// basin through a qualified turbine, a second qualified turbine below the
/// basin and a pump lifting from the basin back to the seasonal storage.
PlantTopology reference_plant();

}  // namespace hydro
