#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hydrosdp/intrastage.hpp"
#include "hydrosdp/plant.hpp"
#include "hydrosdp/stochastic.hpp"

namespace hydro {

enum class Method { m1 = 1, m2 = 2, m3 = 3, m4 = 4 };

const char* to_string(Method m);
/// Accepts 1-4, "M1".."M4" or "m1".."m4".
Method parse_method(const std::string& text);
[[nodiscard]] inline bool uses_aggregated_plant(Method m) { return m == Method::m1 || m == Method::m2; }

struct Grids {
  std::vector<double> filling;    // m3, seasonal (or aggregated) reservoir
  std::vector<double> discharge;  // W levels, m3 per week
};

/// N_v fillings in [0, v_max] and N_W discharges from the largest weekly
/// pumped volume (negative) to the largest weekly release. The level nearest
/// zero is moved to exactly 0.
/// The plant is aggregated first for methods 1 and 2.
Grids make_grids(const PlantTopology& plant, const StochasticParams& params, Method method, int n_v, int n_w);

struct ValueFunction {
  Method method = Method::m1;
  bool reserves_enabled = false;
  std::vector<double> filling;
  /// theta[t - 1][i] for weeks t = 1..T+1; the last row is the terminal value.
  std::vector<std::vector<double>> theta;

  [[nodiscard]] int num_weeks() const { return static_cast<int>(theta.size()) - 1; }
  [[nodiscard]] double v_max() const { return filling.back(); }
};

struct WaterValueTable {
  std::vector<double> filling_mid;
  /// values[t - 1][i] in EUR/m3 for weeks t = 1..T+1.
  std::vector<std::vector<double>> values;
};

struct ValuationConfig {
  Method method = Method::m1;
  bool reserves_enabled = false;
  int n_scenarios = 10;
  int branching = 2;              // method 4 tree branching per day
  std::uint64_t seed = 1;
  /// EUR per m3 at the end of the horizon; NaN selects the mean yearly
  /// price divided by the plant's effective turbine conversion.
  double terminal_value = std::numeric_limits<double>::quiet_NaN();
  bool per_scenario_q = false;    // method 3 only
  lp::SolverOptions solver;
  /// Called after every week of the backward pass.
  std::function<void(int week, double seconds)> progress;
};

struct ValuationStats {
  long long stage_evaluations = 0;  // LP solves or closed-form evaluations
  double seconds = 0.0;
};

/// MWh produced by one m3 of seasonal water on its best turbine path down
/// to the tailwater (the aggregated plant for methods 1 and 2).
double energy_per_volume(const PlantTopology& plant, Method method);

/// Mean price of the year times energy_per_volume.
double default_terminal_value(const PlantTopology& plant, const StochasticParams& params, Method method);

/// Stream used for scenario i of week t during valuation.
RandomStream valuation_stream(std::uint64_t seed, int week, int scenario);

/// Expected stage value for each W level of one week (kInfeasible where any
/// scenario cannot meet W).
/// warm_start carries simplex bases of the hourly methods from one week to
/// the next.
std::vector<double> stage_value_table(const PlantTopology& plant, const StochasticParams& params,
                                      const Grids& grids, const ValuationConfig& config, int week,
                                      long long* evaluations = nullptr,
                                      std::vector<std::vector<lp::Basis>>* warm_start = nullptr);

/// theta_t(v) = max over W of [stage value(W) + theta_{t+1}(v - W)], with the
/// ending filling required to be >= 0 and water above v_max spilled. Ties go
/// to the smaller |W|.
ValueFunction backward_induction(const PlantTopology& plant, const StochasticParams& params, const Grids& grids,
                                 const ValuationConfig& config, ValuationStats* stats = nullptr);

/// One backward step, exposed for testing.
std::vector<double> bellman_step(const std::vector<double>& filling, const std::vector<double>& discharge,
                                 const std::vector<double>& stage_values, const std::vector<double>& next_theta);

/// Piecewise-linear interpolation on the filling grid.
double interpolate_value(const ValueFunction& vf, int week, double v);

/// Forward differences of theta per week.
WaterValueTable water_values(const ValueFunction& vf);

/// Slope of theta_t at filling v (the forward difference of the cell that
/// contains v; the last cell at v_max).
double water_value_at(const ValueFunction& vf, int week, double v);

/// Throws std::logic_error when theta decreases in filling somewhere.
void check_monotone(const ValueFunction& vf, double tolerance = 1e-9);

}  // namespace hydro
