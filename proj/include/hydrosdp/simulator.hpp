#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "hydrosdp/plant.hpp"
#include "hydrosdp/stochastic.hpp"
#include "hydrosdp/valuation.hpp"

namespace hydro {

struct DispatchOptions {
  double gen_threshold_margin = 0.0;
  double pump_threshold_margin = 0.0;
  /// MWh per m3 of the reservoir the water value refers to. NaN selects the
  /// best path from the seasonal reservoir to the tailwater.
  double reference_energy = std::numeric_limits<double>::quiet_NaN();
};

struct SimConfig {
  int n_samples = 100;
  std::uint64_t seed = 1;
  bool reserves_enabled = false;
  DispatchOptions dispatch;
  bool log_schedules = false;
  /// Keep every weekly schedule in SimulationResult::schedules.
  bool keep_schedules = false;
};

/// Price thresholds in EUR/MWh per unit for a water value of the reference
/// reservoir. Every reservoir's water is valued in proportion to the energy
/// it can still produce on its way down. A turbine generates above its
/// threshold; a pump runs below its.
std::vector<double> dispatch_thresholds(const PlantTopology& plant, double water_value, double reference_energy);

/// Hour by hour operation of one week.
struct WeekSchedule {
  std::vector<std::vector<double>> power;   // MW, [unit][hour]
  std::vector<std::vector<double>> spill;   // m3, [reservoir][hour]
  std::vector<std::vector<double>> volume;  // m3 at hour end, [reservoir][hour]
  std::vector<double> m;                    // MW, generation minus pumping
  double energy_profit = 0.0;               // EUR from the pool
  double reserve_income = 0.0;
  /// Committed hours where the set point could not be held.
  int band_shortfalls = 0;

  [[nodiscard]] double profit() const { return energy_profit + reserve_income; }
};

/// Committed turbines hold q_min + q_max first. Turbines then generate at
/// full headroom when the price beats their threshold and pumps run when it
/// is below theirs, limited by the water above what the remaining
/// obligations need, by the room downstream and by power. Water above v_max
/// at the end of an hour is spilled.
WeekSchedule dispatch_heuristic(const PlantTopology& plant, const std::vector<double>& start,
                                const WeeklyScenario& scenario, double water_value, const std::vector<int>& q,
                                const DispatchOptions& opt = {});

/// Water each reservoir must keep at the start of an hour with `hours_left`
/// committed hours to go, when nothing flows in except committed releases
/// from upstream.
std::vector<double> obligation_reserve(const PlantTopology& plant, const std::vector<int>& q, int hours_left);

struct OfferCandidate {
  std::vector<int> q;
  bool feasible = false;   // obligations can be met without further inflow
  double W = 0.0;          // net seasonal outflow of the heuristic on the forecast
  double stage = 0.0;      // forecast LP value at W (heuristic profit when the LP is infeasible)
  bool from_lp = false;
  double future = 0.0;     // theta of the next week at the heuristic's end state
  double total = kInfeasible;  // stage + reserve income + future
};

/// Weekly reserve offering on the point forecast. One solver per week is
/// kept and every solve starts from the same stored basis, so decisions do
/// not depend on the order of calls.
class OfferPlanner {
 public:
  OfferPlanner(const PlantTopology& plant, const ValueFunction& vf, const StochasticParams& params,
               DispatchOptions opt = {});
  ~OfferPlanner();
  OfferPlanner(const OfferPlanner&) = delete;
  OfferPlanner& operator=(const OfferPlanner&) = delete;

  /// Every fixing in lexicographic order.
  std::vector<OfferCandidate> candidates(int week, const std::vector<double>& volumes);
  /// Best feasible candidate, the lexicographically smallest on ties.
  std::vector<int> decide(int week, const std::vector<double>& volumes);

 private:
  struct Week;
  Week& week_cache(int week);

  const PlantTopology* plant_;
  const ValueFunction* vf_;
  const StochasticParams* params_;
  DispatchOptions opt_;
  std::vector<std::unique_ptr<Week>> weeks_;
};

/// Zero vector when reserves are disabled, otherwise OfferPlanner::decide.
std::vector<int> reserve_offer_decision(const PlantTopology& plant, const ValueFunction& vf,
                                        const StochasticParams& params, int week, const std::vector<double>& volumes,
                                        bool reserves_enabled, const DispatchOptions& opt = {});

/// Filling the value function is indexed by: the total stored volume for
/// methods 1 and 2, the seasonal reservoir otherwise.
double value_state(const PlantTopology& plant, Method method, const std::vector<double>& volumes);

/// Water value of the value function at the start of `week`: the slope of
/// theta for the following week at the current state.
double start_water_value(const PlantTopology& plant, const ValueFunction& vf, int week,
                         const std::vector<double>& volumes);

struct ProfitStats {
  double expected = 0.0;
  double rel_std = 0.0;  // sample standard deviation over the mean
  double cvar10 = 0.0;   // mean of the ceil(n/10) smallest profits
};

ProfitStats profit_statistics(const std::vector<double>& profits);

struct HourLog {
  int sample, week, hour;
  double price, u, p, s, m, filling;
};

struct SimulationResult {
  std::vector<double> profits;                     // EUR per sample
  std::vector<std::vector<double>> filling_paths;  // seasonal m3, [sample][week 0..T]
  std::vector<double> spill_total;                 // m3 per sample
  std::vector<double> max_balance_residual;        // m3 per sample, all reservoirs
  std::vector<std::vector<std::vector<int>>> offers;  // [sample][week] fixing
  long long band_shortfalls = 0;
  std::vector<HourLog> log;
  std::vector<std::vector<WeekSchedule>> schedules;  // [sample][week - 1] with keep_schedules
  ProfitStats stats;
};

/// Stream of the realized week of one sample.
RandomStream simulation_stream(std::uint64_t seed, int sample, int week);

SimulationResult simulate_year(const PlantTopology& plant, const ValueFunction& vf, const StochasticParams& params,
                               const SimConfig& config);

}  // namespace hydro
