#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hydrosdp/linear_program.hpp"
#include "hydrosdp/plant.hpp"
#include "hydrosdp/simplex.hpp"
#include "hydrosdp/stochastic.hpp"

namespace hydro {

inline constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

/// Hourly (M1-M3) or per-bundle (M4) operation of one week.
struct Schedule {
  std::vector<int> node_hour;                     // hour of every node
  std::vector<double> node_probability;
  std::vector<std::vector<double>> unit_power;    // MW, [unit][node]
  std::vector<std::vector<double>> spill;         // m3/h, [reservoir][node]; daily reservoirs only
  std::vector<std::vector<double>> volume;        // m3 at hour end, [reservoir][node]; daily only
  std::vector<double> m;                          // MW generated minus pumped, per node
  std::vector<double> seasonal_spill;             // m3 per week, per scenario
};

struct StageResult {
  double value = kInfeasible;  // EUR, expected profit of the week including reserve pay
  std::vector<int> q;          // per qualified turbine in plant order
  std::optional<Schedule> schedule;

  [[nodiscard]] bool feasible() const { return value != kInfeasible; }
};

struct IntrastageOptions {
  bool reserves_enabled = false;
  /// M3: pick q per scenario instead of one here-and-now q for the set.
  bool per_scenario_q = false;
  bool keep_schedule = false;
  std::vector<bool> peak_mask = default_peak_mask();
  lp::SolverOptions solver;
};

/// All 0/1 vectors over n qualified turbines in lexicographic order, the
/// zero vector first. Only the zero vector when reserves are disabled.
std::vector<std::vector<int>> reserve_fixings(int n, bool reserves_enabled);

/// Weekly reserve remuneration for a fixing.
double reserve_income(const PlantTopology& plant, const std::vector<int>& q, double reserve_price, int hours);

// ---- aggregate methods (aggregated plant) ----

StageResult method1_stage_value(const PlantTopology& aggregated, const WeeklyScenario& s, double W,
                                const IntrastageOptions& opt = {});

/// The weekly LP of method 1; q is the last variable when reserves are on.
lp::LinearProgram method1_lp(const PlantTopology& aggregated, const WeeklyScenario& s, double W,
                             const IntrastageOptions& opt);

StageResult method2_stage_value(const PlantTopology& aggregated, const WeeklyScenario& s, double W,
                                const IntrastageOptions& opt = {});

// ---- hourly methods (full plant) ----

/// Deterministic equivalent over a scenario tree. A degenerate tree gives the
/// deterministic hourly problem. Variables per node: every unit's power,
/// spill and end volume of every daily reservoir; one weekly spill of the
/// seasonal reservoir per scenario. Daily reservoirs start and end the week
/// empty unless told otherwise.
class BundleLp {
 public:
  struct Options {
    /// Start volumes of the daily reservoirs (plant order; seasonal entries
    /// ignored). Empty means all zero.
    std::vector<double> daily_start;
    /// When false, daily reservoirs may end the week at any filling.
    bool empty_at_end = true;
    lp::SolverOptions solver;
  };

  BundleLp(const PlantTopology& plant, const ScenarioTree& tree, Options options);
  BundleLp(const PlantTopology& plant, const ScenarioTree& tree);

  /// Applies the band bounds of a reserve fixing (per qualified turbine).
  void set_q(const std::vector<int>& q);
  /// Replaces the start volumes of the daily reservoirs (plant order).
  void set_daily_start(const std::vector<double>& start);
  /// Stage value without the reserve income; kInfeasible when W cannot be met.
  double solve(double W);
  [[nodiscard]] const lp::Solution& last_solution() const { return solution_; }
  [[nodiscard]] Schedule schedule() const;
  [[nodiscard]] const lp::LinearProgram& program() const { return lp_; }
  [[nodiscard]] lp::Basis basis() const { return simplex_->basis(); }
  /// Starting basis for the next solve, e.g. from a tree of the same shape.
  void set_basis(const lp::Basis& basis) { simplex_->set_basis(basis); }

  [[nodiscard]] int unit_var(int unit, int node) const { return node * per_node_ + unit; }
  [[nodiscard]] int spill_var(int daily, int node) const { return node * per_node_ + n_units_ + daily; }
  [[nodiscard]] int volume_var(int daily, int node) const { return node * per_node_ + n_units_ + n_daily_ + daily; }
  [[nodiscard]] int seasonal_spill_var(int scenario) const { return n_nodes_ * per_node_ + scenario; }

 private:
  void build(const Options& options);
  double coupling_rhs(double W) const;

  const PlantTopology* plant_;
  const ScenarioTree* tree_;
  int seasonal_ = -1;
  std::vector<int> daily_;
  int n_units_ = 0, n_daily_ = 0, n_nodes_ = 0, per_node_ = 0;
  int first_coupling_ = 0;  // equality index of the first scenario coupling row
  struct StartRow {
    int row, reservoir;
    double inflow;
  };
  std::vector<StartRow> start_rows_;  // balances of first-hour nodes
  double seasonal_inflow_ = 0.0;
  lp::LinearProgram lp_;
  std::optional<lp::DualSimplex> simplex_;
  lp::Solution solution_;
};

/// Deterministic hourly problem for each scenario. Here-and-now: one q for
/// the whole set maximizing the probability-weighted mean; per_scenario_q
/// lets every scenario choose its own.
StageResult method3_intrastage(const PlantTopology& plant, std::span<const WeeklyScenario> scenarios, double W,
                               const IntrastageOptions& opt = {});
StageResult method3_intrastage(const PlantTopology& plant, const WeeklyScenario& scenario, double W,
                               const IntrastageOptions& opt = {});

/// Multihorizon problem on a tree with one first-stage q.
StageResult method4_intrastage(const PlantTopology& plant, const ScenarioTree& tree, double W,
                               const IntrastageOptions& opt = {});

/// value[tree][fixing][w]
using ValueCube = std::vector<std::vector<std::vector<double>>>;

/// Stage values of every tree over a whole W grid for every reserve fixing,
/// reserve income included, kInfeasible where W cannot be met. Each
/// (tree, fixing) chain is solved in ascending W with warm starts; the zero
/// fixing always runs first on a fresh solver so its values do not depend on
/// whether reserves are enabled. With warm_start, chains start from the
/// stored basis of the same tree slot and fixing and store their first basis
/// back; the zero fixing then starts from the zero fixing's basis only.
ValueCube hourly_value_table(const PlantTopology& plant, std::span<const ScenarioTree> trees,
                             std::span<const double> W_grid, const IntrastageOptions& opt,
                             long long* lp_count = nullptr,
                             std::vector<std::vector<lp::Basis>>* warm_start = nullptr);

}  // namespace hydro
