#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hydrosdp/plant.hpp"

namespace hydro {

/// Deterministic random stream. Streams for (seed, sample, week) are derived
/// by hashing, so results never depend on the order in which they are used.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);
  static RandomStream derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  double normal();
  double uniform();

 private:
  std::mt19937_64 engine_;
};

struct StochasticParams {
  std::vector<double> weekly_price_mean;  // EUR/MWh, one per week
  std::vector<double> hourly_profile;     // 168 factors averaging to 1
  double price_sigma = 0.0;               // lognormal volatility of the weekly level
  /// m3 per week, indexed [reservoir][week] in plant reservoir order.
  std::vector<std::vector<double>> inflow_mean;
  double inflow_sigma = 0.0;
  double rho = 0.0;  // copula correlation between price and inflow shocks
  /// Reserve capacity price per week in EUR per MW and hour of provision.
  std::vector<double> reserve_price;
  /// Volatility of the daily price shocks in scenario trees.
  double daily_price_sigma = 0.15;
  /// Exponent on the parent path's level before the next daily shock: 1
  /// compounds shocks, 0 makes every day's shock independent.
  double daily_price_persistence = 1.0;

  [[nodiscard]] int num_weeks() const { return static_cast<int>(weekly_price_mean.size()); }
};

/// Throws ValidationError on inconsistent sizes, negative sigmas, |rho| > 1
/// or a profile whose mean differs from 1 by more than 1e-9.
void validate_params(const StochasticParams& params, int num_reservoirs);

/// Synthetic alpine-style market and hydrology for the reference plant.
StochasticParams reference_params(const PlantTopology& plant);

struct WeeklyScenario {
  std::vector<double> prices;                // EUR/MWh per hour
  std::vector<std::vector<double>> inflows;  // m3/h, [reservoir][hour]
  double reserve_price = 0.0;
  double probability = 1.0;

  [[nodiscard]] int num_hours() const { return static_cast<int>(prices.size()); }
  [[nodiscard]] double weekly_inflow(int reservoir) const;
};

/// One correlated draw of the weekly price level and inflow volume for
/// week (1-based).
WeeklyScenario sample_week(const StochasticParams& params, int week, RandomStream& stream);

/// Scenario with every shock at its mean (the point forecast).
WeeklyScenario expected_week(const StochasticParams& params, int week);

/// Scenario with every weekly price, profile and reserve price multiplied by
/// factor.
WeeklyScenario scale_prices(WeeklyScenario s, double factor);

/// Daily-branching price tree. Scenarios are numbered lexicographically by
/// their branch choices, so each bundle is a contiguous scenario range.
class ScenarioTree {
 public:
  struct Node {
    int hour = 0;
    int parent = -1;  // node of the previous hour, -1 at the first hour
    int first_scenario = 0;
    int num_scenarios = 0;
    double probability = 0.0;
    double price = 0.0;
  };

  /// node_prices[hour][bundle] in lexicographic bundle order. branching[d]
  /// is the number of children of every bundle at the start of day d.
  ScenarioTree(int hours_per_day, std::vector<int> branching, std::vector<std::vector<double>> node_prices,
               std::vector<std::vector<double>> inflows, double reserve_price);

  [[nodiscard]] int num_hours() const { return hours_per_day_ * num_days(); }
  [[nodiscard]] int num_days() const { return static_cast<int>(branching_.size()); }
  [[nodiscard]] int hours_per_day() const { return hours_per_day_; }
  [[nodiscard]] const std::vector<int>& branching() const { return branching_; }
  [[nodiscard]] int num_scenarios() const { return num_scenarios_; }
  [[nodiscard]] int num_nodes() const { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] const Node& node(int i) const { return nodes_.at(i); }
  /// Nodes of one hour occupy [stage_begin(h), stage_begin(h + 1)).
  [[nodiscard]] int stage_begin(int hour) const { return stage_start_.at(hour); }
  [[nodiscard]] int bundles_at(int hour) const { return stage_start_.at(hour + 1) - stage_start_.at(hour); }
  [[nodiscard]] int node_of(int hour, int scenario) const;
  [[nodiscard]] double scenario_probability(int) const { return 1.0 / num_scenarios_; }
  [[nodiscard]] const std::vector<std::vector<double>>& inflows() const { return inflows_; }
  [[nodiscard]] double reserve_price() const { return reserve_price_; }

  /// Prices along the root-to-leaf path of one scenario.
  [[nodiscard]] WeeklyScenario scenario(int s) const;

  /// Throws when bundles do not partition and refine.
  void check_structure() const;

 private:
  int hours_per_day_;
  std::vector<int> branching_;
  std::vector<int> day_bundles_;  // bundles per day
  int num_scenarios_ = 1;
  std::vector<Node> nodes_;
  std::vector<int> stage_start_;
  std::vector<std::vector<double>> inflows_;
  double reserve_price_;
};

/// Tree whose every hour has a single bundle carrying the given scenario.
ScenarioTree degenerate_tree(const WeeklyScenario& scenario);

/// Draws a weekly level and inflows once, then applies B quantile-sampled
/// mean-one daily shocks at every day boundary to the parent path's level.
ScenarioTree build_price_tree(const StochasticParams& params, int week, int branching, RandomStream& stream);

/// Same construction from an already drawn week.
ScenarioTree build_price_tree(const WeeklyScenario& base, int branching, double daily_sigma, int hours_per_day = 24,
                              double persistence = 1.0);

/// Hours 08:00-20:00 Monday to Friday, for a week starting Monday 00:00.
std::vector<bool> default_peak_mask();

/// (mean price over masked hours, mean price over the rest).
std::pair<double, double> aggregate_peak_offpeak(const WeeklyScenario& s, const std::vector<bool>& peak_mask);

/// Non-increasing rearrangement of the hourly prices, constant on each hour.
class PriceDurationCurve {
 public:
  explicit PriceDurationCurve(std::vector<double> prices);

  [[nodiscard]] double duration() const { return static_cast<double>(sorted_.size()); }
  [[nodiscard]] double at(double t) const;
  /// Exact integral over [a, b], 0 <= a <= b <= duration().
  [[nodiscard]] double integral(double a, double b) const;
  [[nodiscard]] const std::vector<double>& sorted_prices() const { return sorted_; }

 private:
  std::vector<double> sorted_;
  std::vector<double> prefix_;  // prefix_[i] = sum of the i largest prices
};

PriceDurationCurve make_pdc(const WeeklyScenario& s);
double pdc_integral(const PriceDurationCurve& pdc, double a, double b);

}  // namespace hydro
