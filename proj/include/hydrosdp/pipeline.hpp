#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hydrosdp/io.hpp"
#include "hydrosdp/plant.hpp"
#include "hydrosdp/simulator.hpp"
#include "hydrosdp/stochastic.hpp"
#include "hydrosdp/valuation.hpp"

namespace hydro {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  PlantTopology plant;
  StochasticParams params;
  int filling_levels = 21;
  int discharge_levels = 21;
  std::vector<Method> methods{Method::m1, Method::m2, Method::m3, Method::m4};
  std::vector<bool> reserve_flags{false, true};
  int n_scenarios = 10;
  std::map<Method, int> n_scenarios_per_method;  // overrides n_scenarios
  int branching = 2;
  double terminal_value = std::numeric_limits<double>::quiet_NaN();
  bool per_scenario_q = false;
  SimConfig sim;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool dump_lp = false;

  [[nodiscard]] int scenarios_for(Method m) const;
  [[nodiscard]] ValuationConfig valuation(Method m, bool reserves) const;
};

/// JSON text with the sections plant, stochastic, grids, valuation,
/// simulation and output; see configs/reference.json.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// "on"/"off"/"both".
std::vector<bool> parse_reserve_flags(const std::string& text);

std::string theta_path(const RunConfig& c, Method m, bool reserves);

struct OptimizeRecord {
  Method method = Method::m1;
  bool reserves = false;
  double seconds = 0.0;
  long long stage_evaluations = 0;
  double peak_rss_mb = 0.0;  // process high-water mark after the run
};

/// Builds and writes theta, water values and timing for every selected
/// method and reserve flag.
std::vector<OptimizeRecord> run_optimize(const RunConfig& c, std::ostream& log);

/// Simulates every selected method and reserve flag from the theta files in
/// the output directory.
std::vector<SummaryRow> run_simulate(const RunConfig& c, std::ostream& log);

struct CompareReport {
  std::vector<SummaryRow> summary;
  std::vector<OptimizeRecord> timing;
  /// Fraction of (week, filling) water values where M3 and M4 differ by
  /// less than 10 %, per reserve flag; absent when either is missing.
  std::map<bool, double> agreement_m3_m4;
};

/// Fraction of cells with |a - b| < tol * max(|a|, |b|); cells where both
/// are zero count as agreeing. The terminal week is left out.
double water_value_agreement(const WaterValueTable& a, const WaterValueTable& b, double tol = 0.1);

CompareReport run_compare(const RunConfig& c, std::ostream& log);

std::vector<OptimizeRecord> read_timing(std::istream& in);
void write_timing(std::ostream& out, const std::vector<OptimizeRecord>& rows);

}  // namespace hydro
