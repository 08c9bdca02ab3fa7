#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydrosdp/linear_program.hpp"
#include "hydrosdp/simulator.hpp"
#include "hydrosdp/valuation.hpp"

namespace hydro {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);

/// Every file starts with "# hydrosdp <kind> v<version>" followed by the
/// column header.
inline constexpr int kCsvVersion = 1;

void write_value_function(std::ostream& out, const ValueFunction& vf);
ValueFunction read_value_function(std::istream& in);

void write_water_values(std::ostream& out, const WaterValueTable& t);
WaterValueTable read_water_values(std::istream& in);

struct SummaryRow {
  Method method = Method::m1;
  bool reserves = false;
  double expected_profit = 0.0;
  double rel_std_pct = 0.0;
  double cvar10 = 0.0;
};

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary(std::istream& in);

struct SampleRow {
  Method method = Method::m1;
  bool reserves = false;
  int sample = 0;
  double profit = 0.0;
  double spill_m3 = 0.0;
  double balance_residual_m3 = 0.0;
  int reserve_weeks = 0;  // weeks with any committed turbine
};

void write_samples(std::ostream& out, const std::vector<SampleRow>& rows, bool header = true);
std::vector<SampleRow> read_samples(std::istream& in);

/// (method, reserves, sample, week, filling_m3); week 0 is the start.
void write_filling_paths(std::ostream& out, Method method, bool reserves, const SimulationResult& r,
                         bool header = true);

void write_hourly_log(std::ostream& out, const std::vector<HourLog>& log);

/// CPLEX LP text format of a maximization problem.
void write_lp_format(std::ostream& out, const lp::LinearProgram& lp, const std::string& title = {});

}  // namespace hydro
