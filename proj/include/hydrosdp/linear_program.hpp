#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydro::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Term {
  int var;
  double coef;
};

/// One sparse constraint row.
struct Row {
  std::vector<Term> terms;
  double rhs = 0.0;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Maximization LP
///
///   max  c'x
///   s.t. A x  = b     (equalities)
///        D x <= d     (inequalities)
///        lb <= x <= ub
///
/// Rows are stored sparsely. Variables and rows are addressed by the index
/// returned when they were added; equality and inequality rows have separate
/// index spaces.
class LinearProgram {
 public:
  int add_variable(double lb, double ub, double cost, std::string name = {});
  int add_equality(std::vector<Term> terms, double rhs);
  int add_inequality(std::vector<Term> terms, double rhs);

  void set_bounds(int var, double lb, double ub);
  void set_cost(int var, double cost);
  void set_equality_rhs(int row, double rhs);
  void set_inequality_rhs(int row, double rhs);

  [[nodiscard]] int num_variables() const { return static_cast<int>(cost_.size()); }
  [[nodiscard]] int num_equalities() const { return static_cast<int>(eq_.size()); }
  [[nodiscard]] int num_inequalities() const { return static_cast<int>(ineq_.size()); }
  [[nodiscard]] int num_rows() const { return num_equalities() + num_inequalities(); }
  [[nodiscard]] std::size_t num_nonzeros() const;

  [[nodiscard]] std::span<const double> objective() const { return cost_; }
  [[nodiscard]] std::span<const double> lower_bounds() const { return lb_; }
  [[nodiscard]] std::span<const double> upper_bounds() const { return ub_; }
  [[nodiscard]] std::span<const Row> equalities() const { return eq_; }
  [[nodiscard]] std::span<const Row> inequalities() const { return ineq_; }
  [[nodiscard]] const std::string& name(int var) const { return names_.at(var); }

  /// Throws DimensionError when a row references an undeclared variable or
  /// a bound pair is inverted.
  void check() const;

  /// c'x for the given point.
  [[nodiscard]] double evaluate(std::span<const double> x) const;

  /// Largest absolute violation of rows and bounds at x.
  [[nodiscard]] double max_violation(std::span<const double> x) const;

 private:
  std::vector<double> cost_;
  std::vector<double> lb_;
  std::vector<double> ub_;
  std::vector<std::string> names_;
  std::vector<Row> eq_;
  std::vector<Row> ineq_;
};

}  // namespace hydro::lp
