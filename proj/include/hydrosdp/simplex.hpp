#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hydrosdp/linear_program.hpp"

namespace hydro::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(Status s);

struct Solution {
  Status status = Status::infeasible;
  std::vector<double> x;
  double objective_value = 0.0;
  /// Sensitivity of the optimal objective to each right-hand side.
  std::vector<double> equality_duals;
  std::vector<double> inequality_duals;
  int iterations = 0;
  /// Largest row or bound violation of x in the unscaled problem.
  double max_violation = 0.0;

  [[nodiscard]] bool optimal() const { return status == Status::optimal; }
};

struct SolverOptions {
  double primal_tolerance = 1e-6;   // on the scaled problem
  double dual_tolerance = 1e-7;
  double pivot_tolerance = 1e-9;
  int refactor_interval = 200;
  int max_iterations = 0;           // 0: automatic
  bool scale = true;
  bool perturb = true;
};

/// Warm-start information: which variables are basic and at which bound the
/// nonbasic ones sit. Only meaningful for LPs of the same shape.
struct Basis {
  std::vector<int> basic;          // length = rows
  std::vector<signed char> state;  // length = variables + rows
  [[nodiscard]] bool empty() const { return basic.empty(); }
};

/// Bounded-variable dual simplex on the row form  A x - s = 0, l <= (x,s) <= u.
///
/// All variables with finite bounds on both sides are handled by bound flips,
/// so a dual feasible start exists for every basis. Infinite bounds are
/// replaced by large artificial ones; a solution resting on an artificial
/// bound is reported as unbounded.
///
/// Pivoting is deterministic. Right-hand sides and bounds may be changed
/// between calls to solve(); the previous basis is then reused.
class DualSimplex {
 public:
  explicit DualSimplex(const LinearProgram& lp, SolverOptions options = {});
  ~DualSimplex();
  DualSimplex(DualSimplex&&) noexcept;
  DualSimplex& operator=(DualSimplex&&) noexcept;

  Solution solve();

  void set_bounds(int var, double lb, double ub);
  void set_equality_rhs(int row, double rhs);
  void set_inequality_rhs(int row, double rhs);

  [[nodiscard]] Basis basis() const;
  /// Ignored when the basis does not fit this LP.
  void set_basis(const Basis& basis);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Solution solve_lp(const LinearProgram& lp, const SolverOptions& options = {});

/// Largest binary set solve_with_binaries accepts.
inline constexpr int kMaxBinaries = 16;

/// Exact optimum over all 0/1 fixings of the listed variables. Each fixing
/// is an LP with the binaries fixed through their bounds; fixings are
/// visited in lexicographic order and ties keep the earlier one.
Solution solve_with_binaries(const LinearProgram& lp, std::span<const int> binary_vars,
                             const SolverOptions& options = {});

}  // namespace hydro::lp
