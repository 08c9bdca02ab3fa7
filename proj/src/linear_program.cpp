#include "hydrosdp/linear_program.hpp"

#include <algorithm>
#include <cmath>

namespace hydro::lp {

int LinearProgram::add_variable(double lb, double ub, double cost, std::string name) {
  if (std::isnan(lb) || std::isnan(ub) || std::isnan(cost)) {
    throw DimensionError("NaN in variable definition");
  }
  cost_.push_back(cost);
  lb_.push_back(lb);
  ub_.push_back(ub);
  if (name.empty()) name = "x" + std::to_string(cost_.size() - 1);
  names_.push_back(std::move(name));
  return num_variables() - 1;
}

int LinearProgram::add_equality(std::vector<Term> terms, double rhs) {
  eq_.push_back(Row{std::move(terms), rhs});
  return num_equalities() - 1;
}

int LinearProgram::add_inequality(std::vector<Term> terms, double rhs) {
  ineq_.push_back(Row{std::move(terms), rhs});
  return num_inequalities() - 1;
}

void LinearProgram::set_bounds(int var, double lb, double ub) {
  lb_.at(var) = lb;
  ub_.at(var) = ub;
}

void LinearProgram::set_cost(int var, double cost) { cost_.at(var) = cost; }
void LinearProgram::set_equality_rhs(int row, double rhs) { eq_.at(row).rhs = rhs; }
void LinearProgram::set_inequality_rhs(int row, double rhs) { ineq_.at(row).rhs = rhs; }

std::size_t LinearProgram::num_nonzeros() const {
  std::size_t nnz = 0;
  for (const auto& r : eq_) nnz += r.terms.size();
  for (const auto& r : ineq_) nnz += r.terms.size();
  return nnz;
}

void LinearProgram::check() const {
  const int n = num_variables();
  for (int j = 0; j < n; ++j) {
    if (lb_[j] > ub_[j]) {
      throw DimensionError("variable " + names_[j] + " has lb > ub");
    }
  }
  auto check_rows = [n](std::span<const Row> rows, const char* kind) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (const auto& t : rows[i].terms) {
        if (t.var < 0 || t.var >= n) {
          throw DimensionError(std::string(kind) + " row " + std::to_string(i) +
                               " references unknown variable " + std::to_string(t.var));
        }
        if (!std::isfinite(t.coef)) {
          throw DimensionError(std::string(kind) + " row " + std::to_string(i) +
                               " has a non-finite coefficient");
        }
      }
      if (std::isnan(rows[i].rhs)) {
        throw DimensionError(std::string(kind) + " row " + std::to_string(i) + " has NaN rhs");
      }
    }
  };
  check_rows(eq_, "equality");
  check_rows(ineq_, "inequality");
}

double LinearProgram::evaluate(std::span<const double> x) const {
  if (x.size() != cost_.size()) throw DimensionError("point has wrong dimension");
  double v = 0.0;
  for (std::size_t j = 0; j < cost_.size(); ++j) v += cost_[j] * x[j];
  return v;
}

double LinearProgram::max_violation(std::span<const double> x) const {
  if (x.size() != cost_.size()) throw DimensionError("point has wrong dimension");
  double worst = 0.0;
  for (std::size_t j = 0; j < cost_.size(); ++j) {
    worst = std::max({worst, lb_[j] - x[j], x[j] - ub_[j]});
  }
  auto activity = [&x](const Row& r) {
    double a = 0.0;
    for (const auto& t : r.terms) a += t.coef * x[t.var];
    return a;
  };
  for (const auto& r : eq_) worst = std::max(worst, std::abs(activity(r) - r.rhs));
  for (const auto& r : ineq_) worst = std::max(worst, activity(r) - r.rhs);
  return worst;
}

}  // namespace hydro::lp
