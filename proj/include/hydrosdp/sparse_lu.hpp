#pragma once

#include <vector>

namespace hydro::lp {

/// Sparse LU factorization of a square matrix given by columns, with
/// Markowitz pivot selection and threshold partial pivoting. Column and row
/// singletons are taken first, so nearly triangular matrices factor with
/// little fill. Solves skip zero entries, which keeps them cheap for sparse
/// right-hand sides.
class SparseLu {
 public:
  struct Column {
    std::vector<int> rows;
    std::vector<double> values;
  };

  /// Returns false when the matrix is (numerically) singular; the
  /// offending columns are then listed by singular_columns().
  bool factorize(int n, const std::vector<Column>& columns, double pivot_threshold = 0.01,
                 double zero_tolerance = 1e-11);

  /// x := B^{-1} x
  void solve(std::vector<double>& x) const;
  /// y := B^{-T} y
  void solve_transposed(std::vector<double>& y) const;

  /// Sparse variants: nz lists the entries that may be nonzero (no
  /// duplicates) and is replaced by the same for the result. Only the
  /// reachable part of the factors is visited.
  void solve(std::vector<double>& x, std::vector<int>& nz) const;
  void solve_transposed(std::vector<double>& y, std::vector<int>& nz) const;

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] std::size_t nonzeros() const;
  [[nodiscard]] const std::vector<int>& singular_columns() const { return singular_; }
  /// Rows left without a pivot after a failed factorization.
  [[nodiscard]] const std::vector<int>& unpivoted_rows() const { return unpivoted_rows_; }

 private:
  int n_ = 0;
  // Pivot k eliminates row prow_[k] with column pcol_[k].
  std::vector<int> prow_, pcol_;
  std::vector<double> diag_;
  // L: for pivot k, multipliers l_ik in rows lrow_.
  std::vector<int> lstart_, lrow_;
  std::vector<double> lval_;
  // U by pivot (row form, off-diagonal, indexed by column) ...
  std::vector<int> ustart_, ucol_;
  std::vector<double> uval_;
  // ... and by column, for the forward solve: entries (pivot index, value).
  std::vector<int> ucstart_, ucpiv_;
  std::vector<double> ucval_;
  std::vector<int> col_pivot_;  // column -> pivot index
  std::vector<int> row_pivot_;  // row -> pivot index
  // L by row for the transposed solve: entries (target row, multiplier).
  std::vector<int> ltstart_, ltrow_;
  std::vector<double> ltval_;
  std::vector<int> singular_, unpivoted_rows_;
  mutable std::vector<double> work_;
  mutable std::vector<int> heap_, stamp_, touched_;
  mutable int generation_ = 0;
  int next_generation() const;
};

}  // namespace hydro::lp
