#include "hydrosdp/sparse_lu.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace hydro::lp {

namespace {

struct Entry {
  int col;
  double val;
};

}  // namespace

bool SparseLu::factorize(int n, const std::vector<Column>& columns, double pivot_threshold,
                         double zero_tolerance) {
  n_ = n;
  prow_.clear();
  pcol_.clear();
  diag_.clear();
  lstart_.assign(1, 0);
  lrow_.clear();
  lval_.clear();
  ustart_.assign(1, 0);
  ucol_.clear();
  uval_.clear();
  singular_.clear();
  unpivoted_rows_.clear();
  col_pivot_.assign(n, -1);

  std::vector<std::vector<Entry>> rows(n);
  std::vector<std::vector<int>> cols(n);
  for (int j = 0; j < n; ++j) {
    const auto& c = columns[j];
    for (std::size_t p = 0; p < c.rows.size(); ++p) {
      if (c.values[p] == 0.0) continue;
      rows[c.rows[p]].push_back({j, c.values[p]});
      cols[j].push_back(c.rows[p]);
    }
  }
  std::vector<char> row_done(n, 0), col_done(n, 0);
  std::vector<int> col_stack, row_stack;
  for (int j = 0; j < n; ++j) {
    if (cols[j].size() == 1) col_stack.push_back(j);
  }
  for (int i = 0; i < n; ++i) {
    if (rows[i].size() == 1) row_stack.push_back(i);
  }
  std::vector<int> pos(n, -1);

  auto value_at = [&](int i, int j) -> double {
    for (const auto& e : rows[i]) {
      if (e.col == j) return e.val;
    }
    return 0.0;
  };
  auto col_max = [&](int j) {
    double m = 0.0;
    for (int i : cols[j]) m = std::max(m, std::abs(value_at(i, j)));
    return m;
  };

  std::vector<int> active(n);  // columns not yet pivoted, compacted lazily
  for (int j = 0; j < n; ++j) active[j] = j;
  int remaining = n;
  while (remaining > 0) {
    int r = -1, c = -1;
    // Column singletons need no elimination below the pivot.
    while (!col_stack.empty() && c < 0) {
      const int j = col_stack.back();
      col_stack.pop_back();
      if (col_done[j] || cols[j].size() != 1) continue;
      const int i = cols[j][0];
      if (std::abs(value_at(i, j)) > zero_tolerance) {
        r = i;
        c = j;
      }
    }
    while (c < 0 && !row_stack.empty()) {
      const int i = row_stack.back();
      row_stack.pop_back();
      if (row_done[i] || rows[i].size() != 1) continue;
      const int j = rows[i][0].col;
      const double a = std::abs(rows[i][0].val);
      if (a > zero_tolerance && a >= pivot_threshold * col_max(j)) {
        r = i;
        c = j;
      }
    }
    if (c < 0) {
      // Markowitz search over the sparsest columns.
      std::erase_if(active, [&](int j) { return col_done[j] != 0; });
      std::size_t min_count = std::numeric_limits<std::size_t>::max();
      for (int j : active) min_count = std::min(min_count, cols[j].size());
      if (min_count == 0) {
        for (int j : active) {
          if (!col_done[j] && cols[j].empty()) {
            singular_.push_back(j);
            col_done[j] = 1;
            --remaining;
          }
        }
        continue;
      }
      long long best_cost = std::numeric_limits<long long>::max();
      double best_abs = 0.0;
      for (int j : active) {
        if (cols[j].size() > min_count + 1) continue;
        const double cmax = col_max(j);
        for (int i : cols[j]) {
          const double a = std::abs(value_at(i, j));
          if (a <= zero_tolerance || a < pivot_threshold * cmax) continue;
          const long long cost =
              static_cast<long long>(rows[i].size() - 1) * static_cast<long long>(cols[j].size() - 1);
          if (cost < best_cost || (cost == best_cost && a > best_abs)) {
            best_cost = cost;
            best_abs = a;
            r = i;
            c = j;
          }
        }
      }
      if (c < 0) {
        // Only negligible entries left: the remaining columns are singular.
        for (int j : active) {
          if (!col_done[j]) {
            singular_.push_back(j);
            col_done[j] = 1;
            --remaining;
          }
        }
        continue;
      }
    }

    // Eliminate with pivot (r, c).
    const int k = static_cast<int>(prow_.size());
    prow_.push_back(r);
    pcol_.push_back(c);
    col_pivot_[c] = k;
    double pivot = 0.0;
    std::vector<Entry> urow;
    for (const auto& e : rows[r]) {
      if (e.col == c) {
        pivot = e.val;
      } else {
        urow.push_back(e);
      }
    }
    diag_.push_back(pivot);
    for (const auto& e : urow) {
      ucol_.push_back(e.col);
      uval_.push_back(e.val);
      auto& cl = cols[e.col];
      cl.erase(std::find(cl.begin(), cl.end(), r));
      if (cl.size() == 1) col_stack.push_back(e.col);
    }
    ustart_.push_back(static_cast<int>(ucol_.size()));

    for (int i : cols[c]) {
      if (i == r) continue;
      auto& row = rows[i];
      double a_ic = 0.0;
      for (std::size_t p = 0; p < row.size(); ++p) {
        if (row[p].col == c) {
          a_ic = row[p].val;
          row[p] = row.back();
          row.pop_back();
          break;
        }
      }
      const double l = a_ic / pivot;
      lrow_.push_back(i);
      lval_.push_back(l);
      for (std::size_t p = 0; p < row.size(); ++p) pos[row[p].col] = static_cast<int>(p);
      for (const auto& e : urow) {
        if (pos[e.col] >= 0) {
          row[pos[e.col]].val -= l * e.val;
        } else {
          pos[e.col] = static_cast<int>(row.size());
          row.push_back({e.col, -l * e.val});
          cols[e.col].push_back(i);
        }
      }
      for (const auto& e : row) pos[e.col] = -1;
      if (row.size() == 1) row_stack.push_back(i);
    }
    lstart_.push_back(static_cast<int>(lrow_.size()));
    rows[r].clear();
    cols[c].clear();
    row_done[r] = 1;
    col_done[c] = 1;
    --remaining;
  }

  if (!singular_.empty()) {
    for (int i = 0; i < n; ++i) {
      if (!row_done[i]) unpivoted_rows_.push_back(i);
    }
    return false;
  }

  // Column-wise copy of U for the forward solve.
  std::vector<int> count(n + 1, 0);
  for (int j : ucol_) ++count[j + 1];
  ucstart_.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) ucstart_[j + 1] = ucstart_[j] + count[j + 1];
  ucpiv_.assign(ucol_.size(), 0);
  ucval_.assign(ucol_.size(), 0.0);
  std::vector<int> fill(ucstart_.begin(), ucstart_.end() - 1);
  for (int kk = 0; kk < n; ++kk) {
    for (int p = ustart_[kk]; p < ustart_[kk + 1]; ++p) {
      const int j = ucol_[p];
      ucpiv_[fill[j]] = kk;
      ucval_[fill[j]] = uval_[p];
      ++fill[j];
    }
  }
  row_pivot_.assign(n, -1);
  for (int kk = 0; kk < n; ++kk) row_pivot_[prow_[kk]] = kk;
  std::vector<int> lcount(n + 1, 0);
  for (int i : lrow_) ++lcount[i + 1];
  ltstart_.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) ltstart_[i + 1] = ltstart_[i] + lcount[i + 1];
  ltrow_.assign(lrow_.size(), 0);
  ltval_.assign(lrow_.size(), 0.0);
  std::vector<int> lfill(ltstart_.begin(), ltstart_.end() - 1);
  for (int kk = 0; kk < n; ++kk) {
    for (int p = lstart_[kk]; p < lstart_[kk + 1]; ++p) {
      const int i = lrow_[p];
      ltrow_[lfill[i]] = prow_[kk];
      ltval_[lfill[i]] = lval_[p];
      ++lfill[i];
    }
  }
  work_.assign(n, 0.0);
  stamp_.assign(n, 0);
  generation_ = 0;
  return true;
}

int SparseLu::next_generation() const {
  if (++generation_ == std::numeric_limits<int>::max()) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
  return generation_;
}

void SparseLu::solve(std::vector<double>& x) const {
  for (int k = 0; k < n_; ++k) {
    const double t = x[prow_[k]];
    if (t == 0.0) continue;
    for (int p = lstart_[k]; p < lstart_[k + 1]; ++p) x[lrow_[p]] -= lval_[p] * t;
  }
  for (int k = n_ - 1; k >= 0; --k) {
    const int c = pcol_[k];
    const double v = x[prow_[k]] / diag_[k];
    x[prow_[k]] = 0.0;
    work_[c] = v;
    if (v == 0.0) continue;
    for (int p = ucstart_[c]; p < ucstart_[c + 1]; ++p) x[prow_[ucpiv_[p]]] -= ucval_[p] * v;
  }
  x.swap(work_);  // leaves work_ zero
}

void SparseLu::solve_transposed(std::vector<double>& y) const {
  // U' z = c, pushing each solved component into the later columns.
  for (int k = 0; k < n_; ++k) {
    const double v = y[pcol_[k]] / diag_[k];
    y[pcol_[k]] = 0.0;
    work_[prow_[k]] = v;
    if (v == 0.0) continue;
    for (int p = ustart_[k]; p < ustart_[k + 1]; ++p) y[ucol_[p]] -= uval_[p] * v;
  }
  for (int k = n_ - 1; k >= 0; --k) {
    double s = 0.0;
    for (int p = lstart_[k]; p < lstart_[k + 1]; ++p) s += lval_[p] * work_[lrow_[p]];
    work_[prow_[k]] -= s;
  }
  y.swap(work_);
}

// Dense solves are cheaper once the right-hand side fills a good part of it.
static bool use_dense(std::size_t count, int n) { return count * 10 > static_cast<std::size_t>(n); }

void SparseLu::solve(std::vector<double>& x, std::vector<int>& nz) const {
  if (use_dense(nz.size(), n_)) {
    solve(x);
    nz.clear();
    for (int i = 0; i < n_; ++i) {
      if (x[i] != 0.0) nz.push_back(i);
    }
    return;
  }
  const auto min_first = std::greater<int>();
  // L, pivots in increasing order; fill only lands on later pivots.
  int g = next_generation();
  heap_.clear();
  for (int i : nz) {
    stamp_[i] = g;
    heap_.push_back(row_pivot_[i]);
  }
  std::make_heap(heap_.begin(), heap_.end(), min_first);
  touched_.clear();
  while (!heap_.empty()) {
    std::pop_heap(heap_.begin(), heap_.end(), min_first);
    const int k = heap_.back();
    heap_.pop_back();
    touched_.push_back(k);
    const double t = x[prow_[k]];
    if (t == 0.0) continue;
    for (int p = lstart_[k]; p < lstart_[k + 1]; ++p) {
      const int i = lrow_[p];
      if (stamp_[i] != g) {
        stamp_[i] = g;
        heap_.push_back(row_pivot_[i]);
        std::push_heap(heap_.begin(), heap_.end(), min_first);
      }
      x[i] -= lval_[p] * t;
    }
  }
  // U, pivots in decreasing order.
  g = next_generation();
  heap_.swap(touched_);
  for (int k : heap_) stamp_[prow_[k]] = g;
  std::make_heap(heap_.begin(), heap_.end());
  nz.clear();
  while (!heap_.empty()) {
    std::pop_heap(heap_.begin(), heap_.end());
    const int k = heap_.back();
    heap_.pop_back();
    const int c = pcol_[k];
    const double v = x[prow_[k]] / diag_[k];
    x[prow_[k]] = 0.0;
    if (v == 0.0) continue;
    work_[c] = v;
    nz.push_back(c);
    for (int p = ucstart_[c]; p < ucstart_[c + 1]; ++p) {
      const int i = prow_[ucpiv_[p]];
      if (stamp_[i] != g) {
        stamp_[i] = g;
        heap_.push_back(ucpiv_[p]);
        std::push_heap(heap_.begin(), heap_.end());
      }
      x[i] -= ucval_[p] * v;
    }
  }
  x.swap(work_);
}

void SparseLu::solve_transposed(std::vector<double>& y, std::vector<int>& nz) const {
  if (use_dense(nz.size(), n_)) {
    solve_transposed(y);
    nz.clear();
    for (int i = 0; i < n_; ++i) {
      if (y[i] != 0.0) nz.push_back(i);
    }
    return;
  }
  const auto min_first = std::greater<int>();
  // U', pivots in increasing order, result by row into work_.
  int g = next_generation();
  heap_.clear();
  for (int c : nz) {
    stamp_[c] = g;
    heap_.push_back(col_pivot_[c]);
  }
  std::make_heap(heap_.begin(), heap_.end(), min_first);
  touched_.clear();
  while (!heap_.empty()) {
    std::pop_heap(heap_.begin(), heap_.end(), min_first);
    const int k = heap_.back();
    heap_.pop_back();
    const int c = pcol_[k];
    const double v = y[c] / diag_[k];
    y[c] = 0.0;
    if (v == 0.0) continue;
    work_[prow_[k]] = v;
    touched_.push_back(k);
    for (int p = ustart_[k]; p < ustart_[k + 1]; ++p) {
      const int j = ucol_[p];
      if (stamp_[j] != g) {
        stamp_[j] = g;
        heap_.push_back(col_pivot_[j]);
        std::push_heap(heap_.begin(), heap_.end(), min_first);
      }
      y[j] -= uval_[p] * v;
    }
  }
  // L', pivots in decreasing order; a row is final once its pivot is reached.
  g = next_generation();
  heap_.swap(touched_);
  for (int k : heap_) stamp_[prow_[k]] = g;
  std::make_heap(heap_.begin(), heap_.end());
  nz.clear();
  while (!heap_.empty()) {
    std::pop_heap(heap_.begin(), heap_.end());
    const int k = heap_.back();
    heap_.pop_back();
    const int i = prow_[k];
    const double v = work_[i];
    if (v == 0.0) continue;
    nz.push_back(i);
    for (int p = ltstart_[i]; p < ltstart_[i + 1]; ++p) {
      const int t = ltrow_[p];
      if (stamp_[t] != g) {
        stamp_[t] = g;
        heap_.push_back(row_pivot_[t]);
        std::push_heap(heap_.begin(), heap_.end());
      }
      work_[t] -= ltval_[p] * v;
    }
  }
  y.swap(work_);
}

std::size_t SparseLu::nonzeros() const { return diag_.size() + lrow_.size() + ucol_.size(); }

}  // namespace hydro::lp
