#include "hydrosdp/simplex.hpp"

#include "hydrosdp/sparse_lu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace hydro::lp {

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "?";
}

namespace {

constexpr double kArtificialBound = 1e9;
constexpr signed char kBasic = 0;
constexpr signed char kAtLower = 1;
constexpr signed char kAtUpper = 2;

double pow2_round(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) return 1.0;
  return std::ldexp(1.0, static_cast<int>(std::lround(std::log2(v))));
}

// Deterministic value in [0.5, 1) from an index.
double hash_unit(std::uint64_t j) {
  std::uint64_t z = j + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return 0.5 + 0.5 * static_cast<double>(z >> 11) * 0x1.0p-53;
}

struct Eta {
  int row;
  double pivot;
  std::vector<int> idx;
  std::vector<double> val;
};

}  // namespace

using Vec = std::vector<double>;

namespace {

// Dense storage plus the list of entries that may be nonzero.
struct SparseVec {
  Vec v;
  std::vector<int> nz;
  std::vector<char> in;

  void resize(int m) {
    v.assign(m, 0.0);
    nz.clear();
    in.assign(m, 0);
  }
  void clear() {
    for (int i : nz) {
      v[i] = 0.0;
      in[i] = 0;
    }
    nz.clear();
  }
  void add(int i, double a) {
    if (!in[i]) {
      in[i] = 1;
      nz.push_back(i);
    }
    v[i] += a;
  }
};

}  // namespace

struct DualSimplex::Impl {
  SolverOptions opt;
  int m = 0;
  int n = 0;
  int n_eq = 0;

  // Scaled matrix, column- and row-wise.
  std::vector<int> col_start, col_row;
  std::vector<double> col_val;
  std::vector<int> row_start, row_col;
  std::vector<double> row_val;

  std::vector<double> col_scale, row_scale;
  double obj_scale = 1.0;

  // Per variable (structurals then logicals), scaled, minimization form.
  std::vector<double> cost, work_cost;
  std::vector<double> lo, up;
  std::vector<char> art_lo, art_up;

  // Unscaled original data for reporting.
  std::vector<double> orig_cost;
  LinearProgram original;

  // State.
  std::vector<int> basic;
  std::vector<int> pos;
  std::vector<signed char> state;
  std::vector<double> x, d, weight;
  std::vector<double> infeas;  // squared primal infeasibility per basis row
  std::vector<int> infeasible_rows, infeasible_pos;
  bool have_basis = false;
  bool perturbed = false;

  SparseLu lu;
  std::vector<Eta> etas;

  // Scratch.
  std::vector<double> alpha;
  std::vector<int> touched;
  std::vector<char> is_touched;

  void load(const LinearProgram& lp);
  void compute_scaling(const LinearProgram& lp);
  void set_var_bounds(int j, double l, double u);
  void slack_basis();
  bool refactor();
  bool try_factorize();
  void ftran(Vec& v) const;
  void btran(Vec& v) const;
  void ftran(SparseVec& v) const;
  void btran(SparseVec& v) const;
  void add_column(int j, double mult, Vec& v) const;
  void add_column(int j, double mult, SparseVec& v) const;
  void compute_primal();
  void compute_duals();
  void place_nonbasic(int j);
  bool make_dual_feasible();
  void perturb_costs();
  void remove_perturbation();
  double infeasibility(int k) const;
  void update_infeasibility(int k) {
    const double v = infeasibility(k);
    infeas[k] = v * v;
    if (v > 0.0 && infeasible_pos[k] < 0) {
      infeasible_pos[k] = static_cast<int>(infeasible_rows.size());
      infeasible_rows.push_back(k);
    } else if (v == 0.0 && infeasible_pos[k] >= 0) {
      const int last = infeasible_rows.back();
      infeasible_rows[infeasible_pos[k]] = last;
      infeasible_pos[last] = infeasible_pos[k];
      infeasible_rows.pop_back();
      infeasible_pos[k] = -1;
    }
  }
  void compute_pivot_row(const SparseVec& rho);
  Solution run();
  Solution extract(Status status, int iters) const;
};

void DualSimplex::Impl::compute_scaling(const LinearProgram& lp) {
  col_scale.assign(n, 1.0);
  row_scale.assign(m, 1.0);
  if (!opt.scale) return;
  std::vector<const Row*> rows;
  for (const auto& r : lp.equalities()) rows.push_back(&r);
  for (const auto& r : lp.inequalities()) rows.push_back(&r);
  std::vector<double> cmin(n), cmax(n);
  for (int pass = 0; pass < 4; ++pass) {
    for (int i = 0; i < m; ++i) {
      double lo_a = kInf, hi_a = 0.0;
      for (const auto& t : rows[i]->terms) {
        const double a = std::abs(t.coef) * col_scale[t.var];
        if (a == 0.0) continue;
        lo_a = std::min(lo_a, a);
        hi_a = std::max(hi_a, a);
      }
      if (hi_a > 0.0) row_scale[i] = 1.0 / std::sqrt(lo_a * hi_a);
    }
    std::fill(cmin.begin(), cmin.end(), kInf);
    std::fill(cmax.begin(), cmax.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      for (const auto& t : rows[i]->terms) {
        const double a = std::abs(t.coef) * row_scale[i];
        if (a == 0.0) continue;
        cmin[t.var] = std::min(cmin[t.var], a);
        cmax[t.var] = std::max(cmax[t.var], a);
      }
    }
    for (int j = 0; j < n; ++j) {
      if (cmax[j] > 0.0) col_scale[j] = 1.0 / std::sqrt(cmin[j] * cmax[j]);
    }
  }
  for (auto& s : row_scale) s = pow2_round(s);
  for (auto& s : col_scale) s = pow2_round(s);
}

void DualSimplex::Impl::set_var_bounds(int j, double l, double u) {
  art_lo[j] = !std::isfinite(l);
  art_up[j] = !std::isfinite(u);
  lo[j] = art_lo[j] ? -kArtificialBound : l;
  up[j] = art_up[j] ? kArtificialBound : u;
}

void DualSimplex::Impl::load(const LinearProgram& lp) {
  lp.check();
  original = lp;
  n = lp.num_variables();
  n_eq = lp.num_equalities();
  m = lp.num_rows();
  compute_scaling(lp);

  std::vector<const Row*> rows;
  for (const auto& r : lp.equalities()) rows.push_back(&r);
  for (const auto& r : lp.inequalities()) rows.push_back(&r);

  // Row-wise storage, merging duplicate entries.
  row_start.assign(1, 0);
  row_col.clear();
  row_val.clear();
  std::vector<double> acc(n, 0.0);
  std::vector<char> in_row(n, 0);
  std::vector<int> seen;
  for (int i = 0; i < m; ++i) {
    seen.clear();
    for (const auto& t : rows[i]->terms) {
      if (!in_row[t.var]) {
        in_row[t.var] = 1;
        seen.push_back(t.var);
      }
      acc[t.var] += t.coef;
    }
    std::sort(seen.begin(), seen.end());
    for (int j : seen) {
      const double a = acc[j];
      acc[j] = 0.0;
      in_row[j] = 0;
      if (a == 0.0) continue;
      row_col.push_back(j);
      row_val.push_back(a * row_scale[i] * col_scale[j]);
    }
    row_start.push_back(static_cast<int>(row_col.size()));
  }
  // Column-wise copy.
  std::vector<int> count(n + 1, 0);
  for (int j : row_col) ++count[j + 1];
  col_start.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) col_start[j + 1] = col_start[j] + count[j + 1];
  col_row.assign(row_col.size(), 0);
  col_val.assign(row_col.size(), 0.0);
  std::vector<int> fill(col_start.begin(), col_start.end() - 1);
  for (int i = 0; i < m; ++i) {
    for (int k = row_start[i]; k < row_start[i + 1]; ++k) {
      const int j = row_col[k];
      col_row[fill[j]] = i;
      col_val[fill[j]] = row_val[k];
      ++fill[j];
    }
  }

  const int total = n + m;
  cost.assign(total, 0.0);
  lo.assign(total, 0.0);
  up.assign(total, 0.0);
  art_lo.assign(total, 0);
  art_up.assign(total, 0);
  orig_cost.assign(lp.objective().begin(), lp.objective().end());

  double cmax = 0.0;
  for (int j = 0; j < n; ++j) cmax = std::max(cmax, std::abs(orig_cost[j] * col_scale[j]));
  obj_scale = 1.0;
  if (cmax > 0.0) {
    int e = 0;
    std::frexp(cmax, &e);
    obj_scale = std::ldexp(1.0, e);
  }
  for (int j = 0; j < n; ++j) {
    cost[j] = -orig_cost[j] * col_scale[j] / obj_scale;
    const double l = lp.lower_bounds()[j], u = lp.upper_bounds()[j];
    set_var_bounds(j, std::isfinite(l) ? l / col_scale[j] : l, std::isfinite(u) ? u / col_scale[j] : u);
  }
  for (int i = 0; i < m; ++i) {
    const double b = rows[i]->rhs * row_scale[i];
    if (i < n_eq) {
      set_var_bounds(n + i, b, b);
    } else {
      set_var_bounds(n + i, -kInf, b);
    }
  }
  work_cost = cost;
  alpha.assign(total, 0.0);
  is_touched.assign(total, 0);
  x.assign(total, 0.0);
  d.assign(total, 0.0);
  state.assign(total, kAtLower);
  pos.assign(total, -1);
}

void DualSimplex::Impl::slack_basis() {
  basic.resize(m);
  std::fill(pos.begin(), pos.end(), -1);
  for (int i = 0; i < m; ++i) {
    basic[i] = n + i;
    pos[n + i] = i;
    state[n + i] = kBasic;
  }
  for (int j = 0; j < n; ++j) {
    state[j] = kAtLower;
    if (art_lo[j] && !art_up[j]) state[j] = kAtUpper;
    if (art_lo[j] && art_up[j]) state[j] = cost[j] > 0.0 ? kAtLower : kAtUpper;
    if (!art_lo[j] && !art_up[j] && cost[j] < 0.0) state[j] = kAtUpper;
    place_nonbasic(j);
  }
  weight.assign(m, 1.0);
  etas.clear();
  have_basis = true;
  perturbed = false;
  work_cost = cost;
}

void DualSimplex::Impl::place_nonbasic(int j) {
  x[j] = state[j] == kAtUpper ? up[j] : lo[j];
}

bool DualSimplex::Impl::try_factorize() {
  std::vector<SparseLu::Column> cols(m);
  for (int k = 0; k < m; ++k) {
    const int j = basic[k];
    if (j >= n) {
      cols[k].rows.push_back(j - n);
      cols[k].values.push_back(-1.0);
    } else {
      cols[k].rows.assign(col_row.begin() + col_start[j], col_row.begin() + col_start[j + 1]);
      cols[k].values.assign(col_val.begin() + col_start[j], col_val.begin() + col_start[j + 1]);
    }
  }
  return lu.factorize(m, cols);
}

// Factorizes the basis; singular columns are swapped for logicals of the
// rows left without a pivot.
bool DualSimplex::Impl::refactor() {
  etas.clear();
  if (m == 0) return true;
  for (int attempt = 0; attempt < 4; ++attempt) {
    if (try_factorize()) return true;
    const auto sing = lu.singular_columns();
    const auto rows = lu.unpivoted_rows();
    for (std::size_t t = 0; t < sing.size() && t < rows.size(); ++t) {
      const int k = sing[t];
      const int out = basic[k];
      const int in = n + rows[t];
      if (state[in] == kBasic) continue;
      state[out] = (art_lo[out] && !art_up[out]) ? kAtUpper : kAtLower;
      pos[out] = -1;
      place_nonbasic(out);
      basic[k] = in;
      pos[in] = k;
      state[in] = kBasic;
    }
  }
  return false;
}

void DualSimplex::Impl::ftran(Vec& v) const {
  if (m == 0) return;
  lu.solve(v);
  for (const auto& e : etas) {
    const double xr = v[e.row] / e.pivot;
    if (xr != 0.0) {
      for (std::size_t k = 0; k < e.idx.size(); ++k) v[e.idx[k]] -= e.val[k] * xr;
    }
    v[e.row] = xr;
  }
}

void DualSimplex::Impl::btran(Vec& v) const {
  if (m == 0) return;
  for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
    double s = v[it->row];
    for (std::size_t k = 0; k < it->idx.size(); ++k) s -= it->val[k] * v[it->idx[k]];
    v[it->row] = s / it->pivot;
  }
  lu.solve_transposed(v);
}

void DualSimplex::Impl::ftran(SparseVec& v) const {
  if (m == 0) return;
  for (int i : v.nz) v.in[i] = 0;
  lu.solve(v.v, v.nz);
  for (int i : v.nz) v.in[i] = 1;
  for (const auto& e : etas) {
    const double xr = v.v[e.row] / e.pivot;
    if (xr != 0.0) {
      for (std::size_t k = 0; k < e.idx.size(); ++k) v.add(e.idx[k], -e.val[k] * xr);
    }
    v.v[e.row] = xr;
  }
}

void DualSimplex::Impl::btran(SparseVec& v) const {
  if (m == 0) return;
  for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
    double s = v.v[it->row];
    for (std::size_t k = 0; k < it->idx.size(); ++k) s -= it->val[k] * v.v[it->idx[k]];
    if (s != 0.0) {
      v.add(it->row, 0.0);
      v.v[it->row] = s / it->pivot;
    } else {
      v.v[it->row] = 0.0;
    }
  }
  for (int i : v.nz) v.in[i] = 0;
  lu.solve_transposed(v.v, v.nz);
  for (int i : v.nz) v.in[i] = 1;
}

void DualSimplex::Impl::add_column(int j, double mult, SparseVec& v) const {
  if (j >= n) {
    v.add(j - n, -mult);
  } else {
    for (int p = col_start[j]; p < col_start[j + 1]; ++p) v.add(col_row[p], mult * col_val[p]);
  }
}

void DualSimplex::Impl::add_column(int j, double mult, Vec& v) const {
  if (j >= n) {
    v[j - n] -= mult;
  } else {
    for (int p = col_start[j]; p < col_start[j + 1]; ++p) v[col_row[p]] += mult * col_val[p];
  }
}

void DualSimplex::Impl::compute_primal() {
  Vec rhs(m, 0.0);
  for (int j = 0; j < n + m; ++j) {
    if (state[j] != kBasic && x[j] != 0.0) add_column(j, -x[j], rhs);
  }
  ftran(rhs);
  infeas.resize(m);
  infeasible_rows.clear();
  infeasible_pos.assign(m, -1);
  for (int k = 0; k < m; ++k) {
    x[basic[k]] = rhs[k];
    update_infeasibility(k);
  }
}

void DualSimplex::Impl::compute_duals() {
  Vec y(m);
  for (int k = 0; k < m; ++k) y[k] = work_cost[basic[k]];
  btran(y);
  for (int j = 0; j < n; ++j) {
    if (state[j] == kBasic) {
      d[j] = 0.0;
      continue;
    }
    double s = work_cost[j];
    for (int p = col_start[j]; p < col_start[j + 1]; ++p) s -= col_val[p] * y[col_row[p]];
    d[j] = s;
  }
  for (int i = 0; i < m; ++i) d[n + i] = state[n + i] == kBasic ? 0.0 : work_cost[n + i] + y[i];
}

// Returns true when any nonbasic variable was moved.
bool DualSimplex::Impl::make_dual_feasible() {
  bool moved = false;
  const double tol = opt.dual_tolerance;
  for (int j = 0; j < n + m; ++j) {
    if (state[j] == kBasic || lo[j] == up[j]) continue;
    if (state[j] == kAtLower && d[j] < -tol) {
      state[j] = kAtUpper;
      place_nonbasic(j);
      moved = true;
    } else if (state[j] == kAtUpper && d[j] > tol) {
      state[j] = kAtLower;
      place_nonbasic(j);
      moved = true;
    }
  }
  return moved;
}

void DualSimplex::Impl::perturb_costs() {
  if (!opt.perturb) return;
  work_cost = cost;
  for (int j = 0; j < n; ++j) {
    if (lo[j] == up[j]) continue;
    const double mag = (1e-7 + 1e-6 * std::abs(cost[j])) * hash_unit(static_cast<std::uint64_t>(j));
    if (state[j] == kAtLower) {
      work_cost[j] += mag;
    } else if (state[j] == kAtUpper) {
      work_cost[j] -= mag;
    } else {
      work_cost[j] += (j % 2 == 0) ? mag : -mag;
    }
  }
  perturbed = true;
}

void DualSimplex::Impl::remove_perturbation() {
  work_cost = cost;
  perturbed = false;
}

double DualSimplex::Impl::infeasibility(int k) const {
  const int j = basic[k];
  const double v = x[j];
  if (v < lo[j] - opt.primal_tolerance) return lo[j] - v;
  if (v > up[j] + opt.primal_tolerance) return v - up[j];
  return 0.0;
}

void DualSimplex::Impl::compute_pivot_row(const SparseVec& rho) {
  for (int j : touched) {
    alpha[j] = 0.0;
    is_touched[j] = 0;
  }
  touched.clear();
  for (int i : rho.nz) {
    const double r = rho.v[i];
    if (r == 0.0 || std::abs(r) < 1e-14) continue;
    for (int p = row_start[i]; p < row_start[i + 1]; ++p) {
      const int j = row_col[p];
      if (!is_touched[j]) {
        is_touched[j] = 1;
        touched.push_back(j);
      }
      alpha[j] += r * row_val[p];
    }
    const int s = n + i;
    if (!is_touched[s]) {
      is_touched[s] = 1;
      touched.push_back(s);
    }
    alpha[s] -= r;
  }
}

Solution DualSimplex::Impl::run() {
  const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : 200 * (m + n) + 20000;
  if (!have_basis) slack_basis();

  // Fresh factorization, duals and primals. Returns false once the same
  // trouble has been met too often without progress in between.
  int rescues = 0;
  std::vector<char> skip_row(m, 0);
  auto reset = [&]() {
    if (!refactor()) {
      slack_basis();
      refactor();
    }
    compute_duals();
    make_dual_feasible();
    compute_primal();
    std::fill(skip_row.begin(), skip_row.end(), 0);
  };

  reset();
  if (!perturbed && opt.perturb) {
    perturb_costs();
    compute_duals();
    make_dual_feasible();
    compute_primal();
  }

  struct Candidate {
    int j;
    double ratio;
    double harris;
    double abs_alpha;
  };
  std::vector<Candidate> cands;
  std::vector<double> suffix_min;
  std::vector<int> flips;
  SparseVec rho, col, work;
  rho.resize(m);
  col.resize(m);
  work.resize(m);
  bool fresh = true;
  int iters = 0;
  int stalled = 0;
  bool bland = false;

  auto recover = [&]() {
    reset();
    fresh = true;
    return ++rescues <= 8;
  };

  while (true) {
    if (iters >= max_iter) return extract(Status::iteration_limit, iters);
    if (static_cast<int>(etas.size()) >= opt.refactor_interval) {
      reset();
      fresh = true;
    }

    int r = -1;
    if (bland) {
      int best_var = n + m;
      for (int k : infeasible_rows) {
        if (!skip_row[k] && basic[k] < best_var) {
          best_var = basic[k];
          r = k;
        }
      }
    } else {
      double best_score = 0.0;
      for (int k : infeasible_rows) {
        const double score = infeas[k] / weight[k];
        if (score > best_score && !skip_row[k]) {
          best_score = score;
          r = k;
        }
      }
    }

    if (r < 0) {
      const bool skipped = std::any_of(skip_row.begin(), skip_row.end(), [](char c) { return c != 0; });
      if (skipped) {
        if (!recover()) return extract(Status::iteration_limit, iters);
        continue;
      }
      if (!fresh) {
        reset();
        fresh = true;
        continue;
      }
      if (perturbed) {
        remove_perturbation();
        compute_duals();
        if (make_dual_feasible()) compute_primal();
        continue;
      }
      return extract(Status::optimal, iters);
    }

    const int leaving = basic[r];
    const bool above = x[leaving] > up[leaving];
    const double bound = above ? up[leaving] : lo[leaving];
    const double dir = above ? 1.0 : -1.0;

    rho.clear();
    rho.add(r, 1.0);
    btran(rho);
    compute_pivot_row(rho);

    cands.clear();
    for (int j : touched) {
      if (state[j] == kBasic || lo[j] == up[j]) continue;
      const double a = dir * alpha[j];
      if (std::abs(a) < opt.pivot_tolerance) continue;
      if (state[j] == kAtLower && a > 0.0) {
        cands.push_back({j, std::max(d[j], 0.0) / a, (d[j] + opt.dual_tolerance) / a, std::abs(a)});
      } else if (state[j] == kAtUpper && a < 0.0) {
        cands.push_back({j, std::min(d[j], 0.0) / a, (d[j] - opt.dual_tolerance) / a, std::abs(a)});
      }
    }

    // Bound-flipping ratio test with a Harris pass inside each group.
    flips.clear();
    int q = -1;
    if (!cands.empty()) {
      std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.ratio != b.ratio) return a.ratio < b.ratio;
        return a.j < b.j;
      });
      if (bland) {
        const double tmin = cands.front().ratio;
        int best_j = n + m;
        for (const auto& c : cands) {
          if (c.ratio > tmin + 1e-12) break;
          if (c.abs_alpha > 1e-7 && c.j < best_j) best_j = c.j;
        }
        q = best_j < n + m ? best_j : cands.front().j;
      } else {
        double slope = std::abs(x[leaving] - bound);
        suffix_min.assign(cands.size() + 1, kInf);
        for (std::size_t k = cands.size(); k-- > 0;) {
          suffix_min[k] = std::min(suffix_min[k + 1], cands[k].harris);
        }
        std::size_t i = 0;
        while (i < cands.size()) {
          const double tmax = suffix_min[i];
          std::size_t e = i;
          double flip_cost = 0.0;
          bool flippable = true;
          while (e < cands.size() && cands[e].ratio <= tmax) {
            const int j = cands[e].j;
            if (art_lo[j] || art_up[j]) {
              flippable = false;
            } else {
              flip_cost += cands[e].abs_alpha * (up[j] - lo[j]);
            }
            ++e;
          }
          if (e == i) {
            flippable = !(art_lo[cands[i].j] || art_up[cands[i].j]);
            flip_cost = cands[i].abs_alpha * (up[cands[i].j] - lo[cands[i].j]);
            e = i + 1;
          }
          if (flippable && slope - flip_cost > opt.primal_tolerance) {
            for (std::size_t k = i; k < e; ++k) flips.push_back(cands[k].j);
            slope -= flip_cost;
            i = e;
            continue;
          }
          double best = -1.0;
          for (std::size_t k = i; k < e; ++k) {
            if (cands[k].abs_alpha > best) {
              best = cands[k].abs_alpha;
              q = cands[k].j;
            }
          }
          break;
        }
      }
    }

    if (q < 0) {
      // Every breakpoint can be passed: the dual is unbounded.
      if (!fresh) {
        reset();
        fresh = true;
        continue;
      }
      return extract(Status::infeasible, iters);
    }

    if (std::abs(alpha[q]) < 1e-7) {
      skip_row[r] = 1;
      continue;
    }

    col.clear();
    add_column(q, 1.0, col);
    ftran(col);
    const double alpha_r = col.v[r];
    if (std::abs(alpha_r - alpha[q]) > 1e-6 * (1.0 + std::abs(alpha_r)) || std::abs(alpha_r) < 1e-9) {
      if (!fresh) {
        reset();
        fresh = true;
      } else {
        skip_row[r] = 1;
      }
      continue;
    }

    if (!flips.empty()) {
      work.clear();
      for (int j : flips) {
        const double delta = state[j] == kAtLower ? up[j] - lo[j] : lo[j] - up[j];
        add_column(j, delta, work);
        state[j] = state[j] == kAtLower ? kAtUpper : kAtLower;
        place_nonbasic(j);
      }
      ftran(work);
      for (int k : work.nz) {
        if (work.v[k] == 0.0) continue;
        x[basic[k]] -= work.v[k];
        update_infeasibility(k);
      }
    }

    const double theta_p = (x[leaving] - bound) / alpha_r;
    const double wr = weight[r];
    Eta eta;
    eta.row = r;
    eta.pivot = alpha_r;
    std::sort(col.nz.begin(), col.nz.end());
    for (int k : col.nz) {
      const double c = col.v[k];
      if (c == 0.0 || k == r) continue;
      x[basic[k]] -= theta_p * c;
      update_infeasibility(k);
      const double ratio = c / alpha_r;
      weight[k] = std::max(weight[k], ratio * ratio * wr);
      if (std::abs(c) > 1e-14) {
        eta.idx.push_back(k);
        eta.val.push_back(c);
      }
    }
    x[q] += theta_p;
    x[leaving] = bound;
    weight[r] = std::max(wr / (alpha_r * alpha_r), 1.0);

    const double theta_d = d[q] / alpha[q];
    if (theta_d != 0.0) {
      for (int j : touched) {
        if (state[j] != kBasic) d[j] -= theta_d * alpha[j];
      }
      stalled = 0;
    } else if (++stalled > 2 * m + 200) {
      bland = true;
    }
    d[leaving] = -theta_d;
    d[q] = 0.0;

    state[leaving] = above ? kAtUpper : kAtLower;
    if (lo[leaving] == up[leaving]) state[leaving] = kAtLower;
    pos[leaving] = -1;
    basic[r] = q;
    pos[q] = r;
    state[q] = kBasic;
    update_infeasibility(r);
    etas.push_back(std::move(eta));
    fresh = false;
    rescues = 0;
    ++iters;
  }
}

Solution DualSimplex::Impl::extract(Status status, int iters) const {
  Solution sol;
  sol.status = status;
  sol.iterations = iters;
  sol.x.resize(n);
  const auto lb = original.lower_bounds();
  const auto ub = original.upper_bounds();
  bool on_artificial = false;
  for (int j = 0; j < n; ++j) {
    double v = x[j] * col_scale[j];
    if ((art_up[j] && x[j] >= 0.5 * kArtificialBound) || (art_lo[j] && x[j] <= -0.5 * kArtificialBound)) {
      on_artificial = true;
    }
    v = std::clamp(v, lb[j], ub[j]);
    sol.x[j] = v;
  }
  for (int i = 0; i < m; ++i) {
    const int s = n + i;
    if ((art_lo[s] && x[s] <= -0.5 * kArtificialBound)) on_artificial = true;
  }
  if (status == Status::optimal && on_artificial) sol.status = Status::unbounded;
  sol.objective_value = original.evaluate(sol.x);
  sol.max_violation = original.max_violation(sol.x);
  sol.equality_duals.assign(n_eq, 0.0);
  sol.inequality_duals.assign(m - n_eq, 0.0);
  if (sol.status == Status::optimal) {
    for (int i = 0; i < m; ++i) {
      const double dual = -obj_scale * row_scale[i] * d[n + i];
      if (i < n_eq) {
        sol.equality_duals[i] = dual;
      } else {
        sol.inequality_duals[i - n_eq] = dual;
      }
    }
  }
  return sol;
}

DualSimplex::DualSimplex(const LinearProgram& lp, SolverOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->opt = options;
  impl_->load(lp);
}

DualSimplex::~DualSimplex() = default;
DualSimplex::DualSimplex(DualSimplex&&) noexcept = default;
DualSimplex& DualSimplex::operator=(DualSimplex&&) noexcept = default;

Solution DualSimplex::solve() { return impl_->run(); }

void DualSimplex::set_bounds(int var, double lb, double ub) {
  auto& s = *impl_;
  if (var < 0 || var >= s.n) throw DimensionError("set_bounds: variable out of range");
  if (lb > ub) throw DimensionError("set_bounds: lb > ub");
  s.original.set_bounds(var, lb, ub);
  const double c = s.col_scale[var];
  s.set_var_bounds(var, std::isfinite(lb) ? lb / c : lb, std::isfinite(ub) ? ub / c : ub);
  if (s.have_basis && s.state[var] != kBasic) s.place_nonbasic(var);
}

void DualSimplex::set_equality_rhs(int row, double rhs) {
  auto& s = *impl_;
  if (row < 0 || row >= s.n_eq) throw DimensionError("set_equality_rhs: row out of range");
  s.original.set_equality_rhs(row, rhs);
  const double b = rhs * s.row_scale[row];
  s.set_var_bounds(s.n + row, b, b);
  if (s.have_basis && s.state[s.n + row] != kBasic) s.place_nonbasic(s.n + row);
}

void DualSimplex::set_inequality_rhs(int row, double rhs) {
  auto& s = *impl_;
  const int i = s.n_eq + row;
  if (row < 0 || i >= s.m) throw DimensionError("set_inequality_rhs: row out of range");
  s.original.set_inequality_rhs(row, rhs);
  s.set_var_bounds(s.n + i, -kInf, rhs * s.row_scale[i]);
  if (s.have_basis && s.state[s.n + i] != kBasic) s.place_nonbasic(s.n + i);
}

Basis DualSimplex::basis() const {
  const auto& s = *impl_;
  if (!s.have_basis) return {};
  return Basis{s.basic, s.state};
}

void DualSimplex::set_basis(const Basis& b) {
  auto& s = *impl_;
  if (b.basic.size() != static_cast<std::size_t>(s.m) ||
      b.state.size() != static_cast<std::size_t>(s.n + s.m)) {
    return;
  }
  int nb = 0;
  for (auto st : b.state) nb += st == kBasic;
  if (nb != s.m) return;
  s.basic = b.basic;
  s.state = b.state;
  std::fill(s.pos.begin(), s.pos.end(), -1);
  for (int k = 0; k < s.m; ++k) {
    const int j = s.basic[k];
    if (j < 0 || j >= s.n + s.m || s.state[j] != kBasic || s.pos[j] >= 0) {
      s.have_basis = false;
      return;
    }
    s.pos[j] = k;
  }
  for (int j = 0; j < s.n + s.m; ++j) {
    if (s.state[j] != kBasic) s.place_nonbasic(j);
  }
  s.weight.assign(s.m, 1.0);
  s.etas.clear();
  s.have_basis = true;
  s.perturbed = false;
  s.work_cost = s.cost;
}

Solution solve_lp(const LinearProgram& lp, const SolverOptions& options) {
  DualSimplex solver(lp, options);
  return solver.solve();
}

Solution solve_with_binaries(const LinearProgram& lp, std::span<const int> binary_vars,
                             const SolverOptions& options) {
  const int nb = static_cast<int>(binary_vars.size());
  if (nb > kMaxBinaries) {
    throw std::invalid_argument("solve_with_binaries: more than " + std::to_string(kMaxBinaries) +
                                " binary variables");
  }
  for (int v : binary_vars) {
    if (v < 0 || v >= lp.num_variables()) throw DimensionError("binary variable out of range");
  }
  if (nb == 0) return solve_lp(lp, options);

  DualSimplex solver(lp, options);
  Solution best;
  best.status = Status::infeasible;
  bool any_unbounded = false;
  // Lexicographic order over (b_0, ..., b_{nb-1}) with b_0 most significant.
  for (std::uint32_t mask = 0; mask < (1u << nb); ++mask) {
    for (int k = 0; k < nb; ++k) {
      const double v = (mask >> (nb - 1 - k)) & 1u ? 1.0 : 0.0;
      solver.set_bounds(binary_vars[k], v, v);
    }
    Solution s = solver.solve();
    if (s.status == Status::unbounded) any_unbounded = true;
    if (!s.optimal()) continue;
    if (!best.optimal() || s.objective_value > best.objective_value) best = std::move(s);
  }
  if (!best.optimal() && any_unbounded) best.status = Status::unbounded;
  return best;
}

}  // namespace hydro::lp
