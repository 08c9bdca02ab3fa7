#include "hydrosdp/intrastage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hydro {

std::vector<std::vector<int>> reserve_fixings(int n, bool reserves_enabled) {
  if (!reserves_enabled || n == 0) return {std::vector<int>(n, 0)};
  if (n > lp::kMaxBinaries) throw std::invalid_argument("too many reserve-qualified turbines to enumerate");
  std::vector<std::vector<int>> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> q(n);
    for (int i = 0; i < n; ++i) q[i] = (mask >> (n - 1 - i)) & 1u;
    out.push_back(std::move(q));
  }
  return out;
}

double reserve_income(const PlantTopology& plant, const std::vector<int>& q, double reserve_price, int hours) {
  const auto qualified = plant.qualified_turbines();
  if (q.size() != qualified.size()) throw std::invalid_argument("reserve fixing has the wrong length");
  double band = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i]) band += plant.units[qualified[i]].q_max;
  }
  return band * reserve_price * hours;
}

namespace {

struct Aggregate {
  const Unit* turbine = nullptr;
  const Unit* pump = nullptr;
  double spill_max = 0.0;
};

Aggregate aggregate_units(const PlantTopology& plant) {
  if (plant.reservoirs.size() != 1) throw std::invalid_argument("methods 1 and 2 need an aggregated plant");
  Aggregate a;
  for (const auto& u : plant.units) {
    if (u.kind == UnitKind::turbine) {
      if (a.turbine) throw std::invalid_argument("aggregated plant has more than one turbine");
      a.turbine = &u;
    } else {
      if (a.pump) throw std::invalid_argument("aggregated plant has more than one pump");
      a.pump = &u;
    }
  }
  if (!a.turbine) throw std::invalid_argument("aggregated plant has no turbine");
  a.spill_max = plant.reservoirs[0].spill_max;
  return a;
}

double total_inflow(const WeeklyScenario& s) {
  double a = 0.0;
  for (std::size_t r = 0; r < s.inflows.size(); ++r) a += s.weekly_inflow(static_cast<int>(r));
  return a;
}

}  // namespace

lp::LinearProgram method1_lp(const PlantTopology& plant, const WeeklyScenario& s, double W,
                             const IntrastageOptions& opt) {
  const auto agg = aggregate_units(plant);
  const auto [c_peak, c_off] = aggregate_peak_offpeak(s, opt.peak_mask);
  const int hours = s.num_hours();
  double n_peak = 0.0;
  for (bool b : opt.peak_mask) n_peak += b;
  const double n_off = hours - n_peak;
  const Unit& t = *agg.turbine;

  lp::LinearProgram lp;
  const int u = lp.add_variable(0.0, t.p_max, c_peak * n_peak, "u");
  std::vector<lp::Term> balance{{u, n_peak * t.k}};
  if (agg.pump) {
    const int p = lp.add_variable(0.0, agg.pump->p_max, -c_off * n_off, "p");
    balance.push_back({p, -n_off * agg.pump->k});
  }
  const int sp = lp.add_variable(0.0, agg.spill_max * hours, 0.0, "s");
  balance.push_back({sp, 1.0});
  if (opt.reserves_enabled && t.reserve_qualified) {
    // Committed set point runs through the off-peak hours as well.
    const double set_point = t.q_min + t.q_max;
    const int q = lp.add_variable(0.0, 1.0, c_off * n_off * set_point + t.q_max * s.reserve_price * hours, "q");
    balance.push_back({q, n_off * t.k * set_point});
    lp.add_inequality({{u, -1.0}, {q, set_point}}, 0.0);
    lp.add_inequality({{u, 1.0}, {q, t.q_max}}, t.p_max);
  }
  lp.add_equality(balance, W + total_inflow(s));
  return lp;
}

StageResult method1_stage_value(const PlantTopology& plant, const WeeklyScenario& s, double W,
                                const IntrastageOptions& opt) {
  const auto lp = method1_lp(plant, s, W, opt);
  const bool has_q = lp.name(lp.num_variables() - 1) == "q";
  const auto qualified = plant.qualified_turbines();
  StageResult r;
  r.q.assign(qualified.size(), 0);
  lp::Solution sol;
  if (has_q) {
    const int bins[] = {lp.num_variables() - 1};
    sol = lp::solve_with_binaries(lp, bins, opt.solver);
  } else {
    sol = lp::solve_lp(lp, opt.solver);
  }
  if (sol.status == lp::Status::infeasible) return r;
  if (!sol.optimal()) throw std::runtime_error(std::string("method 1 LP: ") + lp::to_string(sol.status));
  r.value = sol.objective_value;
  if (has_q && !qualified.empty()) r.q[0] = sol.x.back() > 0.5;
  if (opt.keep_schedule) {
    // Expand the block decision into hours.
    const auto agg = aggregate_units(plant);
    const int hours = s.num_hours();
    Schedule sch;
    sch.unit_power.assign(plant.units.size(), std::vector<double>(hours, 0.0));
    sch.spill.assign(1, std::vector<double>(hours, 0.0));
    sch.volume.assign(1, {});
    const double set_point = r.q.empty() || !r.q[0] ? 0.0 : agg.turbine->q_min + agg.turbine->q_max;
    const int ti = static_cast<int>(agg.turbine - plant.units.data());
    const int pi = agg.pump ? static_cast<int>(agg.pump - plant.units.data()) : -1;
    const double pump_level = agg.pump ? sol.x[1] : 0.0;
    const double spill = sol.x[agg.pump ? 2 : 1];
    sch.m.resize(hours);
    for (int h = 0; h < hours; ++h) {
      sch.node_hour.push_back(h);
      sch.node_probability.push_back(1.0);
      const bool peak = opt.peak_mask[h];
      sch.unit_power[ti][h] = peak ? sol.x[0] : set_point;
      if (pi >= 0) sch.unit_power[pi][h] = peak ? 0.0 : pump_level;
      sch.m[h] = sch.unit_power[ti][h] - (pi >= 0 ? sch.unit_power[pi][h] : 0.0);
    }
    sch.seasonal_spill = {spill};
    r.schedule = std::move(sch);
  }
  return r;
}

StageResult method2_stage_value(const PlantTopology& plant, const WeeklyScenario& s, double W,
                                const IntrastageOptions& opt) {
  const auto agg = aggregate_units(plant);
  const Unit& t = *agg.turbine;
  const int hours = s.num_hours();
  const double H = hours;
  const auto pdc = make_pdc(s);
  const double a = total_inflow(s);
  const double s_cap = agg.spill_max * H;
  const double p_bar = agg.pump ? agg.pump->p_max : 0.0;
  const double k_p = agg.pump ? agg.pump->k : 0.0;
  const int max_hp = agg.pump ? hours : 0;
  const bool with_q = opt.reserves_enabled && t.reserve_qualified;
  const double full_mass = pdc.integral(0.0, H);
  // Water sums are compared with a rounding allowance.
  const double tol = 1e-9 * (1.0 + std::abs(W) + std::abs(a) + s_cap);

  // Prefix masses: head[h] = integral over the h most expensive hours,
  // tail[h] = integral over the h cheapest hours.
  std::vector<double> head(hours + 1), tail(hours + 1);
  for (int h = 0; h <= hours; ++h) {
    head[h] = pdc.integral(0.0, h);
    tail[h] = pdc.integral(H - h, H);
  }

  StageResult best;
  best.q.assign(plant.qualified_turbines().size(), 0);
  int best_hu = 0, best_hp = 0, best_q = 0;
  double best_s = 0.0;
  for (int q = 0; q <= (with_q ? 1 : 0); ++q) {
    const double band = q * (t.q_max + t.q_min);
    const double u = t.p_max - band;
    const double fixed_value = q * (band * full_mass + t.q_max * s.reserve_price * H);
    const double fixed_water = q * t.k * band * H;
    for (int hu = 0; hu <= hours; ++hu) {
      for (int hp = 0; hp + hu <= hours && hp <= max_hp; ++hp) {
        const double water = hu * t.k * u - hp * k_p * p_bar + fixed_water;
        const double spill = W + a - water;
        if (spill < -tol || spill > s_cap + tol) continue;
        const double value = u * head[hu] - p_bar * tail[hp] + fixed_value;
        if (value > best.value) {
          best.value = value;
          best_hu = hu;
          best_hp = hp;
          best_q = q;
          best_s = std::clamp(spill, 0.0, s_cap);
        }
      }
    }
  }
  if (!best.feasible()) return best;
  if (!best.q.empty()) best.q[0] = best_q;
  if (opt.keep_schedule) {
    // Generation in the most expensive hours, pumping in the cheapest.
    std::vector<int> order(hours);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return s.prices[x] > s.prices[y]; });
    Schedule sch;
    sch.unit_power.assign(plant.units.size(), std::vector<double>(hours, 0.0));
    sch.spill.assign(1, std::vector<double>(hours, 0.0));
    sch.volume.assign(1, {});
    const int ti = static_cast<int>(agg.turbine - plant.units.data());
    const int pi = agg.pump ? static_cast<int>(agg.pump - plant.units.data()) : -1;
    const double band = best_q * (t.q_max + t.q_min);
    for (int h = 0; h < hours; ++h) sch.unit_power[ti][h] = band;
    for (int i = 0; i < best_hu; ++i) sch.unit_power[ti][order[i]] += t.p_max - band;
    for (int i = 0; i < best_hp; ++i) sch.unit_power[pi][order[hours - 1 - i]] = p_bar;
    sch.m.resize(hours);
    for (int h = 0; h < hours; ++h) {
      sch.node_hour.push_back(h);
      sch.node_probability.push_back(1.0);
      sch.m[h] = sch.unit_power[ti][h] - (pi >= 0 ? sch.unit_power[pi][h] : 0.0);
    }
    sch.seasonal_spill = {best_s};
    best.schedule = std::move(sch);
  }
  return best;
}

BundleLp::BundleLp(const PlantTopology& plant, const ScenarioTree& tree) : BundleLp(plant, tree, Options{}) {}

BundleLp::BundleLp(const PlantTopology& plant, const ScenarioTree& tree, Options options)
    : plant_(&plant), tree_(&tree) {
  build(options);
  simplex_.emplace(lp_, options.solver);
}

void BundleLp::build(const Options& options) {
  const auto& plant = *plant_;
  const auto& tree = *tree_;
  const auto seasonal = plant.seasonal_reservoirs();
  if (seasonal.size() != 1) throw std::invalid_argument("hourly methods support exactly one seasonal reservoir");
  seasonal_ = seasonal[0];
  daily_ = plant.daily_reservoirs();
  n_units_ = static_cast<int>(plant.units.size());
  n_daily_ = static_cast<int>(daily_.size());
  n_nodes_ = tree.num_nodes();
  per_node_ = n_units_ + 2 * n_daily_;
  if (tree.inflows().size() != plant.reservoirs.size()) {
    throw std::invalid_argument("tree inflows need one row per plant reservoir");
  }
  const int hours = tree.num_hours();
  std::vector<int> slot(plant.reservoirs.size(), -1);  // reservoir -> daily slot
  for (int d = 0; d < n_daily_; ++d) slot[daily_[d]] = d;
  std::vector<int> from(n_units_), to(n_units_);
  for (int k = 0; k < n_units_; ++k) {
    from[k] = plant.reservoir_index(plant.units[k].from);
    to[k] = plant.reservoir_index(plant.units[k].to);
  }

  for (int n = 0; n < n_nodes_; ++n) {
    const auto& node = tree.node(n);
    for (int k = 0; k < n_units_; ++k) {
      const auto& u = plant.units[k];
      const double sign = u.kind == UnitKind::turbine ? 1.0 : -1.0;
      lp_.add_variable(0.0, u.p_max, sign * node.probability * node.price,
                       u.id + "_" + std::to_string(n));
    }
    for (int d = 0; d < n_daily_; ++d) {
      lp_.add_variable(0.0, plant.reservoirs[daily_[d]].spill_max, 0.0,
                       "s_" + plant.reservoirs[daily_[d]].id + "_" + std::to_string(n));
    }
    for (int d = 0; d < n_daily_; ++d) {
      const double cap = (node.hour == hours - 1 && options.empty_at_end) ? 0.0 : plant.reservoirs[daily_[d]].v_max;
      lp_.add_variable(0.0, cap, 0.0, "v_" + plant.reservoirs[daily_[d]].id + "_" + std::to_string(n));
    }
  }
  const double weekly_spill = plant.reservoirs[seasonal_].spill_max * hours;
  for (int s = 0; s < tree.num_scenarios(); ++s) {
    lp_.add_variable(0.0, weekly_spill, 0.0, "S_" + std::to_string(s));
  }

  // Daily reservoir balances.
  for (int n = 0; n < n_nodes_; ++n) {
    const auto& node = tree.node(n);
    for (int d = 0; d < n_daily_; ++d) {
      const int r = daily_[d];
      std::vector<lp::Term> terms{{volume_var(d, n), 1.0}, {spill_var(d, n), 1.0}};
      double rhs = tree.inflows()[r][node.hour];
      if (node.parent >= 0) {
        terms.push_back({volume_var(d, node.parent), -1.0});
      } else {
        start_rows_.push_back({lp_.num_equalities(), r, rhs});
        if (!options.daily_start.empty()) rhs += options.daily_start.at(r);
      }
      for (int k = 0; k < n_units_; ++k) {
        if (from[k] == r) terms.push_back({unit_var(k, n), plant.units[k].k});
        if (to[k] == r) terms.push_back({unit_var(k, n), -plant.units[k].k});
      }
      lp_.add_equality(std::move(terms), rhs);
    }
  }

  // Weekly seasonal coupling along every scenario path.
  seasonal_inflow_ = 0.0;
  for (double a : tree.inflows()[seasonal_]) seasonal_inflow_ += a;
  first_coupling_ = lp_.num_equalities();
  for (int s = 0; s < tree.num_scenarios(); ++s) {
    std::vector<lp::Term> terms;
    for (int h = 0; h < hours; ++h) {
      const int n = tree.node_of(h, s);
      for (int k = 0; k < n_units_; ++k) {
        if (from[k] == seasonal_) terms.push_back({unit_var(k, n), plant.units[k].k});
        if (to[k] == seasonal_) terms.push_back({unit_var(k, n), -plant.units[k].k});
      }
    }
    terms.push_back({seasonal_spill_var(s), 1.0});
    lp_.add_equality(std::move(terms), seasonal_inflow_);
  }
}

double BundleLp::coupling_rhs(double W) const { return W + seasonal_inflow_; }

void BundleLp::set_q(const std::vector<int>& q) {
  const auto qualified = plant_->qualified_turbines();
  if (q.size() != qualified.size()) throw std::invalid_argument("reserve fixing has the wrong length");
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& u = plant_->units[qualified[i]];
    const double lo = q[i] ? u.q_min + u.q_max : 0.0;
    const double hi = q[i] ? u.p_max - u.q_max : u.p_max;
    for (int n = 0; n < n_nodes_; ++n) {
      const int v = unit_var(qualified[i], n);
      if (lp_.lower_bounds()[v] == lo && lp_.upper_bounds()[v] == hi) continue;
      lp_.set_bounds(v, lo, hi);
      simplex_->set_bounds(v, lo, hi);
    }
  }
}

void BundleLp::set_daily_start(const std::vector<double>& start) {
  if (start.size() != plant_->reservoirs.size()) throw std::invalid_argument("one start volume per reservoir");
  for (const auto& row : start_rows_) {
    const double rhs = row.inflow + start[row.reservoir];
    lp_.set_equality_rhs(row.row, rhs);
    simplex_->set_equality_rhs(row.row, rhs);
  }
}

double BundleLp::solve(double W) {
  const double rhs = coupling_rhs(W);
  for (int s = 0; s < tree_->num_scenarios(); ++s) {
    lp_.set_equality_rhs(first_coupling_ + s, rhs);
    simplex_->set_equality_rhs(first_coupling_ + s, rhs);
  }
  solution_ = simplex_->solve();
  if (solution_.status == lp::Status::infeasible) return kInfeasible;
  if (!solution_.optimal()) {
    throw std::runtime_error(std::string("intrastage LP: ") + lp::to_string(solution_.status));
  }
  return solution_.objective_value;
}

Schedule BundleLp::schedule() const {
  if (!solution_.optimal()) throw std::logic_error("no optimal solution to extract a schedule from");
  const auto& x = solution_.x;
  Schedule sch;
  const std::size_t nr = plant_->reservoirs.size();
  sch.unit_power.assign(n_units_, std::vector<double>(n_nodes_));
  sch.spill.assign(nr, {});
  sch.volume.assign(nr, {});
  for (int d = 0; d < n_daily_; ++d) {
    sch.spill[daily_[d]].resize(n_nodes_);
    sch.volume[daily_[d]].resize(n_nodes_);
  }
  sch.m.assign(n_nodes_, 0.0);
  for (int n = 0; n < n_nodes_; ++n) {
    sch.node_hour.push_back(tree_->node(n).hour);
    sch.node_probability.push_back(tree_->node(n).probability);
    for (int k = 0; k < n_units_; ++k) {
      const double p = x[unit_var(k, n)];
      sch.unit_power[k][n] = p;
      sch.m[n] += plant_->units[k].kind == UnitKind::turbine ? p : -p;
    }
    for (int d = 0; d < n_daily_; ++d) {
      sch.spill[daily_[d]][n] = x[spill_var(d, n)];
      sch.volume[daily_[d]][n] = x[volume_var(d, n)];
    }
  }
  for (int s = 0; s < tree_->num_scenarios(); ++s) sch.seasonal_spill.push_back(x[seasonal_spill_var(s)]);
  return sch;
}

namespace {

std::vector<double> normalized_weights(std::span<const WeeklyScenario> scenarios) {
  std::vector<double> w;
  double total = 0.0;
  for (const auto& s : scenarios) total += s.probability;
  for (const auto& s : scenarios) w.push_back(total > 0.0 ? s.probability / total : 1.0 / scenarios.size());
  return w;
}

}  // namespace

StageResult method3_intrastage(const PlantTopology& plant, std::span<const WeeklyScenario> scenarios, double W,
                               const IntrastageOptions& opt) {
  if (scenarios.empty()) throw std::invalid_argument("method 3 needs at least one scenario");
  const auto fixings = reserve_fixings(static_cast<int>(plant.qualified_turbines().size()), opt.reserves_enabled);
  const auto weight = normalized_weights(scenarios);
  // value[s][f]
  std::vector<std::vector<double>> value(scenarios.size());
  std::vector<std::optional<Schedule>> schedules(fixings.size());
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto tree = degenerate_tree(scenarios[s]);
    BundleLp bundle(plant, tree, BundleLp::Options{{}, true, opt.solver});
    for (std::size_t f = 0; f < fixings.size(); ++f) {
      bundle.set_q(fixings[f]);
      double v = bundle.solve(W);
      if (v != kInfeasible) {
        v += reserve_income(plant, fixings[f], scenarios[s].reserve_price, scenarios[s].num_hours());
        if (opt.keep_schedule && s == 0) schedules[f] = bundle.schedule();
      }
      value[s].push_back(v);
    }
  }

  StageResult r;
  r.q = fixings[0];
  if (opt.per_scenario_q) {
    double total = 0.0;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < fixings.size(); ++f) {
        if (value[s][f] > value[s][best]) best = f;
      }
      if (value[s][best] == kInfeasible) return StageResult{kInfeasible, fixings[0], {}};
      total += weight[s] * value[s][best];
      if (s == 0) {
        r.q = fixings[best];
        if (opt.keep_schedule) r.schedule = schedules[best];
      }
    }
    r.value = total;
    return r;
  }
  for (std::size_t f = 0; f < fixings.size(); ++f) {
    double total = 0.0;
    bool ok = true;
    for (std::size_t s = 0; s < scenarios.size() && ok; ++s) {
      if (value[s][f] == kInfeasible) ok = false;
      total += weight[s] * value[s][f];
    }
    if (ok && total > r.value) {
      r.value = total;
      r.q = fixings[f];
      if (opt.keep_schedule) r.schedule = schedules[f];
    }
  }
  return r;
}

StageResult method3_intrastage(const PlantTopology& plant, const WeeklyScenario& scenario, double W,
                               const IntrastageOptions& opt) {
  return method3_intrastage(plant, std::span<const WeeklyScenario>(&scenario, 1), W, opt);
}

StageResult method4_intrastage(const PlantTopology& plant, const ScenarioTree& tree, double W,
                               const IntrastageOptions& opt) {
  const auto fixings = reserve_fixings(static_cast<int>(plant.qualified_turbines().size()), opt.reserves_enabled);
  BundleLp bundle(plant, tree, BundleLp::Options{{}, true, opt.solver});
  StageResult r;
  r.q = fixings[0];
  for (const auto& q : fixings) {
    bundle.set_q(q);
    double v = bundle.solve(W);
    if (v == kInfeasible) continue;
    v += reserve_income(plant, q, tree.reserve_price(), tree.num_hours());
    if (v > r.value) {
      r.value = v;
      r.q = q;
      if (opt.keep_schedule) r.schedule = bundle.schedule();
    }
  }
  return r;
}

ValueCube hourly_value_table(const PlantTopology& plant, std::span<const ScenarioTree> trees,
                             std::span<const double> W_grid, const IntrastageOptions& opt, long long* lp_count,
                             std::vector<std::vector<lp::Basis>>* warm_start) {
  if (!std::is_sorted(W_grid.begin(), W_grid.end())) throw std::invalid_argument("W grid must be ascending");
  const auto fixings = reserve_fixings(static_cast<int>(plant.qualified_turbines().size()), opt.reserves_enabled);
  ValueCube cube(trees.size());
  if (warm_start) {
    warm_start->resize(trees.size());
    for (auto& slot : *warm_start) slot.resize(std::max(slot.size(), fixings.size()));
  }
  for (std::size_t t = 0; t < trees.size(); ++t) {
    BundleLp bundle(plant, trees[t], BundleLp::Options{{}, true, opt.solver});
    cube[t].assign(fixings.size(), std::vector<double>(W_grid.size(), kInfeasible));
    for (std::size_t f = 0; f < fixings.size(); ++f) {
      bundle.set_q(fixings[f]);
      const double income = reserve_income(plant, fixings[f], trees[t].reserve_price(), trees[t].num_hours());
      for (std::size_t w = 0; w < W_grid.size(); ++w) {
        if (warm_start && w == 0 && !(*warm_start)[t][f].empty()) bundle.set_basis((*warm_start)[t][f]);
        const double v = bundle.solve(W_grid[w]);
        if (warm_start && w == 0) (*warm_start)[t][f] = bundle.basis();
        if (lp_count) ++*lp_count;
        cube[t][f][w] = v == kInfeasible ? kInfeasible : v + income;
      }
    }
  }
  return cube;
}

}  // namespace hydro
