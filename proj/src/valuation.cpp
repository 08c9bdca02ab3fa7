#include "hydrosdp/valuation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hydro {

const char* to_string(Method m) {
  switch (m) {
    case Method::m1: return "M1";
    case Method::m2: return "M2";
    case Method::m3: return "M3";
    case Method::m4: return "M4";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  std::string t = text;
  if (!t.empty() && (t[0] == 'M' || t[0] == 'm')) t = t.substr(1);
  if (t == "1") return Method::m1;
  if (t == "2") return Method::m2;
  if (t == "3") return Method::m3;
  if (t == "4") return Method::m4;
  throw std::invalid_argument("unknown method '" + text + "'");
}

namespace {

const PlantTopology& plant_for(const PlantTopology& plant, Method method, PlantTopology& storage) {
  if (!uses_aggregated_plant(method)) return plant;
  storage = aggregate_plant(plant);
  return storage;
}

int seasonal_index(const PlantTopology& plant) {
  const auto s = plant.seasonal_reservoirs();
  if (s.size() != 1) throw std::invalid_argument("exactly one seasonal reservoir is required");
  return s[0];
}

// Piecewise-linear interpolation; v must lie within the grid.
double interpolate(const std::vector<double>& grid, const std::vector<double>& values, double v) {
  if (grid.size() == 1) return values[0];
  auto it = std::upper_bound(grid.begin(), grid.end(), v);
  std::size_t i = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  i = std::min(i, grid.size() - 2);
  const double t = (v - grid[i]) / (grid[i + 1] - grid[i]);
  if (t == 0.0) return values[i];
  if (t == 1.0) return values[i + 1];
  return values[i] + t * (values[i + 1] - values[i]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Grids make_grids(const PlantTopology& full, const StochasticParams& params, Method method, int n_v, int n_w) {
  if (n_v < 2 || n_w < 2) throw std::invalid_argument("grids need at least two levels");
  PlantTopology storage;
  const auto& plant = plant_for(full, method, storage);
  validate_params(params, static_cast<int>(full.reservoirs.size()));

  double release = 0.0, lift = 0.0, v_max = 0.0;
  if (uses_aggregated_plant(method)) {
    v_max = plant.reservoirs[0].v_max;
    for (const auto& u : plant.units) {
      (u.kind == UnitKind::turbine ? release : lift) += u.k * u.p_max * kHoursPerWeek;
    }
  } else {
    const int s = seasonal_index(plant);
    const auto& id = plant.reservoirs[s].id;
    v_max = plant.reservoirs[s].v_max;
    for (const auto& u : plant.units) {
      if (u.from == id) release += u.k * u.p_max * kHoursPerWeek;
      if (u.to == id) lift += u.k * u.p_max * kHoursPerWeek;
    }
  }
  if (!(v_max > 0.0)) throw std::invalid_argument("seasonal reservoir has no capacity");

  Grids g;
  for (int i = 0; i < n_v; ++i) g.filling.push_back(v_max * i / (n_v - 1));
  g.filling.back() = v_max;
  const double lo = -lift, hi = release;
  if (!(hi > lo)) throw std::invalid_argument("empty discharge range");
  for (int i = 0; i < n_w; ++i) g.discharge.push_back(lo + (hi - lo) * i / (n_w - 1));
  g.discharge.back() = hi;
  if (lo <= 0.0 && hi >= 0.0) {
    std::size_t z = 0;
    for (std::size_t i = 1; i < g.discharge.size(); ++i) {
      if (std::abs(g.discharge[i]) < std::abs(g.discharge[z])) z = i;
    }
    g.discharge[z] = 0.0;
  }
  return g;
}

double energy_per_volume(const PlantTopology& full, Method method) {
  PlantTopology storage;
  const auto& plant = plant_for(full, method, storage);
  const int s = uses_aggregated_plant(method) ? 0 : seasonal_index(plant);
  // Best path from each reservoir down to the tailwater; turbine routing is acyclic.
  std::vector<double> memo(plant.reservoirs.size(), -1.0);
  std::function<double(int)> best = [&](int r) -> double {
    if (memo[r] >= 0.0) return memo[r];
    double e = 0.0;
    for (const auto& u : plant.units) {
      if (u.kind != UnitKind::turbine || u.from != plant.reservoirs[r].id) continue;
      const int next = u.to.empty() ? -1 : plant.reservoir_index(u.to);
      e = std::max(e, 1.0 / u.k + (next >= 0 ? best(next) : 0.0));
    }
    return memo[r] = e;
  };
  return best(s);
}

double default_terminal_value(const PlantTopology& plant, const StochasticParams& params, Method method) {
  if (params.weekly_price_mean.empty()) throw std::invalid_argument("no weeks");
  const double mean = std::accumulate(params.weekly_price_mean.begin(), params.weekly_price_mean.end(), 0.0) /
                      params.num_weeks();
  return mean * energy_per_volume(plant, method);
}

RandomStream valuation_stream(std::uint64_t seed, int week, int scenario) {
  return RandomStream::derive(seed, (1ULL << 40) | static_cast<std::uint64_t>(week),
                              static_cast<std::uint64_t>(scenario));
}

std::vector<double> stage_value_table(const PlantTopology& full, const StochasticParams& params, const Grids& grids,
                                      const ValuationConfig& config, int week, long long* evaluations,
                                      std::vector<std::vector<lp::Basis>>* warm_start) {
  if (config.n_scenarios < 1) throw std::invalid_argument("at least one scenario per stage is required");
  const auto& W = grids.discharge;
  IntrastageOptions opt;
  opt.reserves_enabled = config.reserves_enabled;
  opt.solver = config.solver;
  const int n = config.n_scenarios;

  if (uses_aggregated_plant(config.method)) {
    const auto agg = aggregate_plant(full);
    std::vector<double> table(W.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      auto stream = valuation_stream(config.seed, week, i);
      const auto s = sample_week(params, week, stream);
      for (std::size_t w = 0; w < W.size(); ++w) {
        if (table[w] == kInfeasible) continue;
        const auto r = config.method == Method::m1 ? method1_stage_value(agg, s, W[w], opt)
                                                   : method2_stage_value(agg, s, W[w], opt);
        if (evaluations) ++*evaluations;
        table[w] = r.feasible() ? table[w] + r.value / n : kInfeasible;
      }
    }
    return table;
  }

  std::vector<ScenarioTree> trees;
  for (int i = 0; i < n; ++i) {
    auto stream = valuation_stream(config.seed, week, i);
    if (config.method == Method::m3) {
      trees.push_back(degenerate_tree(sample_week(params, week, stream)));
    } else {
      trees.push_back(build_price_tree(params, week, config.branching, stream));
    }
  }
  const auto cube = hourly_value_table(full, trees, W, opt, evaluations, warm_start);
  const std::size_t n_fix = cube[0].size();
  std::vector<double> table(W.size(), kInfeasible);
  for (std::size_t w = 0; w < W.size(); ++w) {
    if (config.per_scenario_q) {
      double total = 0.0;
      for (int i = 0; i < n && total != kInfeasible; ++i) {
        double best = kInfeasible;
        for (std::size_t f = 0; f < n_fix; ++f) best = std::max(best, cube[i][f][w]);
        total = best == kInfeasible ? kInfeasible : total + best / n;
      }
      table[w] = total;
      continue;
    }
    for (std::size_t f = 0; f < n_fix; ++f) {
      double total = 0.0;
      for (int i = 0; i < n && total != kInfeasible; ++i) {
        total = cube[i][f][w] == kInfeasible ? kInfeasible : total + cube[i][f][w] / n;
      }
      if (total > table[w]) table[w] = total;
    }
  }
  return table;
}

std::vector<double> bellman_step(const std::vector<double>& filling, const std::vector<double>& discharge,
                                 const std::vector<double>& stage_values, const std::vector<double>& next_theta) {
  if (stage_values.size() != discharge.size() || next_theta.size() != filling.size() || filling.empty()) {
    throw std::invalid_argument("bellman_step: size mismatch");
  }
  const double v_max = filling.back();
  const double slack = 1e-12 * std::max(1.0, v_max);
  // Smaller |W| first so that ties keep it.
  std::vector<std::size_t> order(discharge.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(discharge[a]) < std::abs(discharge[b]); });
  std::vector<double> theta(filling.size(), kInfeasible);
  for (std::size_t i = 0; i < filling.size(); ++i) {
    for (std::size_t w : order) {
      if (stage_values[w] == kInfeasible) continue;
      double end = filling[i] - discharge[w];
      if (end < -slack) continue;
      end = std::clamp(end, 0.0, v_max);
      const double value = stage_values[w] + interpolate(filling, next_theta, end);
      if (value > theta[i]) theta[i] = value;
    }
    if (theta[i] == kInfeasible) {
      throw std::runtime_error("no feasible weekly discharge at filling " + std::to_string(filling[i]));
    }
  }
  return theta;
}

ValueFunction backward_induction(const PlantTopology& plant, const StochasticParams& params, const Grids& grids,
                                 const ValuationConfig& config, ValuationStats* stats) {
  const auto t0 = std::chrono::steady_clock::now();
  if (uses_aggregated_plant(config.method)) {
    validate_topology(aggregate_plant(plant));
  } else {
    validate_topology(plant);
    seasonal_index(plant);
  }
  validate_params(params, static_cast<int>(plant.reservoirs.size()));
  if (grids.filling.size() < 2 || !std::is_sorted(grids.filling.begin(), grids.filling.end()) ||
      grids.filling.front() != 0.0) {
    throw std::invalid_argument("filling grid must start at 0 and increase");
  }
  if (!std::is_sorted(grids.discharge.begin(), grids.discharge.end())) {
    throw std::invalid_argument("discharge grid must increase");
  }

  const int T = params.num_weeks();
  ValueFunction vf;
  vf.method = config.method;
  vf.reserves_enabled = config.reserves_enabled;
  vf.filling = grids.filling;
  vf.theta.assign(T + 1, {});
  const double lambda = std::isnan(config.terminal_value) ? default_terminal_value(plant, params, config.method)
                                                          : config.terminal_value;
  for (double v : vf.filling) vf.theta[T].push_back(lambda * v);

  long long evaluations = 0;
  std::vector<std::vector<lp::Basis>> warm;
  for (int t = T; t >= 1; --t) {
    const auto tw = std::chrono::steady_clock::now();
    const auto table = stage_value_table(plant, params, grids, config, t, &evaluations, &warm);
    vf.theta[t - 1] = bellman_step(vf.filling, grids.discharge, table, vf.theta[t]);
    if (config.progress) config.progress(t, seconds_since(tw));
  }
  if (stats) {
    stats->stage_evaluations = evaluations;
    stats->seconds = seconds_since(t0);
  }
  return vf;
}

double interpolate_value(const ValueFunction& vf, int week, double v) {
  if (week < 1 || week > vf.num_weeks() + 1) throw std::out_of_range("week out of range");
  const double v_max = vf.v_max();
  if (v < -1e-9 * v_max || v > v_max * (1.0 + 1e-9)) throw std::out_of_range("filling outside the grid");
  return interpolate(vf.filling, vf.theta[week - 1], std::clamp(v, 0.0, v_max));
}

WaterValueTable water_values(const ValueFunction& vf) {
  WaterValueTable t;
  for (std::size_t i = 0; i + 1 < vf.filling.size(); ++i) t.filling_mid.push_back(0.5 * (vf.filling[i] + vf.filling[i + 1]));
  for (const auto& row : vf.theta) {
    std::vector<double> wv;
    for (std::size_t i = 0; i + 1 < vf.filling.size(); ++i) {
      wv.push_back((row[i + 1] - row[i]) / (vf.filling[i + 1] - vf.filling[i]));
    }
    t.values.push_back(std::move(wv));
  }
  return t;
}

double water_value_at(const ValueFunction& vf, int week, double v) {
  if (week < 1 || week > vf.num_weeks() + 1) throw std::out_of_range("week out of range");
  const auto& g = vf.filling;
  const auto& row = vf.theta[week - 1];
  auto it = std::upper_bound(g.begin(), g.end(), v);
  std::size_t i = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
  i = std::min(i, g.size() - 2);
  return (row[i + 1] - row[i]) / (g[i + 1] - g[i]);
}

void check_monotone(const ValueFunction& vf, double tolerance) {
  for (std::size_t t = 0; t < vf.theta.size(); ++t) {
    const auto& row = vf.theta[t];
    for (std::size_t i = 0; i + 1 < row.size(); ++i) {
      if (row[i + 1] < row[i] - tolerance * (1.0 + std::abs(row[i]))) {
        throw std::logic_error("value function decreases in filling at week " + std::to_string(t + 1));
      }
    }
  }
}

}  // namespace hydro
