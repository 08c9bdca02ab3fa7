#include "hydrosdp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "hydrosdp/intrastage.hpp"

namespace hydro {

namespace {

// MWh per m3 on the best turbine path from every reservoir to the tailwater.
std::vector<double> reservoir_energy(const PlantTopology& plant) {
  const std::size_t n = plant.reservoirs.size();
  std::vector<double> memo(n, -1.0);
  std::function<double(int)> best = [&](int r) -> double {
    if (memo[r] >= 0.0) return memo[r];
    double e = 0.0;
    for (const auto& u : plant.units) {
      if (u.kind != UnitKind::turbine || u.from != plant.reservoirs[r].id) continue;
      const int next = plant.reservoir_index(u.to);
      e = std::max(e, 1.0 / u.k + (next >= 0 ? best(next) : 0.0));
    }
    return memo[r] = e;
  };
  std::vector<double> e(n);
  for (std::size_t r = 0; r < n; ++r) e[r] = best(static_cast<int>(r));
  return e;
}

double seasonal_energy(const PlantTopology& plant) {
  const auto s = plant.seasonal_reservoirs();
  if (s.empty()) throw std::invalid_argument("plant has no seasonal reservoir");
  return reservoir_energy(plant)[s[0]];
}

// Turbines ordered from the top of the cascade down.
std::vector<int> turbine_order(const PlantTopology& plant) {
  const std::size_t n = plant.reservoirs.size();
  std::vector<int> depth(n, -1);
  std::function<int(int)> level = [&](int r) -> int {
    if (depth[r] >= 0) return depth[r];
    int d = 0;
    for (const auto& u : plant.units) {
      if (u.kind != UnitKind::turbine || u.to != plant.reservoirs[r].id) continue;
      d = std::max(d, level(plant.reservoir_index(u.from)) + 1);
    }
    return depth[r] = d;
  };
  auto order = plant.turbines();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return level(plant.reservoir_index(plant.units[a].from)) < level(plant.reservoir_index(plant.units[b].from));
  });
  return order;
}

// Committed set point per unit, 0 when not committed.
std::vector<double> set_points(const PlantTopology& plant, const std::vector<int>& q) {
  const auto qualified = plant.qualified_turbines();
  if (q.size() != qualified.size()) throw std::invalid_argument("reserve fixing has the wrong length");
  std::vector<double> sp(plant.units.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& u = plant.units[qualified[i]];
    if (q[i]) sp[qualified[i]] = u.q_min + u.q_max;
  }
  return sp;
}

}  // namespace

std::vector<double> dispatch_thresholds(const PlantTopology& plant, double water_value, double reference_energy) {
  if (!(reference_energy > 0.0)) throw std::invalid_argument("reference energy must be positive");
  const auto e = reservoir_energy(plant);
  auto value_of = [&](const std::string& id) {
    const int r = plant.reservoir_index(id);
    return r < 0 ? 0.0 : water_value * e[r] / reference_energy;
  };
  std::vector<double> thr;
  for (const auto& u : plant.units) {
    const double drop = u.kind == UnitKind::turbine ? value_of(u.from) - value_of(u.to)
                                                    : value_of(u.to) - value_of(u.from);
    thr.push_back(drop * u.k);
  }
  return thr;
}

std::vector<double> obligation_reserve(const PlantTopology& plant, const std::vector<int>& q, int hours_left) {
  const auto sp = set_points(plant, q);
  std::vector<double> net(plant.reservoirs.size(), 0.0);
  for (std::size_t k = 0; k < plant.units.size(); ++k) {
    if (sp[k] == 0.0) continue;
    const auto& u = plant.units[k];
    const int from = plant.reservoir_index(u.from), to = plant.reservoir_index(u.to);
    if (from >= 0) net[from] += u.k * sp[k];
    if (to >= 0) net[to] -= u.k * sp[k];
  }
  for (auto& x : net) x = std::max(0.0, x) * hours_left;
  return net;
}

WeekSchedule dispatch_heuristic(const PlantTopology& plant, const std::vector<double>& start,
                                const WeeklyScenario& scenario, double water_value, const std::vector<int>& q,
                                const DispatchOptions& opt) {
  const std::size_t nr = plant.reservoirs.size(), nu = plant.units.size();
  if (start.size() != nr || scenario.inflows.size() != nr) {
    throw std::invalid_argument("dispatch needs one volume and one inflow row per reservoir");
  }
  const double e_ref = std::isnan(opt.reference_energy) ? seasonal_energy(plant) : opt.reference_energy;
  const auto thr = dispatch_thresholds(plant, water_value, e_ref);
  const auto sp = set_points(plant, q);
  const auto order = turbine_order(plant);
  const auto pumps = plant.pumps();
  std::vector<int> from(nu), to(nu);
  for (std::size_t k = 0; k < nu; ++k) {
    from[k] = plant.reservoir_index(plant.units[k].from);
    to[k] = plant.reservoir_index(plant.units[k].to);
  }
  const int hours = scenario.num_hours();

  WeekSchedule w;
  w.power.assign(nu, std::vector<double>(hours, 0.0));
  w.spill.assign(nr, std::vector<double>(hours, 0.0));
  w.volume.assign(nr, std::vector<double>(hours, 0.0));
  w.m.assign(hours, 0.0);
  auto vol = start;
  for (int h = 0; h < hours; ++h) {
    const double c = scenario.prices[h];
    for (std::size_t r = 0; r < nr; ++r) vol[r] += scenario.inflows[r][h];
    const auto keep = obligation_reserve(plant, q, hours - 1 - h);
    auto move = [&](std::size_t k, double x) {
      const double water = plant.units[k].k * x;
      if (from[k] >= 0) vol[from[k]] -= water;
      if (to[k] >= 0) vol[to[k]] += water;
      w.power[k][h] += x;
    };

    for (int k : order) {
      if (sp[k] == 0.0) continue;
      const double x = std::min(sp[k], std::max(0.0, vol[from[k]]) / plant.units[k].k);
      if (x < sp[k] * (1.0 - 1e-9)) ++w.band_shortfalls;
      move(k, x);
    }
    for (int k : order) {
      const auto& u = plant.units[k];
      if (!(c > (1.0 + opt.gen_threshold_margin) * thr[k])) continue;
      const double cap = (sp[k] > 0.0 ? u.p_max - u.q_max : u.p_max) - w.power[k][h];
      const double avail = (vol[from[k]] - keep[from[k]]) / u.k;
      const double room = to[k] >= 0 ? (plant.reservoirs[to[k]].v_max - vol[to[k]]) / u.k : cap;
      const double x = std::min({cap, avail, room});
      if (x > 0.0) move(k, x);
    }
    for (int k : pumps) {
      const auto& u = plant.units[k];
      if (!(c < (1.0 - opt.pump_threshold_margin) * thr[k])) continue;
      const double avail = from[k] >= 0 ? (vol[from[k]] - keep[from[k]]) / u.k : u.p_max;
      const double room = to[k] >= 0 ? (plant.reservoirs[to[k]].v_max - vol[to[k]]) / u.k : u.p_max;
      const double x = std::min({u.p_max, avail, room});
      if (x > 0.0) move(k, x);
    }

    for (std::size_t r = 0; r < nr; ++r) {
      const double over = vol[r] - plant.reservoirs[r].v_max;
      if (over > 0.0) {
        w.spill[r][h] = over;
        vol[r] = plant.reservoirs[r].v_max;
      }
      w.volume[r][h] = vol[r];
    }
    for (std::size_t k = 0; k < nu; ++k) {
      w.m[h] += plant.units[k].kind == UnitKind::turbine ? w.power[k][h] : -w.power[k][h];
    }
    w.energy_profit += c * w.m[h];
  }
  w.reserve_income = reserve_income(plant, q, scenario.reserve_price, hours);
  return w;
}

double value_state(const PlantTopology& plant, Method method, const std::vector<double>& volumes) {
  if (uses_aggregated_plant(method)) return std::accumulate(volumes.begin(), volumes.end(), 0.0);
  const auto s = plant.seasonal_reservoirs();
  if (s.size() != 1) throw std::invalid_argument("exactly one seasonal reservoir is required");
  return volumes.at(s[0]);
}

double start_water_value(const PlantTopology& plant, const ValueFunction& vf, int week,
                         const std::vector<double>& volumes) {
  const double v = std::clamp(value_state(plant, vf.method, volumes), 0.0, vf.v_max());
  return std::max(0.0, water_value_at(vf, week + 1, v));
}

struct OfferPlanner::Week {
  WeeklyScenario forecast;
  std::unique_ptr<ScenarioTree> tree;
  std::unique_ptr<BundleLp> lp;
  std::vector<std::vector<int>> fixings;
  std::vector<lp::Basis> canonical;
};

OfferPlanner::OfferPlanner(const PlantTopology& plant, const ValueFunction& vf, const StochasticParams& params,
                           DispatchOptions opt)
    : plant_(&plant), vf_(&vf), params_(&params), opt_(opt) {
  if (vf.num_weeks() != params.num_weeks()) throw std::invalid_argument("value function and market differ in weeks");
  if (std::isnan(opt_.reference_energy)) opt_.reference_energy = energy_per_volume(plant, vf.method);
  weeks_.resize(params.num_weeks());
}

OfferPlanner::~OfferPlanner() = default;

OfferPlanner::Week& OfferPlanner::week_cache(int week) {
  if (week < 1 || week > params_->num_weeks()) throw std::out_of_range("week out of range");
  auto& slot = weeks_[week - 1];
  if (slot) return *slot;
  slot = std::make_unique<Week>();
  auto& wk = *slot;
  wk.forecast = expected_week(*params_, week);
  wk.tree = std::make_unique<ScenarioTree>(degenerate_tree(wk.forecast));
  BundleLp::Options o;
  o.empty_at_end = false;
  wk.lp = std::make_unique<BundleLp>(*plant_, *wk.tree, o);
  wk.fixings = reserve_fixings(static_cast<int>(plant_->qualified_turbines().size()), true);
  for (const auto& f : wk.fixings) {
    wk.lp->set_q(f);
    wk.lp->solve(0.0);
    wk.canonical.push_back(wk.lp->basis());
  }
  return wk;
}

std::vector<OfferCandidate> OfferPlanner::candidates(int week, const std::vector<double>& volumes) {
  auto& wk = week_cache(week);
  const int seasonal = plant_->seasonal_reservoirs().at(0);
  const double wv = start_water_value(*plant_, *vf_, week, volumes);
  std::vector<OfferCandidate> out;
  for (std::size_t f = 0; f < wk.fixings.size(); ++f) {
    OfferCandidate c;
    c.q = wk.fixings[f];
    const auto keep = obligation_reserve(*plant_, c.q, wk.forecast.num_hours());
    c.feasible = true;
    for (std::size_t r = 0; r < volumes.size(); ++r) {
      if (volumes[r] < keep[r] - 1e-9 * (1.0 + plant_->reservoirs[r].v_max)) c.feasible = false;
    }
    if (c.feasible) {
      const auto sched = dispatch_heuristic(*plant_, volumes, wk.forecast, wv, c.q, opt_);
      std::vector<double> end(volumes.size());
      for (std::size_t r = 0; r < end.size(); ++r) end[r] = sched.volume[r].back();
      c.W = volumes[seasonal] - end[seasonal];
      wk.lp->set_q(c.q);
      wk.lp->set_daily_start(volumes);
      wk.lp->set_basis(wk.canonical[f]);
      const double v = wk.lp->solve(c.W);
      c.from_lp = v != kInfeasible;
      c.stage = c.from_lp ? v : sched.energy_profit;
      const double state = std::clamp(value_state(*plant_, vf_->method, end), 0.0, vf_->v_max());
      c.future = interpolate_value(*vf_, week + 1, state);
      c.total = c.stage + sched.reserve_income + c.future;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<int> OfferPlanner::decide(int week, const std::vector<double>& volumes) {
  const auto cands = candidates(week, volumes);
  const OfferCandidate* best = nullptr;
  for (const auto& c : cands) {
    if (c.feasible && (!best || c.total > best->total)) best = &c;
  }
  return best->q;
}

std::vector<int> reserve_offer_decision(const PlantTopology& plant, const ValueFunction& vf,
                                        const StochasticParams& params, int week, const std::vector<double>& volumes,
                                        bool reserves_enabled, const DispatchOptions& opt) {
  const int n = static_cast<int>(plant.qualified_turbines().size());
  if (!reserves_enabled || n == 0) return std::vector<int>(n, 0);
  OfferPlanner planner(plant, vf, params, opt);
  return planner.decide(week, volumes);
}

ProfitStats profit_statistics(const std::vector<double>& profits) {
  if (profits.empty()) throw std::invalid_argument("no profits");
  const auto n = profits.size();
  ProfitStats st;
  st.expected = std::accumulate(profits.begin(), profits.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double p : profits) ss += (p - st.expected) * (p - st.expected);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  st.rel_std = sd == 0.0 ? 0.0 : sd / st.expected;
  auto sorted = profits;
  std::sort(sorted.begin(), sorted.end());
  const auto tail = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n)));
  st.cvar10 = std::accumulate(sorted.begin(), sorted.begin() + tail, 0.0) / static_cast<double>(tail);
  return st;
}

RandomStream simulation_stream(std::uint64_t seed, int sample, int week) {
  return RandomStream::derive(seed, (2ULL << 40) | static_cast<std::uint64_t>(week),
                              static_cast<std::uint64_t>(sample));
}

SimulationResult simulate_year(const PlantTopology& plant, const ValueFunction& vf, const StochasticParams& params,
                               const SimConfig& config) {
  if (config.n_samples < 1) throw std::invalid_argument("at least one sample is required");
  validate_topology(plant);
  validate_params(params, static_cast<int>(plant.reservoirs.size()));
  const int T = params.num_weeks();
  if (vf.num_weeks() != T) throw std::invalid_argument("value function and market differ in weeks");
  const auto seasonal = plant.seasonal_reservoirs();
  if (seasonal.size() != 1) throw std::invalid_argument("exactly one seasonal reservoir is required");
  auto opt = config.dispatch;
  if (std::isnan(opt.reference_energy)) opt.reference_energy = energy_per_volume(plant, vf.method);
  const std::size_t nr = plant.reservoirs.size();
  const int n_q = static_cast<int>(plant.qualified_turbines().size());
  std::unique_ptr<OfferPlanner> planner;
  if (config.reserves_enabled && n_q > 0) planner = std::make_unique<OfferPlanner>(plant, vf, params, opt);

  SimulationResult res;
  for (int sample = 0; sample < config.n_samples; ++sample) {
    std::vector<double> vol(nr);
    for (std::size_t r = 0; r < nr; ++r) vol[r] = plant.reservoirs[r].v_init;
    const auto start = vol;
    std::vector<double> gained(nr, 0.0), lost(nr, 0.0);
    double profit = 0.0, spill = 0.0;
    std::vector<double> path{vol[seasonal[0]]};
    std::vector<std::vector<int>> offers;
    if (config.keep_schedules) res.schedules.emplace_back();
    for (int week = 1; week <= T; ++week) {
      auto stream = simulation_stream(config.seed, sample, week);
      const auto s = sample_week(params, week, stream);
      const auto q = planner ? planner->decide(week, vol) : std::vector<int>(n_q, 0);
      const double wv = start_water_value(plant, vf, week, vol);
      const auto w = dispatch_heuristic(plant, vol, s, wv, q, opt);
      for (int h = 0; h < s.num_hours(); ++h) {
        double u = 0.0, p = 0.0, sp = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
          gained[r] += s.inflows[r][h];
          lost[r] += w.spill[r][h];
          sp += w.spill[r][h];
        }
        for (std::size_t k = 0; k < plant.units.size(); ++k) {
          const auto& unit = plant.units[k];
          const double water = unit.k * w.power[k][h];
          const int from = plant.reservoir_index(unit.from), to = plant.reservoir_index(unit.to);
          if (from >= 0) lost[from] += water;
          if (to >= 0) gained[to] += water;
          (unit.kind == UnitKind::turbine ? u : p) += w.power[k][h];
        }
        spill += sp;
        if (config.log_schedules) {
          res.log.push_back({sample, week, h, s.prices[h], u, p, sp, w.m[h], w.volume[seasonal[0]][h]});
        }
      }
      for (std::size_t r = 0; r < nr; ++r) vol[r] = w.volume[r].back();
      profit += w.profit();
      res.band_shortfalls += w.band_shortfalls;
      path.push_back(vol[seasonal[0]]);
      offers.push_back(q);
      if (config.keep_schedules) res.schedules.back().push_back(w);
    }
    double residual = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      residual = std::max(residual, std::abs(vol[r] - (start[r] + gained[r] - lost[r])));
    }
    res.profits.push_back(profit);
    res.filling_paths.push_back(std::move(path));
    res.spill_total.push_back(spill);
    res.max_balance_residual.push_back(residual);
    res.offers.push_back(std::move(offers));
  }
  res.stats = profit_statistics(res.profits);
  return res;
}

}  // namespace hydro
