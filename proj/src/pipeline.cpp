#include "hydrosdp/pipeline.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hydro {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

ReservoirClass parse_class(const std::string& s) {
  if (s == "seasonal") return ReservoirClass::seasonal;
  if (s == "daily") return ReservoirClass::daily;
  throw ConfigError("reservoir class must be seasonal or daily, got '" + s + "'");
}

UnitKind parse_kind(const std::string& s) {
  if (s == "turbine") return UnitKind::turbine;
  if (s == "pump") return UnitKind::pump;
  throw ConfigError("unit kind must be turbine or pump, got '" + s + "'");
}

PlantTopology parse_plant(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "reference") throw ConfigError("unknown plant preset '" + j.get<std::string>() + "'");
    return reference_plant();
  }
  allow_keys(j, "plant", {"name", "reservoirs", "units", "inflow_points"});
  PlantTopology p;
  p.name = get<std::string>(j, "name", "plant");
  for (const auto& r : j.at("reservoirs")) {
    allow_keys(r, "reservoir", {"id", "class", "v_max", "v_init", "spill_max"});
    p.reservoirs.push_back({r.at("id").get<std::string>(), parse_class(r.at("class").get<std::string>()),
                            r.at("v_max").get<double>(), get<double>(r, "v_init", 0.0),
                            get<double>(r, "spill_max", 0.0)});
  }
  for (const auto& u : j.at("units")) {
    allow_keys(u, "unit", {"id", "kind", "from", "to", "p_max", "k", "reserve_qualified", "q_min", "q_max"});
    p.units.push_back({u.at("id").get<std::string>(), parse_kind(u.at("kind").get<std::string>()),
                       get<std::string>(u, "from", ""), get<std::string>(u, "to", ""), u.at("p_max").get<double>(),
                       u.at("k").get<double>(), get<bool>(u, "reserve_qualified", false),
                       get<double>(u, "q_min", 0.0), get<double>(u, "q_max", 0.0)});
  }
  p.inflow_points = get<std::vector<std::string>>(j, "inflow_points", {});
  return validate_topology(p);
}

StochasticParams parse_stochastic(const json& j, const PlantTopology& plant) {
  allow_keys(j, "stochastic",
             {"preset", "weeks", "weekly_price_mean", "hourly_profile", "price_sigma", "inflow_mean", "inflow_sigma",
              "rho", "reserve_price", "daily_price_sigma", "daily_price_persistence", "price_scale"});
  const auto preset = get<std::string>(j, "preset", "reference");
  StochasticParams p;
  if (preset == "reference") {
    p = reference_params(plant);
  } else if (preset != "none") {
    throw ConfigError("unknown stochastic preset '" + preset + "'");
  }
  p.weekly_price_mean = get(j, "weekly_price_mean", p.weekly_price_mean);
  p.hourly_profile = get(j, "hourly_profile", p.hourly_profile);
  p.inflow_mean = get(j, "inflow_mean", p.inflow_mean);
  p.reserve_price = get(j, "reserve_price", p.reserve_price);
  p.price_sigma = get(j, "price_sigma", p.price_sigma);
  p.inflow_sigma = get(j, "inflow_sigma", p.inflow_sigma);
  p.rho = get(j, "rho", p.rho);
  p.daily_price_sigma = get(j, "daily_price_sigma", p.daily_price_sigma);
  p.daily_price_persistence = get(j, "daily_price_persistence", p.daily_price_persistence);
  const int weeks = get(j, "weeks", p.num_weeks());
  if (weeks < 1 || weeks > p.num_weeks()) throw ConfigError("weeks must lie in [1, " + std::to_string(p.num_weeks()) + "]");
  p.weekly_price_mean.resize(weeks);
  if (static_cast<int>(p.reserve_price.size()) > weeks) p.reserve_price.resize(weeks);
  for (auto& row : p.inflow_mean) {
    if (static_cast<int>(row.size()) > weeks) row.resize(weeks);
  }
  const double scale = get(j, "price_scale", 1.0);
  if (!(scale > 0.0)) throw ConfigError("price_scale must be positive");
  for (auto& c : p.weekly_price_mean) c *= scale;
  for (auto& c : p.reserve_price) c *= scale;
  try {
    validate_params(p, static_cast<int>(plant.reservoirs.size()));
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("stochastic: ") + e.what());
  }
  return p;
}

double peak_rss_mb() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) / 1024.0;
}

std::string tag(Method m, bool reserves) { return std::string(to_string(m)) + (reserves ? "_on" : "_off"); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

void dump_lps(const RunConfig& c, const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  const int week = 1;
  const auto s = expected_week(c.params, week);
  IntrastageOptions opt;
  opt.reserves_enabled = true;
  const auto agg = aggregate_plant(c.plant);
  {
    auto f = open_out(dir / "week1_M1.lp");
    write_lp_format(f, method1_lp(agg, s, 0.0, opt), "method 1, week 1, W = 0, expected scenario");
  }
  const auto tree3 = degenerate_tree(s);
  BundleLp lp3(c.plant, tree3);
  {
    auto f = open_out(dir / "week1_M3.lp");
    write_lp_format(f, lp3.program(), "method 3, week 1, W = 0, expected scenario, q = 0");
  }
  auto stream = valuation_stream(c.seed, week, 0);
  const auto tree4 = build_price_tree(c.params, week, c.branching, stream);
  BundleLp lp4(c.plant, tree4);
  {
    auto f = open_out(dir / "week1_M4.lp");
    write_lp_format(f, lp4.program(), "method 4, week 1, W = 0, first valuation tree, q = 0");
  }
  log << "wrote LP dumps to " << dir.string() << '\n';
}

}  // namespace

int RunConfig::scenarios_for(Method m) const {
  auto it = n_scenarios_per_method.find(m);
  return it == n_scenarios_per_method.end() ? n_scenarios : it->second;
}

ValuationConfig RunConfig::valuation(Method m, bool reserves) const {
  ValuationConfig v;
  v.method = m;
  v.reserves_enabled = reserves;
  v.n_scenarios = scenarios_for(m);
  v.branching = branching;
  v.seed = seed;
  v.terminal_value = terminal_value;
  v.per_scenario_q = per_scenario_q;
  return v;
}

std::vector<bool> parse_reserve_flags(const std::string& text) {
  if (text == "off") return {false};
  if (text == "on") return {true};
  if (text == "both") return {false, true};
  throw ConfigError("reserves must be on, off or both, got '" + text + "'");
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, "config", {"plant", "stochastic", "grids", "valuation", "simulation", "seed", "output"});
  RunConfig c;
  try {
    c.plant = parse_plant(j.contains("plant") ? j["plant"] : json("reference"));
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  }
  c.params = parse_stochastic(j.value("stochastic", json::object()), c.plant);
  c.seed = get<std::uint64_t>(j, "seed", 1);

  const auto grids = j.value("grids", json::object());
  allow_keys(grids, "grids", {"filling_levels", "discharge_levels"});
  c.filling_levels = get(grids, "filling_levels", c.filling_levels);
  c.discharge_levels = get(grids, "discharge_levels", c.discharge_levels);
  if (c.filling_levels < 2 || c.discharge_levels < 2) throw ConfigError("grids need at least two levels");

  const auto val = j.value("valuation", json::object());
  allow_keys(val, "valuation",
             {"methods", "reserves", "n_scenarios", "n_scenarios_per_method", "branching", "terminal_value",
              "per_scenario_q"});
  if (val.contains("methods")) {
    c.methods.clear();
    for (const auto& m : val["methods"]) {
      try {
        c.methods.push_back(parse_method(m.is_string() ? m.get<std::string>() : std::to_string(m.get<int>())));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (c.methods.empty()) throw ConfigError("method selection is empty");
  }
  c.reserve_flags = parse_reserve_flags(get<std::string>(val, "reserves", "both"));
  c.n_scenarios = get(val, "n_scenarios", c.n_scenarios);
  if (val.contains("n_scenarios_per_method")) {
    for (const auto& [k, v] : val["n_scenarios_per_method"].items()) {
      try {
        c.n_scenarios_per_method[parse_method(k)] = v.get<int>();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  c.branching = get(val, "branching", c.branching);
  c.terminal_value = get(val, "terminal_value", c.terminal_value);
  c.per_scenario_q = get(val, "per_scenario_q", c.per_scenario_q);
  if (c.n_scenarios < 1 || c.branching < 1) throw ConfigError("n_scenarios and branching must be at least 1");
  for (const auto& [m, n] : c.n_scenarios_per_method) {
    if (n < 1) throw ConfigError("n_scenarios must be at least 1");
  }

  const auto sim = j.value("simulation", json::object());
  allow_keys(sim, "simulation", {"samples", "gen_threshold_margin", "pump_threshold_margin", "log_schedules"});
  c.sim.n_samples = get(sim, "samples", c.sim.n_samples);
  c.sim.dispatch.gen_threshold_margin = get(sim, "gen_threshold_margin", 0.0);
  c.sim.dispatch.pump_threshold_margin = get(sim, "pump_threshold_margin", 0.0);
  c.sim.log_schedules = get(sim, "log_schedules", false);
  if (c.sim.n_samples < 1) throw ConfigError("samples must be at least 1");
  if (c.sim.dispatch.gen_threshold_margin < 0.0 || c.sim.dispatch.pump_threshold_margin < 0.0) {
    throw ConfigError("threshold margins must be non-negative");
  }
  c.sim.seed = c.seed;

  const auto out = j.value("output", json::object());
  allow_keys(out, "output", {"dir", "dump_lp"});
  c.out_dir = get<std::string>(out, "dir", c.out_dir);
  c.dump_lp = get(out, "dump_lp", false);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string theta_path(const RunConfig& c, Method m, bool reserves) {
  return (fs::path(c.out_dir) / ("theta_" + tag(m, reserves) + ".csv")).string();
}

void write_timing(std::ostream& out, const std::vector<OptimizeRecord>& rows) {
  out << "# hydrosdp timing v" << kCsvVersion << "\nmethod,reserves,seconds,stage_evaluations,peak_rss_mb\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << (r.reserves ? "on" : "off") << ',' << format_double(r.seconds) << ','
        << r.stage_evaluations << ',' << format_double(r.peak_rss_mb) << '\n';
  }
}

std::vector<OptimizeRecord> read_timing(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line != "# hydrosdp timing v" + std::to_string(kCsvVersion)) throw FormatError("missing timing preamble");
  std::getline(in, line);
  std::vector<OptimizeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string m, r, sec, ev, rss;
    std::getline(ss, m, ',');
    std::getline(ss, r, ',');
    std::getline(ss, sec, ',');
    std::getline(ss, ev, ',');
    std::getline(ss, rss, ',');
    out.push_back({parse_method(m), r == "on", parse_double(sec), std::stoll(ev), parse_double(rss)});
  }
  return out;
}

std::vector<OptimizeRecord> run_optimize(const RunConfig& c, std::ostream& log) {
  fs::create_directories(c.out_dir);
  if (c.dump_lp) dump_lps(c, fs::path(c.out_dir) / "lp", log);
  std::vector<OptimizeRecord> records;
  for (Method m : c.methods) {
    const auto grids = make_grids(c.plant, c.params, m, c.filling_levels, c.discharge_levels);
    for (bool reserves : c.reserve_flags) {
      ValuationStats stats;
      const auto vf = backward_induction(c.plant, c.params, grids, c.valuation(m, reserves), &stats);
      check_monotone(vf, 1e-9);
      {
        auto f = open_out(theta_path(c, m, reserves));
        write_value_function(f, vf);
      }
      {
        auto f = open_out(fs::path(c.out_dir) / ("water_values_" + tag(m, reserves) + ".csv"));
        write_water_values(f, water_values(vf));
      }
      records.push_back({m, reserves, stats.seconds, stats.stage_evaluations, peak_rss_mb()});
      log << to_string(m) << " reserves=" << (reserves ? "on" : "off") << ": " << std::fixed << std::setprecision(2)
          << stats.seconds << " s, " << stats.stage_evaluations << " stage evaluations, peak RSS "
          << std::setprecision(1) << records.back().peak_rss_mb << " MB\n"
          << std::defaultfloat;
    }
  }
  auto f = open_out(fs::path(c.out_dir) / "timing.csv");
  write_timing(f, records);
  return records;
}

std::vector<SummaryRow> run_simulate(const RunConfig& c, std::ostream& log) {
  fs::create_directories(c.out_dir);
  std::vector<SummaryRow> summary;
  std::vector<SampleRow> samples;
  std::stringstream paths;
  bool first_path = true;
  for (Method m : c.methods) {
    for (bool reserves : c.reserve_flags) {
      const auto path = theta_path(c, m, reserves);
      std::ifstream in(path);
      if (!in) throw ConfigError("missing value function " + path + " (run optimize first)");
      const auto vf = read_value_function(in);
      if (vf.method != m || vf.reserves_enabled != reserves) throw ConfigError(path + " holds a different run");
      auto sim = c.sim;
      sim.reserves_enabled = reserves;
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = simulate_year(c.plant, vf, c.params, sim);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      summary.push_back({m, reserves, r.stats.expected, 100.0 * r.stats.rel_std, r.stats.cvar10});
      for (std::size_t s = 0; s < r.profits.size(); ++s) {
        int committed = 0;
        for (const auto& q : r.offers[s]) committed += std::any_of(q.begin(), q.end(), [](int x) { return x != 0; });
        samples.push_back({m, reserves, static_cast<int>(s), r.profits[s], r.spill_total[s],
                           r.max_balance_residual[s], committed});
      }
      write_filling_paths(paths, m, reserves, r, first_path);
      first_path = false;
      if (c.sim.log_schedules) {
        auto f = open_out(fs::path(c.out_dir) / ("hourly_" + tag(m, reserves) + ".csv"));
        write_hourly_log(f, r.log);
      }
      log << to_string(m) << " reserves=" << (reserves ? "on" : "off") << ": expected " << std::fixed
          << std::setprecision(0) << r.stats.expected << " EUR, rel std " << std::setprecision(2)
          << 100.0 * r.stats.rel_std << " %, CVaR10 " << std::setprecision(0) << r.stats.cvar10 << " EUR ("
          << std::setprecision(1) << secs << " s)\n"
          << std::defaultfloat;
    }
  }
  {
    auto f = open_out(fs::path(c.out_dir) / "summary.csv");
    write_summary(f, summary);
  }
  {
    auto f = open_out(fs::path(c.out_dir) / "samples.csv");
    write_samples(f, samples);
  }
  auto f = open_out(fs::path(c.out_dir) / "filling_paths.csv");
  f << paths.str();
  return summary;
}

double water_value_agreement(const WaterValueTable& a, const WaterValueTable& b, double tol) {
  if (a.values.size() != b.values.size() || a.filling_mid.size() != b.filling_mid.size() || a.values.size() < 2) {
    throw std::invalid_argument("water value tables differ in shape");
  }
  long long agree = 0, total = 0;
  for (std::size_t t = 0; t + 1 < a.values.size(); ++t) {
    for (std::size_t i = 0; i < a.filling_mid.size(); ++i) {
      const double x = a.values[t][i], y = b.values[t][i];
      const double scale = std::max(std::abs(x), std::abs(y));
      agree += scale == 0.0 || std::abs(x - y) < tol * scale;
      ++total;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

CompareReport run_compare(const RunConfig& c, std::ostream& log) {
  const fs::path dir(c.out_dir);
  std::map<std::pair<Method, bool>, WaterValueTable> wv;
  std::set<Method> available;
  for (Method m : c.methods) {
    for (bool reserves : c.reserve_flags) {
      std::ifstream in(dir / ("water_values_" + tag(m, reserves) + ".csv"));
      if (!in) continue;
      wv[{m, reserves}] = read_water_values(in);
      available.insert(m);
    }
  }
  if (available.size() < 2) throw ConfigError("compare needs results of at least two methods in " + c.out_dir);

  CompareReport rep;
  if (std::ifstream in(dir / "summary.csv"); in) rep.summary = read_summary(in);
  if (std::ifstream in(dir / "timing.csv"); in) rep.timing = read_timing(in);
  for (bool reserves : c.reserve_flags) {
    auto a = wv.find({Method::m3, reserves}), b = wv.find({Method::m4, reserves});
    if (a != wv.end() && b != wv.end()) rep.agreement_m3_m4[reserves] = water_value_agreement(a->second, b->second);
  }

  auto find_summary = [&](Method m, bool r) -> const SummaryRow* {
    for (const auto& s : rep.summary) {
      if (s.method == m && s.reserves == r) return &s;
    }
    return nullptr;
  };
  auto find_time = [&](Method m, bool r) -> const OptimizeRecord* {
    for (const auto& t : rep.timing) {
      if (t.method == m && t.reserves == r) return &t;
    }
    return nullptr;
  };

  std::ostringstream csv, txt;
  csv << "# hydrosdp compare v" << kCsvVersion << "\nmetric,method,reserves,value\n";
  auto row = [&](const std::string& metric, const std::string& method, const std::string& reserves, double v) {
    csv << metric << ',' << method << ',' << reserves << ',' << format_double(v) << '\n';
  };
  txt << std::fixed;
  txt << std::left << std::setw(28) << "" << std::right;
  for (Method m : available) txt << std::setw(22) << to_string(m);
  txt << '\n';
  auto line = [&](const std::string& label, auto value) {
    txt << std::left << std::setw(28) << label << std::right;
    for (Method m : available) txt << std::setw(22) << value(m);
    txt << '\n';
  };
  auto pair_text = [&](auto get, int digits) {
    return [&, get, digits](Method m) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(digits);
      bool any = false;
      for (bool r : {false, true}) {
        if (std::find(c.reserve_flags.begin(), c.reserve_flags.end(), r) == c.reserve_flags.end()) continue;
        if (any) s << " / ";
        const auto v = get(m, r);
        if (std::isnan(v)) {
          s << '-';
        } else {
          s << v;
        }
        any = true;
      }
      return s.str();
    };
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto expected = [&](Method m, bool r) { const auto* s = find_summary(m, r); return s ? s->expected_profit : nan; };
  auto relstd = [&](Method m, bool r) { const auto* s = find_summary(m, r); return s ? s->rel_std_pct : nan; };
  auto cvar = [&](Method m, bool r) { const auto* s = find_summary(m, r); return s ? s->cvar10 : nan; };
  auto seconds = [&](Method m, bool r) { const auto* t = find_time(m, r); return t ? t->seconds : nan; };
  auto ratio = [&](Method m, bool r) {
    const auto* t = find_time(m, r);
    const auto* base = find_time(Method::m1, r);
    return t && base && base->seconds > 0.0 ? t->seconds / base->seconds : nan;
  };
  line("expected profit [EUR]", pair_text(expected, 0));
  line("rel. std [%]", pair_text(relstd, 2));
  line("CVaR10 [EUR]", pair_text(cvar, 0));
  line("optimization [s]", pair_text(seconds, 2));
  line("time vs M1", pair_text(ratio, 1));
  const bool both = c.reserve_flags.size() == 2;
  if (both) {
    line("reserve profit delta [EUR]", [&](Method m) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(0) << expected(m, true) - expected(m, false);
      return s.str();
    });
    line("reserve profit delta [%]", [&](Method m) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(2) << 100.0 * (expected(m, true) / expected(m, false) - 1.0);
      return s.str();
    });
  }
  txt << "(values shown as reserves off / on)\n";
  for (const auto& [r, frac] : rep.agreement_m3_m4) {
    txt << "M3/M4 water values within 10 % (reserves " << (r ? "on" : "off") << "): " << std::setprecision(1)
        << 100.0 * frac << " % of cells\n";
  }

  for (Method m : available) {
    for (bool r : c.reserve_flags) {
      const char* flag = r ? "on" : "off";
      if (!std::isnan(expected(m, r))) {
        row("expected_profit", to_string(m), flag, expected(m, r));
        row("rel_std_pct", to_string(m), flag, relstd(m, r));
        row("cvar10", to_string(m), flag, cvar(m, r));
      }
      if (!std::isnan(seconds(m, r))) row("optimize_seconds", to_string(m), flag, seconds(m, r));
      if (!std::isnan(ratio(m, r))) row("time_ratio_vs_M1", to_string(m), flag, ratio(m, r));
    }
    if (both && !std::isnan(expected(m, true)) && !std::isnan(expected(m, false))) {
      row("reserve_profit_delta", to_string(m), "", expected(m, true) - expected(m, false));
      row("reserve_profit_delta_pct", to_string(m), "", 100.0 * (expected(m, true) / expected(m, false) - 1.0));
    }
  }
  for (const auto& [r, frac] : rep.agreement_m3_m4) row("agreement_m3_m4_within_10pct", "", r ? "on" : "off", frac);

  {
    auto f = open_out(dir / "compare.csv");
    f << csv.str();
  }
  auto f = open_out(dir / "compare.txt");
  f << txt.str();
  log << txt.str();
  return rep;
}

}  // namespace hydro
