#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hydrosdp/pipeline.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace hydro;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Water values of a hydro cascade with reserve provision";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::enum_<Method>(m, "Method")
      .value("M1", Method::m1)
      .value("M2", Method::m2)
      .value("M3", Method::m3)
      .value("M4", Method::m4);
  m.def("parse_method", &parse_method, "text"_a);

  py::enum_<ReservoirClass>(m, "ReservoirClass")
      .value("seasonal", ReservoirClass::seasonal)
      .value("daily", ReservoirClass::daily);
  py::enum_<UnitKind>(m, "UnitKind").value("turbine", UnitKind::turbine).value("pump", UnitKind::pump);

  py::class_<Reservoir>(m, "Reservoir")
      .def(py::init<>())
      .def_readwrite("id", &Reservoir::id)
      .def_readwrite("kind", &Reservoir::kind)
      .def_readwrite("v_max", &Reservoir::v_max)
      .def_readwrite("v_init", &Reservoir::v_init)
      .def_readwrite("spill_max", &Reservoir::spill_max);
  py::class_<Unit>(m, "Unit")
      .def(py::init<>())
      .def_readwrite("id", &Unit::id)
      .def_readwrite("kind", &Unit::kind)
      .def_readwrite("source", &Unit::from)
      .def_readwrite("target", &Unit::to)
      .def_readwrite("p_max", &Unit::p_max)
      .def_readwrite("k", &Unit::k)
      .def_readwrite("reserve_qualified", &Unit::reserve_qualified)
      .def_readwrite("q_min", &Unit::q_min)
      .def_readwrite("q_max", &Unit::q_max);
  py::class_<PlantTopology>(m, "PlantTopology")
      .def(py::init<>())
      .def_readwrite("name", &PlantTopology::name)
      .def_readwrite("reservoirs", &PlantTopology::reservoirs)
      .def_readwrite("units", &PlantTopology::units)
      .def_readwrite("inflow_points", &PlantTopology::inflow_points)
      .def("total_v_max", &PlantTopology::total_v_max);
  m.def("reference_plant", &reference_plant);
  m.def("validate_topology", &validate_topology, "plant"_a);
  m.def("aggregate_plant", &aggregate_plant, "plant"_a);

  py::class_<StochasticParams>(m, "StochasticParams")
      .def(py::init<>())
      .def_readwrite("weekly_price_mean", &StochasticParams::weekly_price_mean)
      .def_readwrite("hourly_profile", &StochasticParams::hourly_profile)
      .def_readwrite("price_sigma", &StochasticParams::price_sigma)
      .def_readwrite("inflow_mean", &StochasticParams::inflow_mean)
      .def_readwrite("inflow_sigma", &StochasticParams::inflow_sigma)
      .def_readwrite("rho", &StochasticParams::rho)
      .def_readwrite("reserve_price", &StochasticParams::reserve_price)
      .def_readwrite("daily_price_sigma", &StochasticParams::daily_price_sigma)
      .def_readwrite("daily_price_persistence", &StochasticParams::daily_price_persistence)
      .def_property_readonly("num_weeks", &StochasticParams::num_weeks);
  m.def("reference_params", &reference_params, "plant"_a);

  py::class_<WeeklyScenario>(m, "WeeklyScenario")
      .def(py::init<>())
      .def_readwrite("prices", &WeeklyScenario::prices)
      .def_readwrite("inflows", &WeeklyScenario::inflows)
      .def_readwrite("reserve_price", &WeeklyScenario::reserve_price);
  m.def("expected_week", &expected_week, "params"_a, "week"_a);
  m.def(
      "sample_week",
      [](const StochasticParams& p, int week, std::uint64_t seed, int sample) {
        auto stream = simulation_stream(seed, sample, week);
        return sample_week(p, week, stream);
      },
      "params"_a, "week"_a, "seed"_a = 1, "sample"_a = 0);

  py::class_<ScenarioTree>(m, "ScenarioTree")
      .def_property_readonly("num_hours", &ScenarioTree::num_hours)
      .def_property_readonly("num_scenarios", &ScenarioTree::num_scenarios)
      .def_property_readonly("num_nodes", &ScenarioTree::num_nodes)
      .def("bundles_at", &ScenarioTree::bundles_at, "hour"_a)
      .def("scenario", &ScenarioTree::scenario, "s"_a);
  m.def(
      "build_price_tree",
      [](const StochasticParams& p, int week, int branching, std::uint64_t seed) {
        auto stream = valuation_stream(seed, week, 0);
        return build_price_tree(p, week, branching, stream);
      },
      "params"_a, "week"_a, "branching"_a = 2, "seed"_a = 1);
  m.def("degenerate_tree", &degenerate_tree, "scenario"_a);

  py::class_<StageResult>(m, "StageResult")
      .def_readonly("value", &StageResult::value)
      .def_readonly("q", &StageResult::q)
      .def_property_readonly("feasible", &StageResult::feasible);
  auto opts = [](bool reserves) {
    IntrastageOptions o;
    o.reserves_enabled = reserves;
    return o;
  };
  m.def(
      "method1_stage_value",
      [opts](const PlantTopology& p, const WeeklyScenario& s, double W, bool reserves) {
        return method1_stage_value(aggregate_plant(p), s, W, opts(reserves));
      },
      "plant"_a, "scenario"_a, "W"_a, "reserves"_a = false);
  m.def(
      "method2_stage_value",
      [opts](const PlantTopology& p, const WeeklyScenario& s, double W, bool reserves) {
        return method2_stage_value(aggregate_plant(p), s, W, opts(reserves));
      },
      "plant"_a, "scenario"_a, "W"_a, "reserves"_a = false);
  m.def(
      "method3_intrastage",
      [opts](const PlantTopology& p, const std::vector<WeeklyScenario>& s, double W, bool reserves) {
        return method3_intrastage(p, s, W, opts(reserves));
      },
      "plant"_a, "scenarios"_a, "W"_a, "reserves"_a = false);
  m.def(
      "method4_intrastage",
      [opts](const PlantTopology& p, const ScenarioTree& t, double W, bool reserves) {
        return method4_intrastage(p, t, W, opts(reserves));
      },
      "plant"_a, "tree"_a, "W"_a, "reserves"_a = false);

  py::class_<Grids>(m, "Grids")
      .def(py::init<>())
      .def_readwrite("filling", &Grids::filling)
      .def_readwrite("discharge", &Grids::discharge);
  m.def("make_grids", &make_grids, "plant"_a, "params"_a, "method"_a, "n_v"_a = 21, "n_w"_a = 21);

  py::class_<ValuationConfig>(m, "ValuationConfig")
      .def(py::init<>())
      .def_readwrite("method", &ValuationConfig::method)
      .def_readwrite("reserves_enabled", &ValuationConfig::reserves_enabled)
      .def_readwrite("n_scenarios", &ValuationConfig::n_scenarios)
      .def_readwrite("branching", &ValuationConfig::branching)
      .def_readwrite("seed", &ValuationConfig::seed)
      .def_readwrite("terminal_value", &ValuationConfig::terminal_value)
      .def_readwrite("per_scenario_q", &ValuationConfig::per_scenario_q);
  py::class_<ValueFunction>(m, "ValueFunction")
      .def(py::init<>())
      .def_readwrite("method", &ValueFunction::method)
      .def_readwrite("reserves_enabled", &ValueFunction::reserves_enabled)
      .def_readwrite("filling", &ValueFunction::filling)
      .def_readwrite("theta", &ValueFunction::theta)
      .def_property_readonly("num_weeks", &ValueFunction::num_weeks);
  py::class_<WaterValueTable>(m, "WaterValueTable")
      .def_readonly("filling_mid", &WaterValueTable::filling_mid)
      .def_readonly("values", &WaterValueTable::values);
  m.def(
      "backward_induction",
      [](const PlantTopology& p, const StochasticParams& params, const Grids& g, const ValuationConfig& c) {
        py::gil_scoped_release release;
        return backward_induction(p, params, g, c);
      },
      "plant"_a, "params"_a, "grids"_a, "config"_a);
  m.def("water_values", &water_values, "vf"_a);
  m.def("interpolate_value", &interpolate_value, "vf"_a, "week"_a, "v"_a);
  m.def("check_monotone", &check_monotone, "vf"_a, "tolerance"_a = 1e-9);
  m.def("energy_per_volume", &energy_per_volume, "plant"_a, "method"_a);

  py::class_<ProfitStats>(m, "ProfitStats")
      .def_readonly("expected", &ProfitStats::expected)
      .def_readonly("rel_std", &ProfitStats::rel_std)
      .def_readonly("cvar10", &ProfitStats::cvar10);
  m.def("profit_statistics", &profit_statistics, "profits"_a);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_samples", &SimConfig::n_samples)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("reserves_enabled", &SimConfig::reserves_enabled);
  py::class_<SimulationResult>(m, "SimulationResult")
      .def_readonly("profits", &SimulationResult::profits)
      .def_readonly("filling_paths", &SimulationResult::filling_paths)
      .def_readonly("spill_total", &SimulationResult::spill_total)
      .def_readonly("max_balance_residual", &SimulationResult::max_balance_residual)
      .def_readonly("offers", &SimulationResult::offers)
      .def_readonly("band_shortfalls", &SimulationResult::band_shortfalls)
      .def_readonly("stats", &SimulationResult::stats);
  m.def(
      "simulate_year",
      [](const PlantTopology& p, const ValueFunction& vf, const StochasticParams& params, const SimConfig& c) {
        py::gil_scoped_release release;
        return simulate_year(p, vf, params, c);
      },
      "plant"_a, "vf"_a, "params"_a, "config"_a);

  py::class_<RunConfig>(m, "RunConfig")
      .def_readwrite("plant", &RunConfig::plant)
      .def_readwrite("params", &RunConfig::params)
      .def_readwrite("filling_levels", &RunConfig::filling_levels)
      .def_readwrite("discharge_levels", &RunConfig::discharge_levels)
      .def_readwrite("methods", &RunConfig::methods)
      .def_readwrite("reserve_flags", &RunConfig::reserve_flags)
      .def_readwrite("n_scenarios", &RunConfig::n_scenarios)
      .def_readwrite("sim", &RunConfig::sim)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("out_dir", &RunConfig::out_dir);
  m.def("parse_config", &parse_config, "json_text"_a);
  m.def("load_config", &load_config, "path"_a);

  // The run_* helpers return their progress log as text.
  m.def(
      "run_optimize",
      [](const RunConfig& c) {
        std::ostringstream log;
        run_optimize(c, log);
        return log.str();
      },
      "config"_a);
  m.def(
      "run_simulate",
      [](const RunConfig& c) {
        std::ostringstream log;
        run_simulate(c, log);
        return log.str();
      },
      "config"_a);
  m.def(
      "run_compare",
      [](const RunConfig& c) {
        std::ostringstream log;
        const auto rep = run_compare(c, log);
        return py::make_tuple(log.str(), rep.agreement_m3_m4);
      },
      "config"_a);
}
