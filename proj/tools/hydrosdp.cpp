// Command line front end: optimize, simulate and compare runs from one JSON
// configuration file.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hydrosdp/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> methods;
  std::string reserves;
  int samples = 0;
  long long seed = -1;
  std::string out;
  bool dump_lp = false;
  bool log_schedules = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--method", f.methods, "method 1-4, repeatable (default: from config)");
  cmd->add_option("--reserves", f.reserves, "on, off or both")->check(CLI::IsMember({"on", "off", "both"}));
  cmd->add_option("--seed", f.seed, "random seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", f.out, "output directory (overrides HYDROSDP_OUT and the config)");
}

hydro::RunConfig resolve(const Flags& f) {
  auto c = hydro::load_config(f.config);
  if (const char* env = std::getenv("HYDROSDP_OUT"); env && *env) c.out_dir = env;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.methods.empty()) {
    c.methods.clear();
    for (const auto& m : f.methods) {
      try {
        c.methods.push_back(hydro::parse_method(m));
      } catch (const std::invalid_argument& e) {
        throw hydro::ConfigError(e.what());
      }
    }
  }
  if (!f.reserves.empty()) c.reserve_flags = hydro::parse_reserve_flags(f.reserves);
  if (f.seed >= 0) c.seed = c.sim.seed = static_cast<std::uint64_t>(f.seed);
  if (f.samples > 0) c.sim.n_samples = f.samples;
  if (f.dump_lp) c.dump_lp = true;
  if (f.log_schedules) c.sim.log_schedules = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Water values for a hydro cascade with reserve provision"};
  app.require_subcommand(1);
  Flags f;

  auto* opt = app.add_subcommand("optimize", "build value functions and water values");
  add_common(opt, f);
  opt->add_flag("--dump-lp", f.dump_lp, "write the first-week LPs in LP format");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation of the stored value functions");
  add_common(sim, f);
  sim->add_option("--samples", f.samples, "number of samples")->check(CLI::PositiveNumber);
  sim->add_flag("--log-schedules", f.log_schedules, "write the hourly log of every sample");

  auto* cmp = app.add_subcommand("compare", "side-by-side report of stored results");
  add_common(cmp, f);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto c = resolve(f);
    if (opt->parsed()) {
      hydro::run_optimize(c, std::cout);
    } else if (sim->parsed()) {
      hydro::run_simulate(c, std::cout);
    } else {
      hydro::run_compare(c, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "hydrosdp: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
