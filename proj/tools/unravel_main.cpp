#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "unravel/cli.hpp"
#include "unravel/errors.hpp"

namespace {

using unravel::cli::ConfigError;
using unravel::cli::ExperimentConfig;

struct Flags {
  std::string config;
  double c1 = 0, c2 = 0, c3 = 0, t_final = 0, dt = 0;
  std::uint64_t trajectories = 0, seed = 0, pole_states = 0, samples = 0;
  std::int64_t grid_points = 0, n = 0, big_n = 0;
  std::string output, format, initial, model;
  unsigned threads = 1;
  std::vector<double> times;
};

const std::map<std::string, std::string> kAbout{
    {"unravel", "ensemble of the qubit SSE against the master equation and its exact solution"},
    {"choi", "Choi spectrum and positivity of the Pauli-channel map over a time grid"},
    {"identity", "operator identity sweep over Haar-random and pole states"},
    {"param", "u/s round trips, feasibility rejections and the orthogonal redundancy witness"},
    {"convergence", "ensemble bias at dt = 4h, 2h, h and the RK4 order of the master integrator"}};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; flags override its keys");
  sub->add_option("--c1", f.c1, "rate c1");
  sub->add_option("--c2", f.c2, "rate c2");
  sub->add_option("--c3", f.c3, "rate c3");
  sub->add_option("--t-final", f.t_final, "final time T >= 0");
  sub->add_option("--dt", f.dt, "time step (base step h for convergence)");
  sub->add_option("--trajectories", f.trajectories,
                  "ensemble size; states (identity) or random cases (param)");
  sub->add_option("--seed", f.seed, "64-bit seed");
  sub->add_option("--output", f.output, "output file (default stdout)");
  sub->add_option("--format", f.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--threads", f.threads, "worker threads; never changes results");
  sub->add_option("--grid-points", f.grid_points, "report times in (0, T]; 0 = every step");
  sub->add_option("--initial", f.initial, "0, 1, +, -, +i, -i or x,y,z (use --initial=-i)");
  sub->add_option("--model", f.model, "noncp or general")
      ->check(CLI::IsMember({"noncp", "general"}));
  sub->add_option("--times", f.times, "explicit time grid for choi")->delimiter(',');
  sub->add_option("--n", f.n, "Lindblad channels n (param)");
  sub->add_option("--big-n", f.big_n, "real noises N (param)");
  sub->add_option("--pole-states", f.pole_states, "pole states included in the identity sweep");
  sub->add_option("--samples", f.samples, "random pure states per time for choi positivity");
}

ExperimentConfig resolve(const std::string& command, const CLI::App& sub, const Flags& f) {
  ExperimentConfig c = unravel::cli::default_config(command);
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot read config file '" + f.config + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config file: ") + e.what());
    }
    unravel::cli::merge_json(c, j);
  }
  auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  if (given("--c1")) c.rates[0] = f.c1;
  if (given("--c2")) c.rates[1] = f.c2;
  if (given("--c3")) c.rates[2] = f.c3;
  if (given("--t-final")) c.t_final = f.t_final;
  if (given("--dt")) c.dt = f.dt;
  if (given("--trajectories")) c.trajectories = f.trajectories;
  if (given("--seed")) c.seed = f.seed;
  if (given("--output")) c.output = f.output;
  if (given("--format")) c.format = f.format;
  if (given("--threads")) c.threads = f.threads;
  if (given("--grid-points")) c.grid_points = f.grid_points;
  if (given("--initial")) c.initial = f.initial;
  if (given("--model")) c.model = f.model;
  if (given("--times")) c.times = f.times;
  if (given("--n")) c.n = f.n;
  if (given("--big-n")) c.big_n = f.big_n;
  if (given("--pole-states")) c.pole_states = f.pole_states;
  if (given("--samples")) c.samples = f.samples;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks of diffusive stochastic Schroedinger equations", "unravel"};
  app.set_version_flag("--version", unravel::cli::kVersion);
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : unravel::cli::commands()) add_flags(app.add_subcommand(name, kAbout.at(name)), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    const auto config = resolve(command, *sub, flags);
    const auto report = unravel::cli::run(config);
    unravel::cli::write_report(report);
    std::cerr << command << ": " << unravel::cli::to_string(report.verdict);
    if (!report.note.empty()) std::cerr << " (" << report.note << ")";
    std::cerr << '\n';
    return unravel::cli::exit_code(report.verdict);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const unravel::StepFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
