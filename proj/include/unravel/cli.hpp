#pragma once

// Experiment drivers behind the `unravel` command-line tool.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace unravel::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid or inconsistent configuration (exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fully resolved parameters of one run. Every field is echoed in the report
/// except `threads`, which only affects wall time.
struct ExperimentConfig {
  std::string command;
  std::array<double, 3> rates{1, 1, -1};
  std::string model = "noncp";  // noncp | general
  std::string initial = "0";    // 0, 1, +, -, +i, -i or "x,y,z"
  double t_final = 0.25;
  double dt = 1e-3;
  std::uint64_t trajectories = 20000;
  std::uint64_t seed = 42;
  std::int64_t grid_points = 32;
  std::vector<double> times;  // choi: explicit grid
  std::int64_t n = 2;         // param: Lindblad channels
  std::int64_t big_n = 4;     // param: real noises
  std::uint64_t pole_states = 0;
  std::uint64_t samples = 1000;  // choi: random pure states per time
  std::string output;            // empty: stdout
  std::string format = "json";   // json | csv
  unsigned threads = 1;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"unravel", "choi", "identity", "param",
                                              "convergence"};
  return names;
}

/// Defaults for one subcommand, before the config file and flags are applied.
ExperimentConfig default_config(const std::string& command);

/// Applies the keys of a JSON object; unknown keys and wrong types are errors.
void merge_json(ExperimentConfig& config, const nlohmann::json& object);

nlohmann::json config_to_json(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

/// Bloch vector of the `initial` field.
std::array<double, 3> parse_initial(const std::string& text);

enum class Verdict { Pass, Fail, Inconclusive, Informational };

std::string to_string(Verdict v);

inline int exit_code(Verdict v) { return v == Verdict::Fail ? 1 : 0; }

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct RunReport {
  ExperimentConfig config;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::json summary = nlohmann::json::object();
  Verdict verdict = Verdict::Fail;
  std::string note;
};

RunReport run_unravel(const ExperimentConfig& config);
RunReport run_choi(const ExperimentConfig& config);
RunReport run_identity(const ExperimentConfig& config);
RunReport run_param(const ExperimentConfig& config);
RunReport run_convergence(const ExperimentConfig& config);

/// Validates and dispatches on config.command.
RunReport run(const ExperimentConfig& config);

/// One header line plus one line per record, 17 significant digits, LF endings.
std::string render_csv(const RunReport& report);

/// Everything outside "execution" is the data payload and is independent of threads.
nlohmann::json report_json(const RunReport& report);

std::string render(const RunReport& report);

/// Writes render(report) to config.output, or stdout when it is empty.
void write_report(const RunReport& report);

}  // namespace unravel::cli
