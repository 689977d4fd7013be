#include <algorithm>
#include <cmath>
#include <sstream>

#include "unravel/cli.hpp"

namespace unravel::cli {

ExperimentConfig default_config(const std::string& command) {
  ExperimentConfig c;
  c.command = command;
  if (command == "choi") {
    c.t_final = 1.0;
    c.grid_points = 20;
  } else if (command == "identity") {
    c.trajectories = 10000;
    c.seed = 7;
  } else if (command == "param") {
    c.trajectories = 100;
    c.seed = 3;
    c.t_final = 0.1;
  } else if (command == "convergence") {
    c.dt = 5e-4;
  }
  return c;
}

namespace {

template <typename T>
T field(const nlohmann::json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

std::uint64_t unsigned_field(const nlohmann::json& value, const std::string& key) {
  // The parser stores non-negative integer literals as unsigned.
  if (!value.is_number_unsigned()) {
    throw ConfigError("config: key '" + key + "' must be a non-negative integer");
  }
  return value.get<std::uint64_t>();
}

}  // namespace

void merge_json(ExperimentConfig& c, const nlohmann::json& object) {
  if (!object.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : object.items()) {
    if (key == "rates") {
      const auto r = field<std::vector<double>>(value, key);
      if (r.size() != 3) throw ConfigError("config: 'rates' needs three numbers");
      std::copy(r.begin(), r.end(), c.rates.begin());
    } else if (key == "model") {
      c.model = field<std::string>(value, key);
    } else if (key == "initial") {
      c.initial = field<std::string>(value, key);
    } else if (key == "t_final") {
      c.t_final = field<double>(value, key);
    } else if (key == "dt") {
      c.dt = field<double>(value, key);
    } else if (key == "trajectories") {
      c.trajectories = unsigned_field(value, key);
    } else if (key == "seed") {
      c.seed = unsigned_field(value, key);
    } else if (key == "grid_points") {
      c.grid_points = field<std::int64_t>(value, key);
    } else if (key == "times") {
      c.times = field<std::vector<double>>(value, key);
    } else if (key == "n") {
      c.n = field<std::int64_t>(value, key);
    } else if (key == "big_n") {
      c.big_n = field<std::int64_t>(value, key);
    } else if (key == "pole_states") {
      c.pole_states = unsigned_field(value, key);
    } else if (key == "samples") {
      c.samples = unsigned_field(value, key);
    } else if (key == "output") {
      c.output = field<std::string>(value, key);
    } else if (key == "format") {
      c.format = field<std::string>(value, key);
    } else if (key == "threads") {
      c.threads = static_cast<unsigned>(unsigned_field(value, key));
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"command", c.command},
          {"rates", c.rates},
          {"model", c.model},
          {"initial", c.initial},
          {"t_final", c.t_final},
          {"dt", c.dt},
          {"trajectories", c.trajectories},
          {"seed", c.seed},
          {"grid_points", c.grid_points},
          {"times", c.times},
          {"n", c.n},
          {"big_n", c.big_n},
          {"pole_states", c.pole_states},
          {"samples", c.samples},
          {"output", c.output},
          {"format", c.format}};
}

std::array<double, 3> parse_initial(const std::string& text) {
  if (text == "0") return {0, 0, 1};
  if (text == "1") return {0, 0, -1};
  if (text == "+") return {1, 0, 0};
  if (text == "-") return {-1, 0, 0};
  if (text == "+i") return {0, 1, 0};
  if (text == "-i") return {0, -1, 0};
  std::array<double, 3> n{};
  std::istringstream in(text);
  std::string part;
  std::size_t k = 0;
  while (std::getline(in, part, ',')) {
    if (k == 3) throw ConfigError("initial: expected three comma-separated components");
    try {
      std::size_t used = 0;
      n[k] = std::stod(part, &used);
      if (part.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("initial: cannot parse '" + text + "'");
    }
    ++k;
  }
  if (k != 3) throw ConfigError("initial: expected 0, 1, +, -, +i, -i or x,y,z");
  const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  if (!std::isfinite(norm) || norm == 0) throw ConfigError("initial: Bloch vector must be nonzero");
  for (double& x : n) x /= norm;
  return n;
}

void validate(const ExperimentConfig& c) {
  const auto& names = commands();
  if (std::find(names.begin(), names.end(), c.command) == names.end()) {
    throw ConfigError("unknown command '" + c.command + "'");
  }
  for (double r : c.rates) {
    if (!std::isfinite(r)) throw ConfigError("rates must be finite");
  }
  if (!(c.dt > 0) || !std::isfinite(c.dt)) throw ConfigError("dt must be positive");
  if (!(c.t_final >= 0) || !std::isfinite(c.t_final)) throw ConfigError("t_final must be >= 0");
  if (c.trajectories < 1) throw ConfigError("trajectories must be >= 1");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.grid_points < 0) throw ConfigError("grid_points must be >= 0");
  if (c.format != "json" && c.format != "csv") throw ConfigError("format must be json or csv");
  if (c.model != "noncp" && c.model != "general") {
    throw ConfigError("model must be noncp or general");
  }
  if (c.model == "general" && std::any_of(c.rates.begin(), c.rates.end(),
                                          [](double r) { return r < 0; })) {
    throw ConfigError("model general needs non-negative rates (L_k = sqrt(c_k) sigma_k)");
  }
  for (double t : c.times) {
    if (!(t >= 0) || !std::isfinite(t)) throw ConfigError("times must be >= 0");
  }
  if (c.n < 1 || c.n > 4) throw ConfigError("n must be in [1, 4]");
  if (c.big_n < c.n) throw ConfigError("big_n must be >= n");
  if (c.command == "identity" && c.pole_states > c.trajectories) {
    throw ConfigError("pole_states cannot exceed trajectories");
  }
  if (c.command == "choi" && c.samples < 1) throw ConfigError("samples must be >= 1");
  parse_initial(c.initial);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "PASS";
    case Verdict::Fail:
      return "FAIL";
    case Verdict::Inconclusive:
      return "INCONCLUSIVE";
    case Verdict::Informational:
      return "INFORMATIONAL";
  }
  return "FAIL";
}

}  // namespace unravel::cli
