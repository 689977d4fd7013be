#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "unravel/cli.hpp"

using namespace unravel::cli;

namespace {

ExperimentConfig small(const std::string& command) {
  ExperimentConfig c = default_config(command);
  c.trajectories = 400;
  c.grid_points = 4;
  return c;
}

}  // namespace

TEST_CASE("defaults and config merging") {
  const auto c = default_config("identity");
  CHECK(c.trajectories == 10000);
  CHECK(c.seed == 7);
  CHECK(default_config("param").seed == 3);
  CHECK(default_config("convergence").dt == 5e-4);

  ExperimentConfig m = default_config("unravel");
  merge_json(m, nlohmann::json::parse(R"({"rates":[1,1,1],"model":"general","seed":9,"times":[0.5]})"));
  CHECK(m.rates == std::array<double, 3>{1, 1, 1});
  CHECK(m.model == "general");
  CHECK(m.seed == 9);
  CHECK(m.times == std::vector<double>{0.5});

  CHECK_THROWS_AS(merge_json(m, nlohmann::json::parse(R"({"bogus":1})")), ConfigError);
  CHECK_THROWS_AS(merge_json(m, nlohmann::json::parse(R"({"rates":[1,2]})")), ConfigError);
  CHECK_THROWS_AS(merge_json(m, nlohmann::json::parse(R"({"seed":-1})")), ConfigError);
  CHECK_THROWS_AS(merge_json(m, nlohmann::json::parse(R"({"dt":"small"})")), ConfigError);
  CHECK_THROWS_AS(merge_json(m, nlohmann::json::parse("[1]")), ConfigError);

  // Every field except threads is echoed.
  const auto echo = config_to_json(m);
  CHECK(echo.at("seed") == 9);
  CHECK(echo.at("model") == "general");
  CHECK(!echo.contains("threads"));
}

TEST_CASE("initial states") {
  CHECK(parse_initial("0") == std::array<double, 3>{0, 0, 1});
  CHECK(parse_initial("-i") == std::array<double, 3>{0, -1, 0});
  const auto n = parse_initial("3,0,4");
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[2] == doctest::Approx(0.8));
  CHECK_THROWS_AS(parse_initial("0,0,0"), ConfigError);
  CHECK_THROWS_AS(parse_initial("1,2"), ConfigError);
  CHECK_THROWS_AS(parse_initial("up"), ConfigError);
  CHECK_THROWS_AS(parse_initial("1,2,3,4"), ConfigError);
}

TEST_CASE("validation") {
  auto bad = [](auto mutate) {
    ExperimentConfig c = default_config("unravel");
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.dt = 0; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.t_final = -1; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.trajectories = 0; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.threads = 0; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.format = "xml"; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.model = "general"; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.command = "plot"; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.n = 5; })), ConfigError);
  CHECK_THROWS_AS(validate(bad([](auto& c) { c.dt = std::nan(""); })), ConfigError);
  CHECK_NOTHROW(validate(default_config("unravel")));
  CHECK(exit_code(Verdict::Fail) == 1);
  CHECK(exit_code(Verdict::Pass) == 0);
  CHECK(exit_code(Verdict::Inconclusive) == 0);
}

TEST_CASE("rendering") {
  RunReport r;
  r.config = default_config("unravel");
  r.columns = {"t", "x", "flag", "label"};
  r.rows.push_back({0.1, std::int64_t{3}, true, std::string("a")});
  r.rows.push_back({1.0 / 3.0, std::int64_t{-1}, false, std::string("b")});
  r.verdict = Verdict::Pass;
  CHECK(render_csv(r) ==
        "t,x,flag,label\n0.10000000000000001,3,true,a\n0.33333333333333331,-1,false,b\n");
  const auto j = report_json(r);
  CHECK(j.at("summary").at("verdict") == "PASS");
  CHECK(j.at("records").size() == 2);
  CHECK(j.at("records")[1].at("t").get<double>() == 1.0 / 3.0);
  CHECK(j.at("config").at("command") == "unravel");
  CHECK(j.at("software").at("version") == kVersion);
  CHECK(j.at("execution").at("threads") == 1);
  r.config.format = "csv";
  CHECK(render(r) == render_csv(r));
}

TEST_CASE("unravel") {
  SUBCASE("small ensemble agrees with the exact solution") {
    const auto r = run(small("unravel"));
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.rows.size() == 5);
    CHECK(r.summary.at("min_choi_eigenvalue").get<double>() < 0);
  }
  SUBCASE("T = 0") {
    auto c = small("unravel");
    c.t_final = 0;
    const auto r = run(c);
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.summary.at("max_deviation").get<double>() == 0);
  }
  SUBCASE("N = 1 is inconclusive") {
    auto c = small("unravel");
    c.trajectories = 1;
    const auto r = run(c);
    CHECK(r.verdict == Verdict::Inconclusive);
    CHECK(r.note.find("N too small") != std::string::npos);
  }
  SUBCASE("general model at c = (1, 1, 1)") {
    auto c = small("unravel");
    c.model = "general";
    c.rates = {1, 1, 1};
    const auto r = run(c);
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.summary.at("cp") == true);
  }
}

TEST_CASE("choi") {
  auto c = default_config("choi");
  c.times = {0.1, 0.25, 0.5};
  auto r = run(c);
  CHECK(r.verdict == Verdict::Pass);
  const double expected[] = {(std::exp(-0.4) - 1) / 4, (std::exp(-1.0) - 1) / 4,
                             (std::exp(-2.0) - 1) / 4};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(std::get<double>(r.rows[i][1]) - expected[i]) <= 1e-5);
    CHECK(std::get<bool>(r.rows[i][3]) == false);
  }

  c.times = {0.0};
  r = run(c);
  CHECK(std::get<bool>(r.rows[0][3]) == true);
  CHECK(std::abs(std::get<double>(r.rows[0][1])) <= 1e-15);

  c = default_config("choi");
  c.rates = {1, 1, 1};
  r = run(c);
  CHECK(r.verdict == Verdict::Pass);
  CHECK(r.summary.at("cp") == true);
  CHECK(r.rows.size() == 20);
}

TEST_CASE("identity") {
  auto c = default_config("identity");
  auto r = run(c);
  CHECK(r.verdict == Verdict::Pass);
  CHECK(r.rows.size() == 10000);

  c.trajectories = 1;
  c.pole_states = 1;
  r = run(c);
  CHECK(std::get<std::string>(r.rows[0][1]) == "pole");
  CHECK(std::get<double>(r.rows[0][5]) <= 1e-12);

  c = default_config("identity");
  c.trajectories = 10;
  c.rates = {1, 1, 1};
  r = run(c);
  CHECK(r.verdict == Verdict::Informational);
  CHECK(r.summary.at("max_identity_residual").get<double>() > 1e-3);

  c.pole_states = 11;
  CHECK_THROWS_AS(run(c), ConfigError);
}

TEST_CASE("param") {
  auto c = default_config("param");
  const auto r = run(c);
  CHECK(r.verdict == Verdict::Pass);
  bool saw_rejection = false, saw_identity = false;
  for (const auto& row : r.rows) {
    const auto& kind = std::get<std::string>(row[1]);
    if (kind == "s=2I") {
      saw_rejection = true;
      CHECK(std::get<std::string>(row[10]) == "infeasible");
    }
    if (kind == "O=I") {
      saw_identity = true;
      CHECK(std::get<double>(row[8]) == 0.0);
    }
  }
  CHECK(saw_rejection);
  CHECK(saw_identity);
}

TEST_CASE("convergence") {
  auto c = small("convergence");
  c.t_final = 0;
  const auto r = run(c);
  CHECK(r.verdict == Verdict::Pass);
  for (const auto& row : r.rows) {
    for (std::size_t k = 11; k < 14; ++k) CHECK(std::get<double>(row[k]) == 0.0);
  }
  CHECK(r.summary.at("rk4_order").get<double>() >= 3.7);
}

TEST_CASE("payloads do not depend on threads") {
  for (const std::string command : {"unravel", "convergence"}) {
    auto c = small(command);
    c.trajectories = 300;  // several reduction blocks
    c.threads = 1;
    auto one = report_json(run(c));
    c.threads = 3;
    auto three = report_json(run(c));
    one.erase("execution");
    three.erase("execution");
    CHECK(one.dump() == three.dump());
    c.format = "csv";
    const std::string csv3 = render(run(c));
    c.threads = 1;
    CHECK(render(run(c)) == csv3);
  }
}
