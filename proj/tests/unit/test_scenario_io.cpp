#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "vtolmpc/scenario_io.hpp"

using namespace vtolmpc;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("full scenario file") {
  const Scenario s = parse_scenario(R"(
[body]
m = 0.9
d = 0.25
ix = 1.0
iy = 1.1
iz = 1.2

[initial]
p = [1.0, 2.0, 3.0]
eulers = [0.0, 0.1, 0.2]
v = [0.5, 0.0, 0.0]

[goal]
p = [0.0, 0.0, 1.0]
yaw = 0.3

[[obstacle]]
center = [0.5, 1.0, 2.0]
radius = 0.4

[[obstacle]]
center = [-2, -2, 0]
radius = 1

[mpc]
n = 15
nc = 3
gamma = 0.4
mode = "ed"
r_diag = [2, 2, 2, 2]
v_hi = [5, 5, 5, 5]

[sim]
duration = 4.5
noise_variance = 0.01
seed = 77
plant_substeps = 2
)");
  CHECK(s.params.m == 0.9);
  CHECK(s.params.iy == 1.1);
  CHECK(s.initial.rigid.p == Eigen::Vector3d(1, 2, 3));
  CHECK(s.initial.rigid.eulers(2) == 0.2);
  CHECK(s.initial.thrust == doctest::Approx(0.9 * 9.81));
  CHECK(s.goal.yaw == 0.3);
  REQUIRE(s.obstacles.size() == 2);
  CHECK(s.obstacles[1].center == Eigen::Vector3d(-2, -2, 0));
  CHECK(s.obstacles[1].radius == 1.0);
  CHECK(s.cfg.horizon == 15);
  CHECK(s.cfg.check_horizon == 3);
  CHECK(s.cfg.gamma == 0.4);
  CHECK(s.cfg.mode == SafetyMode::Ed);
  CHECK(s.cfg.r(2, 2) == 2.0);
  CHECK(s.cfg.v_hi(3) == 5.0);
  CHECK(s.duration == 4.5);
  CHECK(s.noise_variance == 0.01);
  CHECK(s.seed == 77);
  CHECK(s.plant_substeps == 2);
}

TEST_CASE("empty file gives the obstacle-free defaults") {
  const Scenario s = parse_scenario("");
  const Scenario d = Scenario::sphere_midmap();
  CHECK(s.obstacles.empty());
  CHECK(s.initial.to_vector() == d.initial.to_vector());
  CHECK(s.cfg.horizon == d.cfg.horizon);
  CHECK(s.cfg.gamma == d.cfg.gamma);
  CHECK(s.cfg.q_terminal.isApprox(d.cfg.q_terminal));
}

TEST_CASE("malformed scenarios are config errors") {
  CHECK_THROWS_AS(parse_scenario("[body\nm = 1"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[body]\nm = \"heavy\""), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[initial]\np = [1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[mpc]\nmode = \"both\""), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[mpc]\nn = 2.5"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[mpc]\ngamma = 1.5"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[obstacle]\ncenter = [0, 0, 0]"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[[obstacle]]\ncenter = [7, 7, 0]\nradius = 1"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("[sim]\nduration = -1"), ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.toml"), ConfigError);
}

TEST_CASE("mode names") {
  CHECK(parse_mode("cbf") == SafetyMode::Cbf);
  CHECK(parse_mode("ED") == SafetyMode::Ed);
  CHECK(to_string(SafetyMode::Cbf) == "cbf");
  CHECK(to_string(parse_mode(to_string(SafetyMode::Ed))) == "ed");
}

TEST_CASE("csv output") {
  Scenario s = parse_scenario(R"(
[[obstacle]]
center = [3.5, 3.2, 0]
radius = 1
[sim]
duration = 0.2
)");
  const TrajectoryLog log = run_closed_loop(s);
  std::ostringstream out;
  write_csv(log, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == csv_header());
  const std::vector<std::string> header = split(line);
  REQUIRE(header.size() == 25);
  CHECK(header.front() == "t");
  CHECK(header[10] == "thrust");
  CHECK(header.back() == "solve_ms");

  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const std::vector<std::string> cells = split(line);
    REQUIRE(cells.size() == header.size());
    const StepRecord& r = log.steps[rows];
    CHECK(std::stod(cells[0]) == doctest::Approx(r.t).epsilon(1e-9));
    CHECK(std::stod(cells[1]) == doctest::Approx(r.truth.rigid.p.x()).epsilon(1e-8));
    CHECK(std::stod(cells[20]) == doctest::Approx(r.dist_min).epsilon(1e-8));
    CHECK(cells[22] == std::string(to_string(r.status)));
    CHECK(std::stoi(cells[23]) == r.iterations);
    ++rows;
  }
  CHECK(rows == log.steps.size());
}

TEST_CASE("csv numbers use nine significant digits") {
  TrajectoryLog log;
  StepRecord r;
  r.t = 1.0 / 3.0;
  r.truth.rigid.p = Eigen::Vector3d(7.0, 1e-12, -123456789.25);
  log.steps.push_back(r);
  std::ostringstream out;
  write_csv(log, out);
  const std::string row = out.str().substr(out.str().find('\n') + 1);
  const std::vector<std::string> cells = split(row);
  CHECK(cells[0] == "0.333333333");
  CHECK(cells[1] == "7");
  CHECK(cells[2] == "1e-12");
  CHECK(cells[3] == "-123456789");
  CHECK(cells[19] == "nan");
}

TEST_CASE("shipped scenario files") {
  const std::string dir = VTOLMPC_SCENARIO_DIR;
  const Scenario sphere = load_scenario(dir + "/sphere_midmap.toml");
  const Scenario builtin = Scenario::sphere_midmap();
  CHECK(sphere.initial.to_vector() == builtin.initial.to_vector());
  REQUIRE(sphere.obstacles.size() == 1);
  CHECK(sphere.obstacles[0].center == builtin.obstacles[0].center);
  CHECK(sphere.obstacles[0].radius == builtin.obstacles[0].radius);
  CHECK(sphere.cfg.q == builtin.cfg.q);
  CHECK(sphere.cfg.r == builtin.cfg.r);
  CHECK(sphere.cfg.z_lo == builtin.cfg.z_lo);
  CHECK(sphere.cfg.v_hi == builtin.cfg.v_hi);
  CHECK(sphere.cfg.gamma == builtin.cfg.gamma);
  CHECK(sphere.cfg.horizon == builtin.cfg.horizon);
  CHECK(sphere.duration == builtin.duration);
  CHECK(sphere.params.ix == builtin.params.ix);

  CHECK(load_scenario(dir + "/obstacle_free.toml").obstacles.empty());
  const Scenario hover = load_scenario(dir + "/hover.toml");
  CHECK(hover.goal.p == hover.initial.rigid.p);

  const Scenario noisy = load_scenario(dir + "/noisy.toml");
  CHECK(noisy.noise_variance == 0.05);
  CHECK(noisy.obstacles.size() == 1);
  CHECK(noisy.seed == 1);
  CHECK(noisy.cfg.q(0, 0) == 300.0);
  CHECK(noisy.cfg.q(13, 13) == 30.0);
}
