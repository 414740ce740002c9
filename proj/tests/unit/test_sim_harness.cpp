#include <doctest.h>

#include <cmath>
#include <random>

#include "vtolmpc/sim_harness.hpp"

using namespace vtolmpc;
using doctest::Approx;

namespace {

Scenario hover_at_goal(double duration) {
  Scenario s;
  s.initial = ExtendedState::hover(s.params, {1.0, -2.0, 0.5}, 0.0);
  s.goal.p = Eigen::Vector3d(1.0, -2.0, 0.5);
  s.duration = duration;
  return s;
}

StepRecord at(double t, const Eigen::Vector3d& p) {
  StepRecord r;
  r.t = t;
  r.truth.rigid.p = p;
  r.truth.thrust = 6.867;
  r.flat.z(0) = p.x();
  r.flat.z(4) = p.y();
  r.flat.z(8) = p.z();
  return r;
}

}  // namespace

TEST_CASE("noise injection") {
  std::mt19937_64 rng(1);
  const ExtendedState x = ExtendedState::hover(BodyParams{}, {7, 7, 0});
  CHECK(add_noise(x, 0.0, rng).to_vector() == x.to_vector());

  std::mt19937_64 a(42), b(42);
  const ExtendedState na = add_noise(x, 0.05, a);
  const ExtendedState nb = add_noise(x, 0.05, b);
  CHECK(na.to_vector() == nb.to_vector());
  CHECK(na.thrust == x.thrust);
  CHECK(na.thrust_rate == x.thrust_rate);
  CHECK(na.rigid.p != x.rigid.p);

  std::mt19937_64 c(7);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = add_noise(x, 0.05, c).rigid.euler_rates(1);
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(var - 0.05) <= 0.05 * 0.05);
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("scenario validation") {
  Scenario s = Scenario::sphere_midmap();
  CHECK_NOTHROW(s.validate());
  CHECK(s.initial.rigid.p == Eigen::Vector3d(7, 7, 0));
  CHECK(s.cfg.delta == 0.05);
  CHECK(s.params.m == 0.7);

  s.duration = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = Scenario::sphere_midmap();
  s.noise_variance = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = Scenario::sphere_midmap();
  s.obstacles.push_back({{7.2, 7.0, 0.0}, 0.5});
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = Scenario::sphere_midmap();
  s.initial.rigid.eulers(0) = 1.6;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = Scenario::sphere_midmap();
  s.initial.thrust = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = Scenario::sphere_midmap();
  s.params.m = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = Scenario::sphere_midmap();
  s.solver.max_iter = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = Scenario::sphere_midmap();
  s.plant_substeps = 0;
  CHECK_THROWS_AS(run_closed_loop(s), ConfigError);
}

TEST_CASE("hover at the goal is held") {
  const Scenario s = hover_at_goal(3.0);
  const TrajectoryLog log = run_closed_loop(s);
  REQUIRE_FALSE(log.aborted);
  REQUIRE(log.steps.size() == 61);
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    CHECK(log.steps[k].t == Approx(0.05 * static_cast<double>(k)).epsilon(1e-12));
    CHECK((log.steps[k].truth.rigid.p - s.goal.p).norm() <= 1e-3);
    CHECK(log.steps[k].status == SolveStatus::Optimal);
  }
  const Metrics m = metrics(log, s);
  CHECK(m.settling_time == 0.0);
  CHECK(m.infeasible_solves == 0);
  CHECK(m.final_position_error <= 1e-3);
  CHECK(m.min_distance.empty());
}

TEST_CASE("closed loop runs are reproducible") {
  Scenario s = Scenario::sphere_midmap();
  s.duration = 1.0;
  s.noise_variance = 0.05;
  s.seed = 9;
  const TrajectoryLog a = run_closed_loop(s);
  const TrajectoryLog b = run_closed_loop(s);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].truth.to_vector() == b.steps[k].truth.to_vector());
    CHECK(a.steps[k].measured.to_vector() == b.steps[k].measured.to_vector());
    CHECK(a.steps[k].v.to_vector() == b.steps[k].v.to_vector());
    CHECK(a.steps[k].u.to_vector() == b.steps[k].u.to_vector());
    CHECK(a.steps[k].cost == b.steps[k].cost);
    CHECK(a.steps[k].iterations == b.steps[k].iterations);
  }
  s.seed = 10;
  CHECK(run_closed_loop(s).steps.back().truth.to_vector() != a.steps.back().truth.to_vector());
}

TEST_CASE("logged quantities are consistent") {
  Scenario s = Scenario::sphere_midmap();
  s.duration = 0.5;
  const TrajectoryLog log = run_closed_loop(s);
  REQUIRE(log.steps.size() == 11);
  const Obstacle& obs = s.obstacles.front();
  for (const StepRecord& r : log.steps) {
    REQUIRE(r.barrier.size() == 1);
    CHECK(r.dist_min == Approx((r.truth.rigid.p - obs.center).norm()).epsilon(1e-12));
    CHECK(r.barrier[0] == Approx(r.dist_min * r.dist_min - 1.0).epsilon(1e-9));
    CHECK(r.measured.to_vector() == r.truth.to_vector());
    CHECK(r.cost > 0.0);
  }
}

TEST_CASE("unusable solves fall back and are flagged") {
  Scenario s;
  s.initial = ExtendedState::hover(s.params, {3.0, 0.0, 0.0});
  s.initial.rigid.v = Eigen::Vector3d(-20.0, 0.0, 0.0);
  s.obstacles.push_back({{0.0, 0.0, 0.0}, 1.0});
  s.goal.p = Eigen::Vector3d(-5.0, 0.0, 0.0);
  s.cfg.v_lo.setConstant(-0.01);
  s.cfg.v_hi.setConstant(0.01);
  s.duration = 0.1;
  const TrajectoryLog log = run_closed_loop(s);
  REQUIRE_FALSE(log.steps.empty());
  CHECK(log.steps[0].fallback);
  CHECK(log.steps[0].status != SolveStatus::Optimal);
  CHECK(metrics(log, s).infeasible_solves >= 1);
}

TEST_CASE("leaving the attitude domain aborts with a partial log") {
  Scenario s;
  s.initial = ExtendedState::hover(s.params, {0.0, 0.0, 0.0});
  s.initial.rigid.eulers(1) = 1.5;
  s.initial.rigid.euler_rates(1) = 10.0;
  s.duration = 1.0;
  const TrajectoryLog log = run_closed_loop(s);
  CHECK(log.aborted);
  CHECK_FALSE(log.abort_reason.empty());
  CHECK(log.steps.size() < 21);
}

TEST_CASE("metrics on synthetic logs") {
  Scenario s;
  s.obstacles.push_back({{0.0, 0.0, 0.0}, 1.0});
  s.cfg.gamma = 0.5;
  s.goal.p = Eigen::Vector3d(0.0, 3.0, 0.0);
  TrajectoryLog log;
  // passes the sphere tangentially at t = 0.1
  log.steps.push_back(at(0.00, {-1.0, 1.0, 0.0}));
  log.steps.push_back(at(0.05, {-0.5, 1.0, 0.0}));
  log.steps.push_back(at(0.10, {0.0, 1.0, 0.0}));
  log.steps.push_back(at(0.15, {0.5, 1.5, 0.0}));
  log.steps.push_back(at(0.20, {0.0, 2.95, 0.0}));
  log.steps.push_back(at(0.25, {0.0, 3.0, 0.0}));
  log.steps[3].fallback = true;
  log.steps[1].solve_ms = 4.0;
  const Metrics m = metrics(log, s, 0.1);
  REQUIRE(m.min_distance.size() == 1);
  CHECK(m.min_distance[0] == Approx(1.0).epsilon(1e-15));
  CHECK(m.min_barrier == Approx(0.0).epsilon(1e-15));
  CHECK(m.infeasible_solves == 1);
  CHECK(m.mean_solve_ms == Approx(4.0 / 6.0));
  CHECK(m.settling_time == Approx(0.20));
  CHECK(m.final_position_error == 0.0);
  // step 0 -> 1: H goes 1 -> 0.25, residual 0.25 - 0.5 * 1
  CHECK(m.min_cbf_residual == Approx(-0.25));
  CHECK(m.final_window_error == Approx((Eigen::Vector3d(-1.0, 1.0, 0.0) - s.goal.p).norm()));

  Scenario never = s;
  never.goal.p = Eigen::Vector3d(10.0, 0.0, 0.0);
  CHECK(std::isnan(metrics(log, never).settling_time));
}
