#include "vtolmpc/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace vtolmpc {

void Scenario::validate() const {
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  solver.validate();
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
  if (plant_substeps < 1) throw ConfigError("plant sub-steps must be >= 1");
  const auto& e = initial.rigid.eulers;
  if (!(std::abs(e(0)) < std::numbers::pi / 2 && std::abs(e(1)) < std::numbers::pi / 2)) {
    throw ConfigError("initial attitude outside |phi|, |theta| < pi/2");
  }
  if (!(initial.thrust > kThrustEpsilon)) throw ConfigError("initial thrust must be positive");
  const FlatState z0 = flat_map(initial, params);
  for (const auto& obs : obstacles) {
    if (!(obs.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
    if (cbf_value(z0, obs) < 0.0) throw ConfigError("initial position lies inside an obstacle");
  }
}

Scenario Scenario::sphere_midmap() {
  Scenario s;
  s.initial = ExtendedState::hover(s.params, Eigen::Vector3d(7, 7, 0), 0.0);
  s.obstacles.push_back({Eigen::Vector3d(3.5, 3.2, 0.0), 1.0});
  return s;
}

ExtendedState add_noise(const ExtendedState& x, double variance, std::mt19937_64& rng) {
  if (variance <= 0.0) return x;
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  ExtendedState out = x;
  for (auto* v : {&out.rigid.p, &out.rigid.eulers, &out.rigid.v, &out.rigid.euler_rates}) {
    for (int i = 0; i < 3; ++i) (*v)(i) += normal(rng);
  }
  return out;
}

namespace {

std::vector<Obstacle> shifted_obstacles(const std::vector<Obstacle>& obstacles, const Goal& goal) {
  std::vector<Obstacle> out = obstacles;
  for (auto& o : out) o.center -= goal.p;
  return out;
}

Eigen::VectorXd shift_plan(const Eigen::VectorXd& plan, const MpcProblem& problem, const MpcConfig& cfg) {
  const Eigen::Index n = plan.size();
  Eigen::VectorXd shifted = Eigen::VectorXd::Zero(n);
  shifted.head(n - 4) = plan.tail(n - 4);
  // The last state does not depend on the last input, so the terminal law
  // can be evaluated on the partially shifted plan.
  const FlatState z_last = problem.state_at(shifted, problem.horizon - 1);
  shifted.tail<4>() = cfg.k * z_last.z;
  return shifted;
}

}  // namespace

TrajectoryLog run_closed_loop(const Scenario& scenario) {
  scenario.validate();
  const MpcConfig& cfg = scenario.cfg;
  const BodyParams& params = scenario.params;
  const double dt = cfg.delta;
  const auto steps = static_cast<int>(std::llround(scenario.duration / dt));
  const std::vector<Obstacle> obstacles = shifted_obstacles(scenario.obstacles, scenario.goal);
  const SqpSolver solver(scenario.solver);

  std::mt19937_64 rng(scenario.seed);
  TrajectoryLog log;
  ExtendedState truth = scenario.initial;
  std::optional<Eigen::VectorXd> plan;

  for (int k = 0; k <= steps; ++k) {
    StepRecord rec;
    rec.t = k * dt;
    rec.truth = truth;
    try {
      rec.measured = add_noise(truth, scenario.noise_variance, rng);
      rec.flat = flat_map(rec.measured, params);
      const FlatState z_true = flat_map(truth, params);
      rec.dist_min = std::numeric_limits<double>::quiet_NaN();
      for (const auto& obs : scenario.obstacles) {
        rec.barrier.push_back(cbf_value(z_true, obs));
        const double dist = (z_true.position() - obs.center).norm();
        if (!(dist >= rec.dist_min)) rec.dist_min = dist;
      }

      const FlatState z0 = goal_shift(rec.flat, scenario.goal);
      MpcProblem problem = build_qcqp(z0, cfg, obstacles);
      rec.fixed_row_min = drop_fixed_rows(problem.qcqp);
      std::optional<Eigen::VectorXd> warm;
      if (plan) warm = shift_plan(*plan, problem, cfg);

      const SolveResult sol = solver.solve(problem.qcqp, warm);
      rec.status = sol.status;
      rec.iterations = sol.iterations;
      rec.solve_ms = 1e3 * sol.wall_time;
      const bool usable = sol.status == SolveStatus::Optimal ||
                          (sol.status == SolveStatus::MaxIter && sol.constraint_violation <= scenario.solver.con_tol);
      if (usable) {
        plan = sol.solution;
        rec.cost = sol.objective;
      } else {
        rec.fallback = true;
        if (warm) {
          plan = *warm;
        } else {
          Eigen::VectorXd hold = Eigen::VectorXd::Zero(problem.qcqp.dim());
          hold.head<4>() = (cfg.k * z0.z).cwiseMax(cfg.v_lo).cwiseMin(cfg.v_hi);
          plan = hold;
        }
        rec.cost = problem.qcqp.objective(*plan);
      }
      rec.v = VirtualInput::from_vector(plan->head<4>());
      rec.u = dfl_control(rec.measured, rec.v, params);
      log.steps.push_back(rec);
      if (k == steps) break;

      // The linearizing law runs continuously inside the integrator with v
      // held over the period; measurement noise is held as a fixed offset.
      const Vector14d offset = rec.measured.to_vector() - truth.to_vector();
      const VirtualInput v = rec.v;
      const auto field = [&](double, const Vector14d& x) {
        const ExtendedState xs = ExtendedState::from_vector(x);
        const ExtendedState seen = ExtendedState::from_vector(x + offset);
        return derivatives(xs, dfl_control(seen, v, params), params).to_vector();
      };
      Vector14d x = truth.to_vector();
      const double h = dt / scenario.plant_substeps;
      for (int s = 0; s < scenario.plant_substeps; ++s) x = rk4(field, x, s * h, h);
      truth = ExtendedState::from_vector(x);
    } catch (const DomainError& e) {
      log.aborted = true;
      log.abort_reason = e.what();
      break;
    }
  }
  return log;
}

Metrics metrics(const TrajectoryLog& log, const Scenario& scenario, double settle_threshold) {
  Metrics m;
  const std::size_t n_obs = scenario.obstacles.size();
  m.min_distance.assign(n_obs, std::numeric_limits<double>::infinity());
  m.min_cbf_residual = std::numeric_limits<double>::infinity();
  m.min_barrier = std::numeric_limits<double>::infinity();
  m.settling_time = std::numeric_limits<double>::quiet_NaN();
  if (log.steps.empty()) return m;

  double wall = 0.0;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const StepRecord& rec = log.steps[k];
    const Eigen::Vector3d p = rec.truth.rigid.p;
    for (std::size_t j = 0; j < n_obs; ++j) {
      const Obstacle& obs = scenario.obstacles[j];
      m.min_distance[j] = std::min(m.min_distance[j], (p - obs.center).norm());
      const double h_now = cbf_value(rec.flat, obs);
      m.min_barrier = std::min(m.min_barrier, h_now);
      if (k + 1 < log.steps.size()) {
        const double h_next = cbf_value(log.steps[k + 1].flat, obs);
        m.min_cbf_residual = std::min(m.min_cbf_residual, h_next - (1.0 - scenario.cfg.gamma) * h_now);
      }
    }
    if (rec.fallback) ++m.infeasible_solves;
    wall += rec.solve_ms;
  }
  m.mean_solve_ms = wall / static_cast<double>(log.steps.size());

  // Settled from the step after the last excursion above the threshold.
  std::size_t first_settled = log.steps.size();
  for (std::size_t k = log.steps.size(); k-- > 0;) {
    if ((log.steps[k].truth.rigid.p - scenario.goal.p).norm() >= settle_threshold) break;
    first_settled = k;
  }
  if (first_settled < log.steps.size()) m.settling_time = log.steps[first_settled].t;
  m.final_position_error = (log.steps.back().truth.rigid.p - scenario.goal.p).norm();
  const double t_end = log.steps.back().t;
  for (const StepRecord& rec : log.steps) {
    if (rec.t < t_end - 1.0 - 1e-9) continue;
    m.final_window_error = std::max(m.final_window_error, (rec.truth.rigid.p - scenario.goal.p).norm());
  }
  return m;
}

}  // namespace vtolmpc
