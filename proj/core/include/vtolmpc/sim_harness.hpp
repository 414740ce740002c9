#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vtolmpc/dfl.hpp"
#include "vtolmpc/linear_mpc.hpp"
#include "vtolmpc/qcqp_solver.hpp"
#include "vtolmpc/vehicle_model.hpp"

namespace vtolmpc {

struct Scenario {
  BodyParams params;
  ExtendedState initial;
  Goal goal;
  std::vector<Obstacle> obstacles;
  MpcConfig cfg = MpcConfig::defaults();
  SolverSettings solver;
  double duration = 20.0;
  double noise_variance = 0.0;
  std::uint64_t seed = 1;
  /// RK4 sub-steps of the plant per control period.
  int plant_substeps = 1;

  /// Throws ConfigError when an invariant fails.
  void validate() const;

  /// Start (7, 7, 0) at hover, goal at the origin, one unit sphere near mid-map.
  static Scenario sphere_midmap();
};

struct StepRecord {
  double t = 0.0;
  ExtendedState truth;
  ExtendedState measured;
  FlatState flat;  // flat image of the measured state, unshifted
  VirtualInput v;
  ExtendedInput u;
  std::vector<double> barrier;  // H of the true position, per obstacle
  double dist_min = 0.0;        // distance to the nearest obstacle center
  double cost = 0.0;            // optimal MPC cost J*
  SolveStatus status = SolveStatus::Optimal;
  int iterations = 0;
  double solve_ms = 0.0;
  bool fallback = false;
  double fixed_row_min = 0.0;  // smallest safety row that was fixed by z_0
};

struct TrajectoryLog {
  std::vector<StepRecord> steps;
  bool aborted = false;
  std::string abort_reason;
};

/// Adds N(0, variance) draws to the twelve rigid-body components; thrust
/// states are controller-internal and stay untouched.
ExtendedState add_noise(const ExtendedState& x, double variance, std::mt19937_64& rng);

TrajectoryLog run_closed_loop(const Scenario& scenario);

struct Metrics {
  std::vector<double> min_distance;  // per obstacle, to the center
  double settling_time = 0.0;        // NaN if never settled
  double min_cbf_residual = 0.0;     // min_k H(z_{k+1}) - (1-gamma) H(z_k) on logged flat states
  double min_barrier = 0.0;          // min_k H(z_k) on logged flat states
  int infeasible_solves = 0;
  double mean_solve_ms = 0.0;
  double final_position_error = 0.0;
  double final_window_error = 0.0;  // max position error over the last second
};

Metrics metrics(const TrajectoryLog& log, const Scenario& scenario, double settle_threshold = 0.1);

}  // namespace vtolmpc
