#pragma once

#include <algorithm>
#include <optional>
#include <string_view>
#include <vector>

#include "vtolmpc/qcqp_problem.hpp"

namespace vtolmpc {

enum class SolveStatus { Optimal, MaxIter, Infeasible };

std::string_view to_string(SolveStatus status);

struct SolverSettings {
  int max_iter = 100;
  double kkt_tol = 1e-7;  // relative to 1 + |grad f|_inf
  double con_tol = 1e-7;
  double line_search_shrink = 0.5;
  double merit_penalty = 1.0;
  double hessian_reg = 1e-9;

  void validate() const;
};

/// Result of the inner convex QP  min 0.5 x'Wx + c'x  s.t.  A x >= b.
struct QpResult {
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  int iterations = 0;
  double dual_residual = 0.0;
  double primal_residual = 0.0;
  double complementarity = 0.0;
};

struct QpSettings {
  int max_iter = 200;
  double tol = 1e-10;
};

/// Mehrotra predictor-corrector interior-point method on a dense convex QP.
/// `hessian` must be positive semidefinite; the reduced system is
/// factored with LDL', so a positive-definite Hessian is preferred.
QpResult qp_solve(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient, const Eigen::MatrixXd& rows,
                  const Eigen::VectorXd& lower, const QpSettings& settings = {});

struct MeritStep {
  double before = 0.0;
  double after = 0.0;
  double step = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd solution;
  double objective = 0.0;
  double kkt_residual = 0.0;  // scaled like kkt_tol
  double constraint_violation = 0.0;
  int iterations = 0;
  /// Linear rows first, then quadratic rows, in problem order.
  Eigen::VectorXd multipliers;
  double wall_time = 0.0;
  std::vector<MeritStep> merit_history;
};

/// First-order optimality measures of a candidate primal/dual pair.
struct KktReport {
  double stationarity = 0.0;
  double violation = 0.0;
  double complementarity = 0.0;
  double dual_infeasibility = 0.0;

  double residual() const { return std::max({stationarity, complementarity, dual_infeasibility}); }
};

KktReport kkt_report(const QcqpProblem& problem, const Eigen::VectorXd& u, const Eigen::VectorXd& multipliers);

/// SQP with linearized quadratic rows, an interior-point QP subproblem and
/// an l1 merit backtracking line search. Deterministic for identical inputs.
class SqpSolver {
 public:
  explicit SqpSolver(SolverSettings settings = {});

  SolveResult solve(const QcqpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start = std::nullopt) const;

  const SolverSettings& settings() const { return settings_; }

 private:
  SolverSettings settings_;
};

inline SolveResult solve(const QcqpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                         const SolverSettings& settings = {}) {
  return SqpSolver(settings).solve(problem, warm_start);
}

}  // namespace vtolmpc
