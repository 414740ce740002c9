#pragma once

#include <cstdint>
#include <vector>

#include "vtolmpc/dfl.hpp"
#include "vtolmpc/qcqp_problem.hpp"

namespace vtolmpc {

using Matrix14d = Eigen::Matrix<double, 14, 14>;
using Matrix14x4d = Eigen::Matrix<double, 14, 4>;
using Matrix4x14d = Eigen::Matrix<double, 4, 14>;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flat chain-of-integrators model and its forward-Euler discretization.
struct LinearModel {
  Matrix14d a_z = Matrix14d::Zero();
  Matrix14x4d b_z = Matrix14x4d::Zero();
  Matrix4x14d c_z = Matrix4x14d::Zero();
  Matrix14d a_d = Matrix14d::Identity();
  Matrix14x4d b_d = Matrix14x4d::Zero();
  double delta = 0.0;
};

LinearModel build_continuous();

/// A_d = I + delta A_z,  B_d = delta B_z.
LinearModel discretize(const LinearModel& model, double delta);

struct LqrSolution {
  Eigen::MatrixXd k;  // u = K x
  Eigen::MatrixXd p;  // Riccati solution
  int iterations = 0;
  double residual = 0.0;  // Frobenius norm of the Riccati residual, relative to max(1, |P|)
};

/// Discrete-time LQR gain from the stabilizing Riccati solution.
/// Throws std::runtime_error when the iteration does not converge.
LqrSolution lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                     const Eigen::MatrixXd& r, int max_iterations = 200);

/// Solves Qbar - Acl' Qbar Acl = Q + K'RK for the closed loop Acl = A + BK.
/// Throws std::runtime_error when Acl is not Schur stable.
Eigen::MatrixXd terminal_weight(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& k,
                                const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

/// Frobenius norm of Qbar - Acl' Qbar Acl - Q - K'RK.
double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& k,
                         const Eigen::MatrixXd& q, const Eigen::MatrixXd& r, const Eigen::MatrixXd& q_terminal);

double spectral_radius(const Eigen::MatrixXd& m);

struct Obstacle {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

/// Squared distance to the obstacle center minus the squared radius.
double cbf_value(const FlatState& z, const Obstacle& obs);

enum class SafetyMode { Cbf, Ed };

struct MpcConfig {
  int horizon = 20;
  int check_horizon = 20;
  double gamma = 0.2;
  double delta = 0.05;
  Matrix14d q = Matrix14d::Zero();
  Eigen::Matrix4d r = Eigen::Matrix4d::Identity();
  Matrix14d q_terminal = Matrix14d::Zero();
  Matrix4x14d k = Matrix4x14d::Zero();
  Eigen::Vector4d z_lo = Eigen::Vector4d::Zero();
  Eigen::Vector4d z_hi = Eigen::Vector4d::Zero();
  Eigen::Vector4d v_lo = Eigen::Vector4d::Zero();
  Eigen::Vector4d v_hi = Eigen::Vector4d::Zero();
  SafetyMode mode = SafetyMode::Cbf;

  /// Default weights and bounds with the terminal ingredients filled in.
  static MpcConfig defaults();

  /// Recomputes K (LQR) and Qbar (Lyapunov) from q, r and delta.
  void update_terminal();

  /// Throws ConfigError when any invariant of the configuration fails.
  void validate() const;
};

struct Goal {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

FlatState goal_shift(const FlatState& z, const Goal& goal);
FlatState goal_unshift(const FlatState& z, const Goal& goal);

/// Which block of the MPC formulation a linear row belongs to.
enum class RowKind : std::uint8_t { StateBox, InputBox, TerminalInput, TerminalState };

/// Condensed MPC problem: the QCQP in the stacked inputs plus the affine
/// prediction map  [z_0; ...; z_N] = free + gain * u.
struct MpcProblem {
  QcqpProblem qcqp;
  Eigen::VectorXd free_response;
  Eigen::MatrixXd forced_response;
  std::vector<RowKind> row_kinds;
  int horizon = 0;

  Eigen::VectorXd predict(const Eigen::VectorXd& u) const { return free_response + forced_response * u; }
  FlatState state_at(const Eigen::VectorXd& u, int k) const;
  int count(RowKind kind) const;
};

/// Removes quadratic rows that no decision can influence (positions react to
/// inputs only after four steps, so the first safety rows are fixed by z_0).
/// Returns the smallest value among the removed rows, +inf when none.
double drop_fixed_rows(QcqpProblem& problem);

MpcProblem build_qcqp(const FlatState& z0, const MpcConfig& cfg, const std::vector<Obstacle>& obstacles);

/// Sampled check of H(Acl z) > (1 - gamma) H(z) on the boundary of the terminal set.
struct TerminalSafetyReport {
  int samples = 0;
  int violations = 0;
  double min_margin = 0.0;
};

TerminalSafetyReport check_terminal_safety(const MpcConfig& cfg, const std::vector<Obstacle>& obstacles,
                                           int samples, std::uint64_t seed);

}  // namespace vtolmpc
