#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace vtolmpc {

using Vector14d = Eigen::Matrix<double, 14, 1>;

/// Raised when a state leaves the region where the model or the
/// linearizing feedback is defined (|theta| or |phi| >= pi/2).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct BodyParams {
  double m = 0.7;
  double d = 0.3;
  double ix = 1.241;
  double iy = 1.241;
  double iz = 1.241;
  double g = 9.81;

  /// Throws std::invalid_argument unless every field is strictly positive.
  void validate() const;
};

struct RigidState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d eulers = Eigen::Vector3d::Zero();  // (phi, theta, psi), ZYX
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d euler_rates = Eigen::Vector3d::Zero();
};

/// Rigid-body state plus the two thrust integrators of the dynamic extension.
struct ExtendedState {
  RigidState rigid;
  double thrust = 0.0;
  double thrust_rate = 0.0;

  /// Packs as (p, eulers, v, thrust, thrust_rate, euler_rates).
  Vector14d to_vector() const;
  static ExtendedState from_vector(const Vector14d& x);

  static ExtendedState hover(const BodyParams& params, const Eigen::Vector3d& p = Eigen::Vector3d::Zero(),
                             double yaw = 0.0);
};

struct ExtendedInput {
  double u1 = 0.0;  // thrust second derivative
  double u2 = 0.0;  // torque about x
  double u3 = 0.0;  // torque about y
  double u4 = 0.0;  // torque about z

  Eigen::Vector4d to_vector() const { return {u1, u2, u3, u4}; }
  static ExtendedInput from_vector(const Eigen::Vector4d& u) { return {u(0), u(1), u(2), u(3)}; }
};

/// ZYX rotation matrix body -> inertial.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& eulers);

/// Thrust direction in the inertial frame, i.e. the third column of rotation_matrix.
Eigen::Vector3d thrust_axis(const Eigen::Vector3d& eulers);

/// Time derivative of the extended state. Translational dynamics use
/// V' = (thrust/m) R e3 - g e3; Euler rates are states driven by the torques.
ExtendedState derivatives(const ExtendedState& x, const ExtendedInput& u, const BodyParams& params);

/// Classical fourth-order Runge-Kutta step over any vector field f(t, x).
template <typename State, typename Field>
State rk4(const Field& f, const State& x, double t, double dt) {
  const State k1 = f(t, x);
  const State k2 = f(t + 0.5 * dt, State(x + 0.5 * dt * k1));
  const State k3 = f(t + 0.5 * dt, State(x + 0.5 * dt * k2));
  const State k4 = f(t + dt, State(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One RK4 step with the input held constant over the interval.
ExtendedState rk4_step(const ExtendedState& x, const ExtendedInput& u, double dt, const BodyParams& params);

}  // namespace vtolmpc
