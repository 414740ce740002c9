#include "vtolmpc/dfl.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace vtolmpc {
namespace {

void check_attitude(const Eigen::Vector3d& eulers) {
  constexpr double half_pi = std::numbers::pi / 2;
  if (!(std::abs(eulers(0)) < half_pi && std::abs(eulers(1)) < half_pi)) {
    throw DomainError("attitude outside |phi|, |theta| < pi/2");
  }
}

void check_thrust(double thrust) {
  if (!(thrust > kThrustEpsilon)) {
    throw SingularityError("thrust " + std::to_string(thrust) + " N at or below the singular threshold");
  }
}

// Thrust axis r(eta) together with its Jacobian and the second-order term
// sum_ij d2r/(deta_i deta_j) w_i w_j, all in closed form.
struct AxisKinematics {
  Eigen::Vector3d r;
  Eigen::Matrix3d jac;
  Eigen::Vector3d curvature;
};

AxisKinematics axis_kinematics(const Eigen::Vector3d& eulers, const Eigen::Vector3d& w) {
  const double cf = std::cos(eulers(0)), sf = std::sin(eulers(0));
  const double ct = std::cos(eulers(1)), st = std::sin(eulers(1));
  const double cp = std::cos(eulers(2)), sp = std::sin(eulers(2));

  AxisKinematics k;
  k.r << sf * sp + cf * cp * st, cf * sp * st - cp * sf, cf * ct;

  // columns: d/dphi, d/dtheta, d/dpsi
  k.jac << cf * sp - sf * cp * st, cf * cp * ct, sf * cp - cf * sp * st,  //
      -sf * sp * st - cp * cf, cf * sp * ct, cf * cp * st + sp * sf,      //
      -sf * ct, -cf * st, 0.0;

  // Second partials; the phi-phi and psi-psi entries of the first two
  // components equal -r.
  Eigen::Matrix3d h1, h2, h3;
  h1 << -k.r(0), -sf * cp * ct, cf * cp + sf * sp * st,  //
      -sf * cp * ct, -cf * cp * st, -cf * sp * ct,        //
      cf * cp + sf * sp * st, -cf * sp * ct, -k.r(0);
  h2 << -k.r(1), -sf * sp * ct, cf * sp - sf * cp * st,  //
      -sf * sp * ct, -cf * sp * st, cf * cp * ct,         //
      cf * sp - sf * cp * st, cf * cp * ct, -k.r(1);
  h3 << -cf * ct, sf * st, 0.0,  //
      sf * st, -cf * ct, 0.0,     //
      0.0, 0.0, 0.0;
  k.curvature << w.dot(h1 * w), w.dot(h2 * w), w.dot(h3 * w);
  return k;
}

// Euler accelerations with zero torque.
Eigen::Vector3d free_euler_accel(const Eigen::Vector3d& w, const BodyParams& p) {
  return {(p.iy - p.iz) / p.ix * w(1) * w(2), (p.iz - p.ix) / p.iy * w(0) * w(2),
          (p.ix - p.iy) / p.iz * w(0) * w(1)};
}

}  // namespace

Eigen::Matrix4d static_decoupling(const RigidState& x, const BodyParams& params) {
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a.block<3, 1>(0, 0) = thrust_axis(x.eulers) / params.m;
  a(3, 3) = params.d / params.iz;
  return a;
}

Eigen::Vector4d drift_terms(const ExtendedState& x, const BodyParams& params) {
  check_attitude(x.rigid.eulers);
  check_thrust(x.thrust);
  const Eigen::Vector3d& w = x.rigid.euler_rates;
  const AxisKinematics k = axis_kinematics(x.rigid.eulers, w);
  const Eigen::Vector3d alpha = free_euler_accel(w, params);

  // p'''' = (T''/m) r + 2 (T'/m) J w + (T/m) (curvature + J w')
  const Eigen::Vector3d snap = 2.0 * x.thrust_rate / params.m * (k.jac * w) +
                               x.thrust / params.m * (k.curvature + k.jac * alpha);
  Eigen::Vector4d out;
  out << snap, alpha(2);
  return out;
}

Eigen::Matrix4d decoupling_matrix(const ExtendedState& x, const BodyParams& params) {
  check_attitude(x.rigid.eulers);
  check_thrust(x.thrust);
  const AxisKinematics k = axis_kinematics(x.rigid.eulers, x.rigid.euler_rates);
  const Eigen::Vector3d torque_gain(params.d / params.ix, params.d / params.iy, params.d / params.iz);

  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a.block<3, 1>(0, 0) = k.r / params.m;
  a.block<3, 3>(0, 1) = x.thrust / params.m * k.jac * torque_gain.asDiagonal();
  a(3, 3) = torque_gain(2);
  return a;
}

Eigen::Matrix4d decoupling_inverse(const ExtendedState& x, const BodyParams& params) {
  const Eigen::Matrix4d a = decoupling_matrix(x, params);
  // Block-triangular: invert the 3x3 (r, J_phi, J_theta) block, then back out
  // the yaw column.
  const Eigen::Matrix3d top = a.block<3, 3>(0, 0);
  const Eigen::Matrix3d top_inv = top.inverse();
  const double yaw_gain = a(3, 3);

  Eigen::Matrix4d inv = Eigen::Matrix4d::Zero();
  inv.block<3, 3>(0, 0) = top_inv;
  inv.block<3, 1>(0, 3) = -top_inv * a.block<3, 1>(0, 3) / yaw_gain;
  inv(3, 3) = 1.0 / yaw_gain;
  return inv;
}

ExtendedInput dfl_control(const ExtendedState& x, const VirtualInput& v, const BodyParams& params) {
  const Eigen::Vector4d u = decoupling_inverse(x, params) * (v.to_vector() - drift_terms(x, params));
  return ExtendedInput::from_vector(u);
}

FlatState flat_map(const ExtendedState& x, const BodyParams& params) {
  check_attitude(x.rigid.eulers);
  const Eigen::Vector3d& w = x.rigid.euler_rates;
  const AxisKinematics k = axis_kinematics(x.rigid.eulers, w);
  const Eigen::Vector3d acc = x.thrust / params.m * k.r - Eigen::Vector3d(0, 0, params.g);
  const Eigen::Vector3d jerk = x.thrust_rate / params.m * k.r + x.thrust / params.m * (k.jac * w);

  FlatState f;
  for (int axis = 0; axis < 3; ++axis) {
    f.z.segment<4>(4 * axis) << x.rigid.p(axis), x.rigid.v(axis), acc(axis), jerk(axis);
  }
  f.z(12) = x.rigid.eulers(2);
  f.z(13) = w(2);
  return f;
}

}  // namespace vtolmpc
