#include "vtolmpc/vehicle_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace vtolmpc {

void BodyParams::validate() const {
  if (!(m > 0 && d > 0 && ix > 0 && iy > 0 && iz > 0 && g > 0)) {
    throw std::invalid_argument("body parameters must all be strictly positive");
  }
}

Vector14d ExtendedState::to_vector() const {
  Vector14d x;
  x << rigid.p, rigid.eulers, rigid.v, thrust, thrust_rate, rigid.euler_rates;
  return x;
}

ExtendedState ExtendedState::from_vector(const Vector14d& x) {
  ExtendedState s;
  s.rigid.p = x.segment<3>(0);
  s.rigid.eulers = x.segment<3>(3);
  s.rigid.v = x.segment<3>(6);
  s.thrust = x(9);
  s.thrust_rate = x(10);
  s.rigid.euler_rates = x.segment<3>(11);
  return s;
}

ExtendedState ExtendedState::hover(const BodyParams& params, const Eigen::Vector3d& p, double yaw) {
  ExtendedState s;
  s.rigid.p = p;
  s.rigid.eulers.z() = yaw;
  s.thrust = params.m * params.g;
  return s;
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& eulers) {
  const double cf = std::cos(eulers(0)), sf = std::sin(eulers(0));
  const double ct = std::cos(eulers(1)), st = std::sin(eulers(1));
  const double cp = std::cos(eulers(2)), sp = std::sin(eulers(2));
  Eigen::Matrix3d r;
  r << cp * ct, cp * sf * st - cf * sp, sf * sp + cf * cp * st,  //
      ct * sp, cf * cp + sf * sp * st, cf * sp * st - cp * sf,   //
      -st, ct * sf, cf * ct;
  return r;
}

Eigen::Vector3d thrust_axis(const Eigen::Vector3d& eulers) {
  const double cf = std::cos(eulers(0)), sf = std::sin(eulers(0));
  const double ct = std::cos(eulers(1)), st = std::sin(eulers(1));
  const double cp = std::cos(eulers(2)), sp = std::sin(eulers(2));
  return {sf * sp + cf * cp * st, cf * sp * st - cp * sf, cf * ct};
}

ExtendedState derivatives(const ExtendedState& x, const ExtendedInput& u, const BodyParams& params) {
  const double theta = x.rigid.eulers(1);
  if (!(std::abs(theta) < std::numbers::pi / 2)) {
    throw DomainError("pitch outside (-pi/2, pi/2): " + std::to_string(theta));
  }
  const Eigen::Vector3d& w = x.rigid.euler_rates;

  ExtendedState dx;
  dx.rigid.p = x.rigid.v;
  dx.rigid.eulers = w;
  dx.rigid.v = (x.thrust / params.m) * thrust_axis(x.rigid.eulers) - Eigen::Vector3d(0, 0, params.g);
  dx.rigid.euler_rates << (params.iy - params.iz) / params.ix * w(1) * w(2) + params.d / params.ix * u.u2,
      (params.iz - params.ix) / params.iy * w(0) * w(2) + params.d / params.iy * u.u3,
      (params.ix - params.iy) / params.iz * w(0) * w(1) + params.d / params.iz * u.u4;
  dx.thrust = x.thrust_rate;
  dx.thrust_rate = u.u1;
  return dx;
}

ExtendedState rk4_step(const ExtendedState& x, const ExtendedInput& u, double dt, const BodyParams& params) {
  const auto field = [&](double, const Vector14d& s) {
    return derivatives(ExtendedState::from_vector(s), u, params).to_vector();
  };
  return ExtendedState::from_vector(rk4(field, x.to_vector(), 0.0, dt));
}

}  // namespace vtolmpc
