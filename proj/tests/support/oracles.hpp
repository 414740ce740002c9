#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "vtolmpc/dfl.hpp"
#include "vtolmpc/linear_mpc.hpp"
#include "vtolmpc/vehicle_model.hpp"

namespace vtolmpc::oracle {

struct StateRanges {
  double tilt = 1.0;         // |phi|, |theta| bound (rad)
  double speed = 2.0;        // per-axis velocity bound (m/s)
  double rate = 1.0;         // per-axis Euler-rate bound (rad/s)
  double thrust_lo = 2.0;    // N
  double thrust_hi = 15.0;   // N
  double thrust_rate = 5.0;  // N/s
};

inline ExtendedState random_state(std::mt19937_64& rng, const StateRanges& r = {}) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> thrust(r.thrust_lo, r.thrust_hi);
  ExtendedState x;
  x.rigid.p = Eigen::Vector3d(3 * unit(rng), 3 * unit(rng), 3 * unit(rng));
  x.rigid.eulers = Eigen::Vector3d(r.tilt * unit(rng), r.tilt * unit(rng), 3.0 * unit(rng));
  x.rigid.v = r.speed * Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
  x.rigid.euler_rates = r.rate * Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
  x.thrust = thrust(rng);
  x.thrust_rate = r.thrust_rate * unit(rng);
  return x;
}

inline ExtendedInput random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  return {5 * unit(rng), 2 * unit(rng), 2 * unit(rng), 2 * unit(rng)};
}

// Samples (x, y, z, psi) at t0 + i*h for i = -2..2 by integrating the plant
// under a fixed input with fine RK4 sub-steps. Position starts at zero so the
// stencil differences are not swamped by rounding of large coordinates.
inline std::vector<Eigen::Vector4d> output_samples(ExtendedState x, const ExtendedInput& u, const BodyParams& params,
                                                   double h, int substeps) {
  x.rigid.p.setZero();
  const auto field = [&](double, const Vector14d& s) {
    return derivatives(ExtendedState::from_vector(s), u, params).to_vector();
  };
  const auto output = [](const Vector14d& s) { return Eigen::Vector4d(s(0), s(1), s(2), s(5)); };
  std::vector<Eigen::Vector4d> out(5);
  out[2] = output(x.to_vector());
  for (int dir : {-1, 1}) {
    Vector14d s = x.to_vector();
    const double dt = dir * h / substeps;
    for (int i = 1; i <= 2; ++i) {
      for (int j = 0; j < substeps; ++j) s = rk4(field, s, 0.0, dt);
      out[static_cast<std::size_t>(2 + dir * i)] = output(s);
    }
  }
  return out;
}

// (x'''', y'''', z'''', psi'') from five-point stencils, Richardson-extrapolated
// over h and h/2.
inline Eigen::Vector4d output_derivatives_fd(const ExtendedState& x, const ExtendedInput& u, const BodyParams& params,
                                             double h = 1e-2, int substeps = 50) {
  const auto estimate = [&](double step, int sub) {
    const auto f = output_samples(x, u, params, step, sub);
    const Eigen::Vector4d fourth = (f[0] - 4 * f[1] + 6 * f[2] - 4 * f[3] + f[4]) / std::pow(step, 4);
    const Eigen::Vector4d second = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * step * step);
    return Eigen::Vector4d(fourth(0), fourth(1), fourth(2), second(3));
  };
  const Eigen::Vector4d coarse = estimate(h, substeps);
  const Eigen::Vector4d fine = estimate(0.5 * h, substeps);
  Eigen::Vector4d out = (4.0 * fine - coarse) / 3.0;
  // The yaw stencil is already fourth order; extrapolating it only adds rounding.
  out(3) = fine(3);
  return out;
}

// Elementwise relative error with an absolute floor.
inline double relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::abs(got(i) - want(i)) / std::max(std::abs(want(i)), floor));
  }
  return worst;
}

struct ExactnessTrial {
  double max_discrepancy = 0.0;  // worst absolute flat-state component error
  bool aborted = false;
};

// Integrates the plant under the linearizing law with a smooth v(t) and
// compares flat_map along the way with the chain of integrators driven by
// the same v(t).
inline ExactnessTrial dfl_exactness_trial(std::mt19937_64& rng, const BodyParams& params, double duration = 1.0,
                                          double dt = 1e-3) {
  StateRanges ranges;
  ranges.tilt = 0.4;
  ranges.rate = 0.5;
  ranges.thrust_lo = 5.0;
  ranges.thrust_hi = 9.0;
  ranges.thrust_rate = 1.0;
  const ExtendedState x0 = random_state(rng, ranges);

  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  Eigen::Vector4d a, w, ph;
  for (int i = 0; i < 4; ++i) {
    a(i) = amp(rng);
    w(i) = freq(rng);
    ph(i) = phase(rng);
  }
  const auto v_of = [&](double t) {
    Eigen::Vector4d v;
    for (int i = 0; i < 4; ++i) v(i) = a(i) * std::sin(w(i) * t + ph(i));
    return VirtualInput::from_vector(v);
  };

  const LinearModel lin = build_continuous();
  const auto plant = [&](double t, const Vector14d& s) {
    const ExtendedState xs = ExtendedState::from_vector(s);
    return derivatives(xs, dfl_control(xs, v_of(t), params), params).to_vector();
  };
  const auto chain = [&](double t, const Vector14d& z) -> Vector14d {
    return lin.a_z * z + lin.b_z * v_of(t).to_vector();
  };

  ExactnessTrial out;
  Vector14d x = x0.to_vector();
  Vector14d z = flat_map(x0, params).z;
  const auto steps = static_cast<int>(std::llround(duration / dt));
  try {
    for (int k = 0; k < steps; ++k) {
      const double t = k * dt;
      x = rk4(plant, x, t, dt);
      z = rk4(chain, z, t, dt);
      const Vector14d mapped = flat_map(ExtendedState::from_vector(x), params).z;
      out.max_discrepancy = std::max(out.max_discrepancy, (mapped - z).cwiseAbs().maxCoeff());
    }
  } catch (const DomainError&) {
    out.aborted = true;
  }
  return out;
}

}  // namespace vtolmpc::oracle
