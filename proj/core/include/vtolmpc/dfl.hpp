#pragma once

#include "vtolmpc/vehicle_model.hpp"

namespace vtolmpc {

/// Thrust below which the extended decoupling matrix is treated as singular (N).
inline constexpr double kThrustEpsilon = 1e-3;

class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Snap references for x, y, z and the yaw acceleration reference.
struct VirtualInput {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
  double v4 = 0.0;

  Eigen::Vector4d to_vector() const { return {v1, v2, v3, v4}; }
  static VirtualInput from_vector(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
};

/// Chain-of-integrators coordinates:
/// (x, x', x'', x''', y, ..., y''', z, ..., z''', psi, psi').
struct FlatState {
  Vector14d z = Vector14d::Zero();

  Eigen::Vector3d position() const { return {z(0), z(4), z(8)}; }
  double yaw() const { return z(12); }
};

/// Indices of the position/yaw entries of a flat state (z1, z5, z9, z13).
inline constexpr int kFlatOutputIndex[4] = {0, 4, 8, 12};

/// Decoupling matrix of the un-extended model (outputs differentiated twice).
/// The torque columns never reach the position rows, so the matrix is singular.
Eigen::Matrix4d static_decoupling(const RigidState& x, const BodyParams& params);

/// Drift part of (x'''', y'''', z'''', psi'') along the extended dynamics with zero input.
Eigen::Vector4d drift_terms(const ExtendedState& x, const BodyParams& params);

/// Matrix multiplying the extended input in (x'''', y'''', z'''', psi'').
Eigen::Matrix4d decoupling_matrix(const ExtendedState& x, const BodyParams& params);

Eigen::Matrix4d decoupling_inverse(const ExtendedState& x, const BodyParams& params);

/// Exactly linearizing feedback: u = Abar^-1 (v - drift).
ExtendedInput dfl_control(const ExtendedState& x, const VirtualInput& v, const BodyParams& params);

/// Maps the extended state onto the flat coordinates.
FlatState flat_map(const ExtendedState& x, const BodyParams& params);

}  // namespace vtolmpc
