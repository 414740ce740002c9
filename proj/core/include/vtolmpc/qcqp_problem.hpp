#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

namespace vtolmpc {

/// Constraint of the form  0.5 u'Pu + q'u + s >= 0.
struct QuadraticConstraint {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double constant = 0.0;

  double value(const Eigen::VectorXd& u) const { return 0.5 * u.dot(hessian * u) + gradient.dot(u) + constant; }
  Eigen::VectorXd gradient_at(const Eigen::VectorXd& u) const { return hessian * u + gradient; }
  /// True when the row does not depend on the decision vector at all.
  bool is_constant() const { return hessian.isZero(0.0) && gradient.isZero(0.0); }
};

/// min 0.5 u'Hu + g'u + c  s.t.  A u >= b,  quadratic rows >= 0.
struct QcqpProblem {
  Eigen::MatrixXd cost_hessian;
  Eigen::VectorXd cost_gradient;
  double cost_constant = 0.0;

  Eigen::MatrixXd linear_rows;
  Eigen::VectorXd linear_lower;

  std::vector<QuadraticConstraint> quadratic;

  int dim() const { return static_cast<int>(cost_gradient.size()); }
  int num_linear() const { return static_cast<int>(linear_lower.size()); }
  int num_quadratic() const { return static_cast<int>(quadratic.size()); }

  double objective(const Eigen::VectorXd& u) const {
    return 0.5 * u.dot(cost_hessian * u) + cost_gradient.dot(u) + cost_constant;
  }

  /// Largest violation over every row, zero when feasible.
  double max_violation(const Eigen::VectorXd& u) const {
    double worst = 0.0;
    if (num_linear() > 0) {
      worst = std::max(worst, (linear_lower - linear_rows * u).maxCoeff());
    }
    for (const auto& q : quadratic) worst = std::max(worst, -q.value(u));
    return worst;
  }
};

}  // namespace vtolmpc
