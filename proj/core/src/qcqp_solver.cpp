#include "vtolmpc/qcqp_solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vtolmpc {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::MaxIter:
      return "max_iter";
    case SolveStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (!(max_iter > 0 && kkt_tol > 0 && con_tol > 0 && merit_penalty > 0 && hessian_reg > 0)) {
    throw std::invalid_argument("solver settings must be positive");
  }
  if (!(line_search_shrink > 0 && line_search_shrink < 1)) {
    throw std::invalid_argument("line search shrink factor must lie in (0, 1)");
  }
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Largest step in (0, 1] keeping v + a dv strictly positive.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

}  // namespace

QpResult qp_solve(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient, const Eigen::MatrixXd& rows,
                  const Eigen::VectorXd& lower, const QpSettings& settings) {
  const Eigen::Index m = lower.size();
  QpResult res;

  if (m == 0) {
    res.x = -hessian.ldlt().solve(gradient);
    res.multipliers.resize(0);
    res.dual_residual = inf_norm(hessian * res.x + gradient);
    res.status = res.x.allFinite() ? SolveStatus::Optimal : SolveStatus::Infeasible;
    res.iterations = 1;
    return res;
  }

  // Start from the unconstrained minimizer, then push slacks and duals
  // into the interior.
  Eigen::VectorXd x = hessian.ldlt().solve(-gradient);
  if (!x.allFinite()) x.setZero();
  Eigen::VectorXd s = (rows * x - lower).cwiseMax(1.0);
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(m);
  // best iterate seen so far, by its worst scaled residual
  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x, best_lam = lam;

  for (int it = 0; it < settings.max_iter; ++it) {
    const Eigen::VectorXd hx = hessian * x, ax = rows * x, atl = rows.transpose() * lam;
    const Eigen::VectorXd r_d = hx + gradient - atl;
    const Eigen::VectorXd r_p = ax - s - lower;
    const double mu = s.dot(lam) / static_cast<double>(m);
    // residuals relative to the size of the terms they are made of
    const double scale_d = 1.0 + std::max({inf_norm(hx), inf_norm(gradient), inf_norm(atl)});
    const double scale_p = 1.0 + std::max({inf_norm(ax), inf_norm(s), inf_norm(lower)});
    res.iterations = it;
    res.dual_residual = inf_norm(r_d);
    res.primal_residual = inf_norm(r_p);
    res.complementarity = (s.array() * lam.array()).maxCoeff();

    const double score =
        std::max({res.dual_residual / scale_d, res.primal_residual / scale_p, res.complementarity});
    if (score <= settings.tol) {
      res.status = SolveStatus::Optimal;
      break;
    }
    if (score < best_score) {
      best_score = score;
      best_x = x;
      best_lam = lam;
    }
    // residuals stuck at rounding level: further centring only loses accuracy
    if (mu < 1e-6 * settings.tol * settings.tol) break;

    // Farkas-type certificate: duals diverge while A'lam stays bounded and b'lam > 0.
    const double lam_norm = lam.sum();
    if (lam_norm > 1e10 && lower.dot(lam) > 0 && inf_norm(rows.transpose() * lam) < 1e-6 * lam_norm &&
        res.primal_residual > settings.tol * scale_p) {
      res.status = SolveStatus::Infeasible;
      break;
    }

    const Eigen::VectorXd d = lam.cwiseQuotient(s);
    Eigen::MatrixXd kkt = hessian + rows.transpose() * d.asDiagonal() * rows;
    kkt.diagonal().array() += 1e-14 * (1.0 + kkt.diagonal().cwiseAbs().maxCoeff());
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(kkt);
    if (ldlt.info() != Eigen::Success) break;

    auto direction = [&](const Eigen::VectorXd& r_c, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dl) {
      const Eigen::VectorXd rhs = -r_d + rows.transpose() * (r_c.cwiseQuotient(s) - d.cwiseProduct(r_p));
      dx = ldlt.solve(rhs);
      ds = rows * dx + r_p;
      dl = (r_c - lam.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dx, ds, dl;
    const Eigen::VectorXd r_aff = -(s.cwiseProduct(lam));
    direction(r_aff, dx, ds, dl);
    const double a_aff = std::min(max_step(s, ds), max_step(lam, dl));
    const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3);

    const Eigen::VectorXd r_cc = r_aff - ds.cwiseProduct(dl) + Eigen::VectorXd::Constant(m, sigma * mu);
    direction(r_cc, dx, ds, dl);
    const double a_p = std::min(1.0, 0.995 * max_step(s, ds));
    const double a_d = std::min(1.0, 0.995 * max_step(lam, dl));
    // A common step keeps the Lagrangian residual consistent for the
    // quadratic term.
    const double a = std::min(a_p, a_d);
    x += a * dx;
    s += a * ds;
    lam += a * dl;
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
    if (!x.allFinite() || !lam.allFinite()) break;
    res.iterations = it + 1;
  }

  if (res.status != SolveStatus::Optimal && res.status != SolveStatus::Infeasible && std::isfinite(best_score)) {
    x = best_x;
    lam = best_lam;
    res.primal_residual = inf_norm((lower - rows * x).cwiseMax(0.0));
    res.dual_residual = inf_norm(hessian * x + gradient - rows.transpose() * lam);
    if (res.primal_residual > 1e-6 * (1.0 + inf_norm(lower))) res.status = SolveStatus::Infeasible;
  }
  res.x = x;
  res.multipliers = lam;
  return res;
}

KktReport kkt_report(const QcqpProblem& problem, const Eigen::VectorXd& u, const Eigen::VectorXd& multipliers) {
  const int m_lin = problem.num_linear();
  KktReport rep;
  Eigen::VectorXd grad = problem.cost_hessian * u + problem.cost_gradient;
  if (m_lin > 0) {
    const Eigen::VectorXd lam = multipliers.head(m_lin);
    const Eigen::VectorXd c = problem.linear_rows * u - problem.linear_lower;
    grad -= problem.linear_rows.transpose() * lam;
    rep.violation = std::max(0.0, -c.minCoeff());
    rep.complementarity = lam.cwiseProduct(c).cwiseAbs().maxCoeff();
    rep.dual_infeasibility = std::max(0.0, -lam.minCoeff());
  }
  for (int j = 0; j < problem.num_quadratic(); ++j) {
    const auto& q = problem.quadratic[static_cast<std::size_t>(j)];
    const double lam = multipliers(m_lin + j);
    const double c = q.value(u);
    grad -= lam * q.gradient_at(u);
    rep.violation = std::max(rep.violation, -c);
    rep.complementarity = std::max(rep.complementarity, std::abs(lam * c));
    rep.dual_infeasibility = std::max(rep.dual_infeasibility, -lam);
  }
  rep.stationarity = inf_norm(grad);
  return rep;
}

SqpSolver::SqpSolver(SolverSettings settings) : settings_(settings) { settings_.validate(); }

SolveResult SqpSolver::solve(const QcqpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start) const {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = problem.dim();
  const int m_lin = problem.num_linear();
  const int m_quad = problem.num_quadratic();

  SolveResult out;
  Eigen::VectorXd u = warm_start.value_or(Eigen::VectorXd::Zero(n));
  if (u.size() != n) throw std::invalid_argument("warm start has the wrong dimension");
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(m_lin + m_quad);
  double penalty = settings_.merit_penalty;

  auto total_violation = [&](const Eigen::VectorXd& x) {
    double sum = 0.0;
    if (m_lin > 0) sum += (problem.linear_lower - problem.linear_rows * x).cwiseMax(0.0).sum();
    for (const auto& q : problem.quadratic) sum += std::max(0.0, -q.value(x));
    return sum;
  };
  auto merit = [&](const Eigen::VectorXd& x, double rho) { return problem.objective(x) + rho * total_violation(x); };

  // stationarity and complementarity are judged relative to the cost gradient
  auto kkt_scale = [&](const Eigen::VectorXd& x) {
    return 1.0 + inf_norm(problem.cost_hessian * x + problem.cost_gradient);
  };

  auto finish = [&](SolveStatus status, int iterations) {
    const KktReport rep = kkt_report(problem, u, lam);
    out.status = status;
    out.solution = u;
    out.objective = problem.objective(u);
    out.kkt_residual = rep.residual() / kkt_scale(u);
    out.constraint_violation = rep.violation;
    out.iterations = iterations;
    out.multipliers = lam;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
  };

  Eigen::MatrixXd sub_rows(m_lin + m_quad, n);
  Eigen::VectorXd sub_lower(m_lin + m_quad);
  if (m_lin > 0) sub_rows.topRows(m_lin) = problem.linear_rows;

  for (int it = 0;; ++it) {
    const KktReport rep = kkt_report(problem, u, lam);
    if (rep.violation <= settings_.con_tol && rep.residual() <= settings_.kkt_tol * kkt_scale(u)) {
      return finish(SolveStatus::Optimal, it);
    }
    if (it >= settings_.max_iter) return finish(SolveStatus::MaxIter, it);

    // Lagrangian Hessian, pushed to positive definite when the reverse-convex
    // rows make it indefinite.
    Eigen::MatrixXd w = problem.cost_hessian;
    for (int j = 0; j < m_quad; ++j) w -= lam(m_lin + j) * problem.quadratic[static_cast<std::size_t>(j)].hessian;
    w = 0.5 * (w + w.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
    if (eig.eigenvalues().minCoeff() < settings_.hessian_reg) {
      const Eigen::VectorXd ev = eig.eigenvalues().cwiseAbs().cwiseMax(settings_.hessian_reg);
      w = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    }

    const Eigen::VectorXd grad = problem.cost_hessian * u + problem.cost_gradient;
    if (m_lin > 0) sub_lower.head(m_lin) = problem.linear_lower - problem.linear_rows * u;
    for (int j = 0; j < m_quad; ++j) {
      const auto& q = problem.quadratic[static_cast<std::size_t>(j)];
      sub_rows.row(m_lin + j) = q.gradient_at(u).transpose();
      sub_lower(m_lin + j) = -q.value(u);
    }

    const QpResult qp = qp_solve(w, grad, sub_rows, sub_lower);
    if (qp.status == SolveStatus::Infeasible) return finish(SolveStatus::Infeasible, it + 1);
    const Eigen::VectorXd& step = qp.x;

    if (qp.multipliers.size() > 0) penalty = std::max(penalty, 2.0 * qp.multipliers.cwiseAbs().maxCoeff() + 1.0);
    const double phi0 = merit(u, penalty);
    const double slope = grad.dot(step) - penalty * total_violation(u);
    const double slack = 1e-12 * std::max(1.0, std::abs(phi0));

    double alpha = 1.0;
    double phi = merit(u + step, penalty);
    while (phi > phi0 + 1e-4 * alpha * std::min(slope, 0.0) + slack && alpha > 1e-10) {
      alpha *= settings_.line_search_shrink;
      phi = merit(u + alpha * step, penalty);
    }
    if (phi > phi0 + slack) {
      // No acceptable decrease along the QP direction.
      return finish(SolveStatus::MaxIter, it + 1);
    }
    u += alpha * step;
    lam = qp.multipliers;
    out.merit_history.push_back({phi0, phi, alpha});
  }
}

}  // namespace vtolmpc
