#include "vtolmpc/linear_mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace vtolmpc {

LinearModel build_continuous() {
  LinearModel m;
  for (int chain = 0; chain < 3; ++chain) {
    const int base = 4 * chain;
    for (int i = 0; i < 3; ++i) m.a_z(base + i, base + i + 1) = 1.0;
    m.b_z(base + 3, chain) = 1.0;
  }
  m.a_z(12, 13) = 1.0;
  m.b_z(13, 3) = 1.0;
  for (int i = 0; i < 4; ++i) m.c_z(i, kFlatOutputIndex[i]) = 1.0;
  return m;
}

LinearModel discretize(const LinearModel& model, double delta) {
  if (!(delta >= 0.0)) throw ConfigError("sampling period must be non-negative");
  LinearModel m = model;
  m.delta = delta;
  m.a_d = Matrix14d::Identity() + delta * model.a_z;
  m.b_d = delta * model.b_z;
  return m;
}

namespace {

Eigen::MatrixXd riccati_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                                 const Eigen::MatrixXd& r, const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd bpa = b.transpose() * p * a;
  const Eigen::MatrixXd s = r + b.transpose() * p * b;
  return a.transpose() * p * a - p + q - bpa.transpose() * s.ldlt().solve(bpa);
}

}  // namespace

// Structure-preserving doubling: each sweep doubles the horizon of the
// Riccati recursion, so convergence is quadratic.
LqrSolution lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                     const Eigen::MatrixXd& r, int max_iterations) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd ak = a;
  Eigen::MatrixXd gk = b * r.ldlt().solve(b.transpose());
  Eigen::MatrixXd hk = q;

  LqrSolution sol;
  bool converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(eye + gk * hk);
    const Eigen::MatrixXd w_a = lu.solve(ak);
    const Eigen::MatrixXd w_g = lu.solve(gk);
    const Eigen::MatrixXd h_next = hk + ak.transpose() * hk * w_a;
    gk = gk + ak * w_g * ak.transpose();
    ak = ak * w_a;
    const double change = (h_next - hk).norm();
    hk = 0.5 * (h_next + h_next.transpose());
    sol.iterations = it + 1;
    if (!hk.allFinite()) break;
    if (change <= 1e-14 * std::max(1.0, hk.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw std::runtime_error("Riccati iteration did not converge");

  sol.p = hk;
  const Eigen::MatrixXd s = r + b.transpose() * sol.p * b;
  sol.k = -s.ldlt().solve(b.transpose() * sol.p * a);
  if (!sol.p.allFinite() || !sol.k.allFinite() || !(spectral_radius(a + b * sol.k) < 1.0)) {
    throw std::runtime_error("Riccati iteration did not reach a stabilizing solution");
  }
  sol.residual = riccati_residual(a, b, q, r, sol.p).norm() / std::max(1.0, sol.p.norm());
  return sol;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd terminal_weight(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& k,
                                const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd acl = a + b * k;
  if (!(spectral_radius(acl) < 1.0)) throw std::runtime_error("closed loop A + BK is not Schur stable");
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd rhs = q + k.transpose() * r * k;

  // vec(X) - (Acl' kron Acl') vec(X) = vec(rhs)
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lhs.block(i * n, j * n, n, n) -= acl(j, i) * acl.transpose();
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
  const Eigen::VectorXd vec_rhs = rhs.reshaped();
  Eigen::VectorXd x = lu.solve(vec_rhs);
  for (int refine = 0; refine < 3; ++refine) x += lu.solve(vec_rhs - lhs * x);

  Eigen::MatrixXd qbar = x.reshaped(n, n);
  return 0.5 * (qbar + qbar.transpose());
}

double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& k,
                         const Eigen::MatrixXd& q, const Eigen::MatrixXd& r, const Eigen::MatrixXd& q_terminal) {
  const Eigen::MatrixXd acl = a + b * k;
  return (q_terminal - acl.transpose() * q_terminal * acl - q - k.transpose() * r * k).norm();
}

double cbf_value(const FlatState& z, const Obstacle& obs) {
  return (z.position() - obs.center).squaredNorm() - obs.radius * obs.radius;
}

MpcConfig MpcConfig::defaults() {
  MpcConfig cfg;
  cfg.q = Matrix14d::Identity();
  for (int idx : kFlatOutputIndex) cfg.q(idx, idx) = 10.0;
  cfg.r = Eigen::Matrix4d::Identity();
  cfg.z_lo << -10, -10, -10, -std::numbers::pi;
  cfg.z_hi << 10, 10, 10, std::numbers::pi;
  cfg.v_lo.setConstant(-100.0);
  cfg.v_hi.setConstant(100.0);
  cfg.update_terminal();
  return cfg;
}

void MpcConfig::update_terminal() {
  if (!(delta > 0.0)) throw ConfigError("sampling period must be positive");
  const LinearModel model = discretize(build_continuous(), delta);
  const LqrSolution lqr = lqr_gain(model.a_d, model.b_d, q, r);
  k = lqr.k;
  q_terminal = terminal_weight(model.a_d, model.b_d, k, q, r);
}

void MpcConfig::validate() const {
  if (horizon < 1) throw ConfigError("prediction horizon must be >= 1");
  if (check_horizon < 0) throw ConfigError("constraint-checking horizon must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(delta > 0.0)) throw ConfigError("sampling period must be positive");
  if ((z_lo.array() > z_hi.array()).any() || (v_lo.array() > v_hi.array()).any()) {
    throw ConfigError("box bounds are inverted");
  }
  if (Eigen::LLT<Eigen::Matrix4d>(r).info() != Eigen::Success) throw ConfigError("R must be positive definite");
  if (Eigen::SelfAdjointEigenSolver<Matrix14d>(q).eigenvalues().minCoeff() < -1e-12) {
    throw ConfigError("Q must be positive semidefinite");
  }
  const LinearModel model = discretize(build_continuous(), delta);
  const Matrix14d acl = model.a_d + model.b_d * k;
  if (!(spectral_radius(acl) < 1.0)) throw ConfigError("terminal gain does not stabilize the model");
  const double res = lyapunov_residual(model.a_d, model.b_d, k, q, r, q_terminal);
  if (!(res <= 1e-8 * std::max(1.0, q_terminal.norm()))) {
    throw ConfigError("terminal weight fails the Lyapunov equation (residual " + std::to_string(res) + ")");
  }
}

FlatState goal_shift(const FlatState& z, const Goal& goal) {
  FlatState out = z;
  out.z(0) -= goal.p.x();
  out.z(4) -= goal.p.y();
  out.z(8) -= goal.p.z();
  out.z(12) -= goal.yaw;
  return out;
}

FlatState goal_unshift(const FlatState& z, const Goal& goal) {
  FlatState out = z;
  out.z(0) += goal.p.x();
  out.z(4) += goal.p.y();
  out.z(8) += goal.p.z();
  out.z(12) += goal.yaw;
  return out;
}

FlatState MpcProblem::state_at(const Eigen::VectorXd& u, int k) const {
  FlatState z;
  z.z = free_response.segment<14>(14 * k) + forced_response.middleRows<14>(14 * k) * u;
  return z;
}

int MpcProblem::count(RowKind kind) const {
  return static_cast<int>(std::count(row_kinds.begin(), row_kinds.end(), kind));
}

namespace {

// Appends lo <= row*u + offset <= hi as two ">=" rows.
struct RowSink {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> lower;
  std::vector<RowKind> kinds;

  void add_box(const Eigen::RowVectorXd& row, double offset, double lo, double hi, RowKind kind) {
    rows.push_back(row);
    lower.push_back(lo - offset);
    kinds.push_back(kind);
    rows.push_back(-row);
    lower.push_back(offset - hi);
    kinds.push_back(kind);
  }
};

// H(z_k) as a quadratic form in u, given the affine position map p = a + G u.
QuadraticConstraint barrier_form(const Eigen::Vector3d& a, const Eigen::MatrixXd& g, const Obstacle& obs) {
  const Eigen::Vector3d rel = a - obs.center;
  QuadraticConstraint c;
  c.hessian = 2.0 * g.transpose() * g;
  c.gradient = 2.0 * g.transpose() * rel;
  c.constant = rel.squaredNorm() - obs.radius * obs.radius;
  return c;
}

}  // namespace

MpcProblem build_qcqp(const FlatState& z0, const MpcConfig& cfg, const std::vector<Obstacle>& obstacles) {
  cfg.validate();
  for (const auto& obs : obstacles) {
    if (!(obs.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
  }
  const int n_steps = cfg.horizon;
  const int dim = 4 * n_steps;
  const LinearModel model = discretize(build_continuous(), cfg.delta);

  MpcProblem out;
  out.horizon = n_steps;
  out.free_response.resize(14 * (n_steps + 1));
  out.forced_response = Eigen::MatrixXd::Zero(14 * (n_steps + 1), dim);
  out.free_response.head<14>() = z0.z;
  for (int k = 0; k < n_steps; ++k) {
    out.free_response.segment<14>(14 * (k + 1)) = model.a_d * out.free_response.segment<14>(14 * k);
    out.forced_response.middleRows<14>(14 * (k + 1)) = model.a_d * out.forced_response.middleRows<14>(14 * k);
    out.forced_response.block<14, 4>(14 * (k + 1), 4 * k) += model.b_d;
  }

  // Cost: sum_k z_k'Q z_k + v_k'R v_k + z_N'Qbar z_N.
  QcqpProblem& qp = out.qcqp;
  qp.cost_hessian = Eigen::MatrixXd::Zero(dim, dim);
  qp.cost_gradient = Eigen::VectorXd::Zero(dim);
  qp.cost_constant = 0.0;
  for (int k = 0; k <= n_steps; ++k) {
    const Matrix14d& w = (k == n_steps) ? cfg.q_terminal : cfg.q;
    const auto gk = out.forced_response.middleRows<14>(14 * k);
    const Vector14d fk = out.free_response.segment<14>(14 * k);
    qp.cost_hessian.noalias() += 2.0 * gk.transpose() * w * gk;
    qp.cost_gradient.noalias() += 2.0 * gk.transpose() * (w * fk);
    qp.cost_constant += fk.dot(w * fk);
  }
  for (int k = 0; k < n_steps; ++k) qp.cost_hessian.block<4, 4>(4 * k, 4 * k) += 2.0 * cfg.r;
  qp.cost_hessian = 0.5 * (qp.cost_hessian + qp.cost_hessian.transpose());

  RowSink sink;
  // Output boxes on z_1..z_{N-1}; z_0 is fixed and z_N is covered by the terminal rows.
  for (int k = 1; k < n_steps; ++k) {
    for (int j = 0; j < 4; ++j) {
      const int row = 14 * k + kFlatOutputIndex[j];
      sink.add_box(out.forced_response.row(row), out.free_response(row), cfg.z_lo(j), cfg.z_hi(j),
                   RowKind::StateBox);
    }
  }
  for (int k = 0; k < n_steps; ++k) {
    for (int j = 0; j < 4; ++j) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
      row(4 * k + j) = 1.0;
      sink.add_box(row, 0.0, cfg.v_lo(j), cfg.v_hi(j), RowKind::InputBox);
    }
  }
  // Terminal rows on K Acl^i z_N and Acl^i z_N, i = 0..Nc.
  const Matrix14d acl = model.a_d + model.b_d * cfg.k;
  const auto g_n = out.forced_response.middleRows<14>(14 * n_steps);
  const Vector14d f_n = out.free_response.segment<14>(14 * n_steps);
  Matrix14d power = Matrix14d::Identity();
  for (int i = 0; i <= cfg.check_horizon; ++i) {
    const Matrix4x14d input_map = cfg.k * power;
    const Eigen::MatrixXd input_rows = input_map * g_n;
    const Eigen::Vector4d input_offset = input_map * f_n;
    for (int j = 0; j < 4; ++j) {
      sink.add_box(input_rows.row(j), input_offset(j), cfg.v_lo(j), cfg.v_hi(j), RowKind::TerminalInput);
    }
    for (int j = 0; j < 4; ++j) {
      const Eigen::RowVectorXd sel = power.row(kFlatOutputIndex[j]);
      sink.add_box(sel * g_n, sel.dot(f_n), cfg.z_lo(j), cfg.z_hi(j), RowKind::TerminalState);
    }
    power = acl * power;
  }

  qp.linear_rows.resize(static_cast<Eigen::Index>(sink.rows.size()), dim);
  qp.linear_lower.resize(static_cast<Eigen::Index>(sink.rows.size()));
  for (std::size_t i = 0; i < sink.rows.size(); ++i) {
    qp.linear_rows.row(static_cast<Eigen::Index>(i)) = sink.rows[i];
    qp.linear_lower(static_cast<Eigen::Index>(i)) = sink.lower[i];
  }
  out.row_kinds = std::move(sink.kinds);

  // Safety rows, quadratic in u.
  auto position_map = [&](int k) {
    Eigen::Vector3d a;
    Eigen::MatrixXd g(3, dim);
    for (int axis = 0; axis < 3; ++axis) {
      const int row = 14 * k + kFlatOutputIndex[axis];
      a(axis) = out.free_response(row);
      g.row(axis) = out.forced_response.row(row);
    }
    return std::pair{a, g};
  };
  for (const auto& obs : obstacles) {
    if (cfg.mode == SafetyMode::Cbf) {
      for (int k = 0; k < n_steps; ++k) {
        const auto [a0, g0] = position_map(k);
        const auto [a1, g1] = position_map(k + 1);
        const QuadraticConstraint now = barrier_form(a0, g0, obs);
        QuadraticConstraint row = barrier_form(a1, g1, obs);
        row.hessian -= (1.0 - cfg.gamma) * now.hessian;
        row.gradient -= (1.0 - cfg.gamma) * now.gradient;
        row.constant -= (1.0 - cfg.gamma) * now.constant;
        qp.quadratic.push_back(std::move(row));
      }
    } else {
      for (int k = 1; k <= n_steps; ++k) {
        const auto [a, g] = position_map(k);
        qp.quadratic.push_back(barrier_form(a, g, obs));
      }
    }
  }
  return out;
}

double drop_fixed_rows(QcqpProblem& problem) {
  double fixed_min = std::numeric_limits<double>::infinity();
  std::erase_if(problem.quadratic, [&](const QuadraticConstraint& row) {
    if (!row.is_constant()) return false;
    fixed_min = std::min(fixed_min, row.constant);
    return true;
  });
  return fixed_min;
}

TerminalSafetyReport check_terminal_safety(const MpcConfig& cfg, const std::vector<Obstacle>& obstacles,
                                           int samples, std::uint64_t seed) {
  const LinearModel model = discretize(build_continuous(), cfg.delta);
  const Matrix14d acl = model.a_d + model.b_d * cfg.k;

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> lo, hi;
  Matrix14d power = Matrix14d::Identity();
  for (int i = 0; i <= cfg.check_horizon; ++i) {
    const Matrix4x14d input_map = cfg.k * power;
    for (int j = 0; j < 4; ++j) {
      rows.push_back(input_map.row(j));
      lo.push_back(cfg.v_lo(j));
      hi.push_back(cfg.v_hi(j));
      rows.push_back(power.row(kFlatOutputIndex[j]));
      lo.push_back(cfg.z_lo(j));
      hi.push_back(cfg.z_hi(j));
    }
    power = acl * power;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  TerminalSafetyReport report;
  report.min_margin = std::numeric_limits<double>::infinity();
  int attempts = 0;
  while (report.samples < samples && attempts < 100 * samples) {
    ++attempts;
    Vector14d dir;
    for (auto& c : dir) c = normal(rng);
    double scale = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double s = rows[i].dot(dir);
      if (s > 0) scale = std::min(scale, hi[i] / s);
      if (s < 0) scale = std::min(scale, lo[i] / s);
    }
    if (!std::isfinite(scale) || scale < 0) continue;
    FlatState z;
    z.z = scale * dir;
    bool safe = true;
    for (const auto& obs : obstacles) safe = safe && cbf_value(z, obs) >= 0.0;
    if (!safe) continue;
    FlatState next;
    next.z = acl * z.z;
    ++report.samples;
    for (const auto& obs : obstacles) {
      const double margin = cbf_value(next, obs) - (1.0 - cfg.gamma) * cbf_value(z, obs);
      report.min_margin = std::min(report.min_margin, margin);
      if (!(margin > 0.0)) {
        ++report.violations;
        break;
      }
    }
  }
  return report;
}

}  // namespace vtolmpc
