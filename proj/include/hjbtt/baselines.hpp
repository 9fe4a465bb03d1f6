#pragma once

// Comparison controllers: LQR from the linearization at the origin
// (Newton-Kleinman on the algebraic Riccati equation) and finite-horizon
// open-loop control by adjoint gradient descent.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/dynamics.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/policy.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt {

struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd G;
};

/// Analytic drift Jacobian at the origin, cross-checked against central
/// differences with step 1e-6.
inline Linearization linearize(const ControlSystem& sys) {
  const auto d = static_cast<Eigen::Index>(sys.d);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  Linearization lin{sys.drift_jacobian(zero), sys.G};
  const double h = 1e-6;
  Eigen::VectorXd e = zero;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    e(j) = h;
    const Eigen::VectorXd col = (sys.drift(e) - sys.drift(Eigen::VectorXd(-e))) / (2.0 * h);
    e(j) = 0.0;
    worst = std::max(worst, (col - lin.A.col(j)).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-6 * std::max(1.0, lin.A.cwiseAbs().maxCoeff()))
    throw ConsistencyError("linearize: analytic Jacobian disagrees with finite differences by " +
                           std::to_string(worst));
  return lin;
}

/// All eigenvalues have real part below -1e-9 (1 + ||A||_F); a zero
/// eigenvalue perturbed by roundoff does not count as stable.
inline bool is_hurwitz(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return true;
  const double margin = 1e-9 * (1.0 + a.norm());
  return Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().real().maxCoeff() < -margin;
}

/// Solves A^T X + X A + Q = 0 by LU on the Kronecker form (d <= 64).
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  const Eigen::Index n = a.rows();
  detail::require_shape(a.cols() == n && q.rows() == n && q.cols() == n,
                        "solve_lyapunov: A and Q must be square of equal size");
  detail::require_shape(n <= 64, "solve_lyapunov: dense Kronecker solve limited to d <= 64");
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd at = a.transpose();
  // column-major vec: vec(A^T X) = (I kron A^T) vec X, vec(X A) = (A^T kron I) vec X
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      k.block(j * n, i * n, n, n) += at(j, i) * id;
      if (i == j) k.block(j * n, j * n, n, n) += at;
    }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
  const Eigen::VectorXd x = lu.solve(-Eigen::Map<const Eigen::VectorXd>(q.data(), n * n));
  if (!x.allFinite()) throw ConditioningError("solve_lyapunov: singular Kronecker system");
  const Eigen::MatrixXd xm = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
  return 0.5 * (xm + xm.transpose());
}

inline Eigen::MatrixXd care_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g, const Eigen::MatrixXd& q,
                                     const Eigen::MatrixXd& r, const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd gp = g.transpose() * p;
  return a.transpose() * p + p * a - gp.transpose() * r.llt().solve(gp) + q;
}

struct RiccatiSolution {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;  // R^{-1} G^T P
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  std::vector<Eigen::MatrixXd> iterates;  // Kleinman P_1, P_2, ...
};

/// Newton-Kleinman iteration for A^T P + P A - P G R^{-1} G^T P + Q = 0.
/// The initial gain is 0 when A is Hurwitz, otherwise s R^{-1} G^T with s
/// doubled until A - G K_0 is Hurwitz. Stops at residual <= 1e-10 ||Q||_F or
/// after 50 iterations.
inline RiccatiSolution solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g, const Eigen::MatrixXd& q,
                                  const Eigen::MatrixXd& r) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = g.cols();
  detail::require_shape(a.cols() == n && g.rows() == n && q.rows() == n && q.cols() == n,
                        "solve_care: inconsistent A, G, Q shapes");
  detail::require_shape(r.rows() == m && r.cols() == m, "solve_care: R must be m x m");
  const Eigen::LLT<Eigen::MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) throw ConfigError("solve_care: R must be positive definite");
  const Eigen::MatrixXd rinv_gt = r_llt.solve(g.transpose());

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, n);
  if (!is_hurwitz(a)) {
    bool found = false;
    for (double s = 1e-3 * std::max(1.0, a.norm()); s < 1e12; s *= 2.0) {
      if (is_hurwitz(a - g * (s * rinv_gt))) {
        k = s * rinv_gt;
        found = true;
        break;
      }
    }
    if (!found) {
      std::ostringstream msg;
      msg << "solve_care: no stabilizing initial gain found; spectrum of A:\n"
          << Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().transpose();
      throw NumericalError(msg.str());
    }
  }

  const double qn = q.norm();
  const double target = 1e-10 * qn;
  RiccatiSolution sol;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t it = 0; it < 50; ++it) {
    const Eigen::MatrixXd ak = a - g * k;
    p = solve_lyapunov(ak, q + k.transpose() * r * k);
    sol.iterates.push_back(p);
    k = rinv_gt * p;
    sol.iterations = it + 1;
    sol.residual_norm = care_residual(a, g, q, r, p).norm();
    if (sol.residual_norm <= target) break;
  }
  if (sol.residual_norm > 1e-8 * std::max(qn, 1e-300) && sol.residual_norm > 0.0)
    throw NumericalError("solve_care: Newton-Kleinman did not converge, residual " +
                         std::to_string(sol.residual_norm));
  sol.P = p;
  sol.K = k;
  return sol;
}

/// sum_ij P_ij x_i x_j as a TT in `basis`, accumulated from rank-1 terms
/// (x_i x_j written through the basis coefficients of 1, x and x^2) with
/// rounding at `round_tol` after every addition.
inline TTTensor lqr_value_as_tt(const Eigen::MatrixXd& p, const OrthoBasis1D& basis, double round_tol) {
  const auto d = static_cast<std::size_t>(p.rows());
  detail::require_shape(p.cols() == p.rows() && d >= 1, "lqr_value_as_tt: P must be square");
  if (basis.max_degree() < 2) throw ShapeError("lqr_value_as_tt: basis degree must be at least 2");
  const auto n = static_cast<std::size_t>(basis.size());
  const std::vector<std::size_t> dims(d, n);
  const std::vector<std::size_t> caps(d > 0 ? d - 1 : 0, n * n * d);
  const Eigen::VectorXd w0 = basis.monomial_in_basis(0);
  const Eigen::VectorXd w1 = basis.monomial_in_basis(1);
  const Eigen::VectorXd w2 = basis.monomial_in_basis(2);

  TTTensor acc = TTTensor::zero(dims);
  bool empty = true;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const double coef = i == j ? p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))
                                 : p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                       p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (coef == 0.0) continue;
      std::vector<RowMatrix> cores;
      for (std::size_t k = 0; k < d; ++k) {
        const Eigen::VectorXd& w = (k == i && i == j) ? w2 : (k == i || k == j) ? w1 : w0;
        cores.emplace_back(RowMatrix(w));
      }
      cores[0] *= coef;
      TTTensor term(std::move(cores), dims);
      if (empty) {
        acc = std::move(term);
        empty = false;
      } else {
        acc = d > 1 ? tt_round(tt_add(acc, term), caps, round_tol) : tt_add(acc, term);
      }
    }
  if (d > 1) acc = tt_round(std::move(acc), caps, round_tol);
  return acc;
}

// ---------------------------------------------------------------------------
// Open-loop control.

enum class StepRule { Armijo, Fixed };

struct OpenLoopOptions {
  std::size_t max_iters = 200;
  StepRule step_rule = StepRule::Armijo;
  double initial_step = 1.0;   // function-space step length
  double fixed_step = 0.1;
  double armijo_c = 1e-4;
  double grad_tol = 1e-6;      // relative to the initial gradient norm
  std::size_t stall_limit = 10;
  Eigen::MatrixXd initial_controls;  // m x K; empty starts from u = 0
};

struct OpenLoopSolution {
  std::vector<double> times;  // control grid t_0..t_{K-1}
  Eigen::MatrixXd controls;   // m x K, piecewise constant
  double cost = 0.0;
  std::vector<double> grad_norms;
  std::vector<double> costs;
  std::size_t iterations = 0;
  bool converged = false;
  std::string note;
};

/// Discrete finite-horizon cost for piecewise-constant controls (m x K):
///   sum_k h u_k^T B u_k + trapezoidal sum of c(y_k), y_{k+1} = RK4(y_k, u_k).
/// Returns +inf if the state leaves the finite range.
inline double open_loop_cost(const ControlSystem& sys, const Eigen::VectorXd& x0, const Eigen::MatrixXd& u,
                             double h, std::vector<Eigen::VectorXd>* states = nullptr) {
  const Eigen::Index steps = u.cols();
  Eigen::VectorXd y = x0;
  if (states) {
    states->clear();
    states->push_back(y);
  }
  double cost = 0.5 * h * sys.state_cost(y);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::VectorXd gu = sys.G * u.col(k);
    y = rk4_step([&](const Eigen::VectorXd& z) { return Eigen::VectorXd(sys.drift(z) + gu); }, y, h);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e6) return std::numeric_limits<double>::infinity();
    if (states) states->push_back(y);
    const Eigen::VectorXd uk = u.col(k);
    cost += h * uk.dot(sys.B * uk) + (k + 1 == steps ? 0.5 : 1.0) * h * sys.state_cost(y);
  }
  return cost;
}

/// Cost and its exact gradient with respect to u (m x K) by reverse-mode
/// differentiation of the RK4 recursion.
inline double open_loop_gradient(const ControlSystem& sys, const Eigen::VectorXd& x0, const Eigen::MatrixXd& u,
                                 double h, Eigen::MatrixXd& grad) {
  std::vector<Eigen::VectorXd> ys;
  const double cost = open_loop_cost(sys, x0, u, h, &ys);
  grad.setZero(u.rows(), u.cols());
  if (!std::isfinite(cost)) return cost;
  const Eigen::Index steps = u.cols();
  const Eigen::MatrixXd gt = sys.G.transpose();
  const auto dcost = [&](const Eigen::VectorXd& y) { return Eigen::VectorXd(2.0 * sys.cost_weight * y); };
  Eigen::VectorXd lam = 0.5 * h * dcost(ys[static_cast<std::size_t>(steps)]);
  for (Eigen::Index k = steps - 1; k >= 0; --k) {
    const Eigen::VectorXd& y = ys[static_cast<std::size_t>(k)];
    const Eigen::VectorXd uk = u.col(k);
    const Eigen::VectorXd gu = sys.G * uk;
    const auto rhs = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(sys.drift(z) + gu); };
    const Eigen::VectorXd k1 = rhs(y);
    const Eigen::VectorXd z2 = y + 0.5 * h * k1;
    const Eigen::VectorXd k2 = rhs(z2);
    const Eigen::VectorXd z3 = y + 0.5 * h * k2;
    const Eigen::VectorXd k3 = rhs(z3);
    const Eigen::VectorXd z4 = y + h * k3;

    Eigen::VectorXd ybar = lam;
    Eigen::VectorXd k1bar = (h / 6.0) * lam;
    Eigen::VectorXd k2bar = (h / 3.0) * lam;
    Eigen::VectorXd k3bar = (h / 3.0) * lam;
    const Eigen::VectorXd k4bar = (h / 6.0) * lam;
    Eigen::VectorXd ubar = Eigen::VectorXd::Zero(u.rows());

    const Eigen::VectorXd z4bar = sys.drift_jacobian(z4).transpose() * k4bar;
    ubar += gt * k4bar;
    ybar += z4bar;
    k3bar += h * z4bar;
    const Eigen::VectorXd z3bar = sys.drift_jacobian(z3).transpose() * k3bar;
    ubar += gt * k3bar;
    ybar += z3bar;
    k2bar += 0.5 * h * z3bar;
    const Eigen::VectorXd z2bar = sys.drift_jacobian(z2).transpose() * k2bar;
    ubar += gt * k2bar;
    ybar += z2bar;
    k1bar += 0.5 * h * z2bar;
    ybar += sys.drift_jacobian(y).transpose() * k1bar;
    ubar += gt * k1bar;

    grad.col(k) = ubar + 2.0 * h * (sys.B * uk);
    lam = ybar + (k == 0 ? 0.5 : 1.0) * h * dcost(y);
  }
  return cost;
}

/// Sample-and-hold controls of a feedback law on the open-loop grid:
/// u_k = alpha(y_k) along its own RK4 trajectory. The result has the same
/// open_loop_cost as the sampled feedback, so it makes a finite warm start
/// whenever the feedback stabilizes.
inline Eigen::MatrixXd feedback_controls(const ControlSystem& sys, const Policy& policy, const Eigen::VectorXd& x0,
                                         double h, std::size_t n_steps) {
  detail::require_shape(policy.control_dim() == sys.m, "feedback_controls: policy control dimension mismatch");
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.m), static_cast<Eigen::Index>(n_steps));
  auto ws = policy.make_workspace();
  Eigen::VectorXd y = x0;
  Eigen::VectorXd uk(static_cast<Eigen::Index>(sys.m));
  for (std::size_t k = 0; k < n_steps; ++k) {
    policy.eval(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                std::span<double>(uk.data(), static_cast<std::size_t>(uk.size())), ws);
    u.col(static_cast<Eigen::Index>(k)) = uk;
    const Eigen::VectorXd gu = sys.G * uk;
    y = rk4_step([&](const Eigen::VectorXd& z) { return Eigen::VectorXd(sys.drift(z) + gu); }, y, h);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e6) break;  // remaining controls stay zero
  }
  return u;
}

/// Gradient descent on the discrete cost over [0, T] with n_steps control
/// intervals. Steps follow the function-space gradient grad / h.
inline OpenLoopSolution open_loop_gradient_descent(const ControlSystem& sys, const Eigen::VectorXd& x0, double t_end,
                                                   std::size_t n_steps, const OpenLoopOptions& opts = {}) {
  if (!(t_end > 0.0)) throw ConfigError("open_loop_gradient_descent: T must be positive");
  if (n_steps < 1) throw ConfigError("open_loop_gradient_descent: need at least one time step");
  detail::require_shape(x0.size() == static_cast<Eigen::Index>(sys.d), "open_loop_gradient_descent: x0 dimension mismatch");
  const double h = t_end / static_cast<double>(n_steps);
  OpenLoopSolution sol;
  for (std::size_t k = 0; k < n_steps; ++k) sol.times.push_back(h * static_cast<double>(k));
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.m), static_cast<Eigen::Index>(n_steps));
  if (opts.initial_controls.size() > 0) {
    detail::require_shape(opts.initial_controls.rows() == u.rows() && opts.initial_controls.cols() == u.cols(),
                          "open_loop_gradient_descent: initial controls must be m x n_steps");
    u = opts.initial_controls;
  }
  Eigen::MatrixXd grad;
  double cost = open_loop_gradient(sys, x0, u, h, grad);
  if (!std::isfinite(cost)) throw NumericalError("open_loop_gradient_descent: trajectory of the initial controls diverges");
  // inner product of the piecewise-constant function space: <f, g> = h sum f_k g_k
  const auto fnorm = [h](const Eigen::MatrixXd& g) { return std::sqrt(g.squaredNorm() / h); };
  const double g0 = fnorm(grad);
  sol.grad_norms.push_back(g0);
  sol.costs.push_back(cost);
  double step = opts.step_rule == StepRule::Armijo ? opts.initial_step : opts.fixed_step;
  std::size_t stall = 0;
  if (g0 <= 1e-14) {
    sol.converged = true;
    sol.note = "gradient vanishes at the initial control";
  }
  for (std::size_t it = 0; !sol.converged && it < opts.max_iters; ++it) {
    const Eigen::MatrixXd dir = -grad / h;
    const double slope = -grad.squaredNorm() / h;
    Eigen::MatrixXd trial;
    double trial_cost = std::numeric_limits<double>::infinity();
    bool accepted = false;
    if (opts.step_rule == StepRule::Armijo) {
      for (int bt = 0; bt < 60; ++bt) {
        trial = u + step * dir;
        trial_cost = open_loop_cost(sys, x0, trial, h);
        if (trial_cost <= cost + opts.armijo_c * step * slope) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        // line search exhausted: fall back to a fixed step
        trial = u + opts.fixed_step * dir;
        trial_cost = open_loop_cost(sys, x0, trial, h);
        step = opts.initial_step;
      }
    } else {
      trial = u + step * dir;
      trial_cost = open_loop_cost(sys, x0, trial, h);
    }
    sol.iterations = it + 1;
    if (std::isfinite(trial_cost) && trial_cost < cost) {
      stall = 0;
      u = trial;
      cost = open_loop_gradient(sys, x0, u, h, grad);
      if (accepted && opts.step_rule == StepRule::Armijo) step *= 2.0;
    } else {
      ++stall;
    }
    sol.costs.push_back(cost);
    sol.grad_norms.push_back(fnorm(grad));
    if (sol.grad_norms.back() <= opts.grad_tol * g0) {
      sol.converged = true;
      sol.note = "gradient reduced below tolerance";
    } else if (stall >= opts.stall_limit) {
      sol.note = "cost did not decrease for " + std::to_string(opts.stall_limit) + " consecutive iterations";
      break;
    }
  }
  if (!sol.converged && sol.note.empty()) sol.note = "maximum iterations reached";
  sol.controls = u;
  sol.cost = cost;
  return sol;
}

}  // namespace hjbtt
