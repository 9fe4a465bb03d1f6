#pragma once

// Spatially discretized control systems y' = f(y) + G u on [-1, 1] and
// closed-loop RK4 trajectories with discounted running-cost accumulation.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hjbtt/errors.hpp"
#include "hjbtt/policy.hpp"

namespace hjbtt {

enum class ModelKind { Schlogl, Burgers, Linear };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Schlogl: return "schlogl";
    case ModelKind::Burgers: return "burgers";
    case ModelKind::Linear: return "linear";
  }
  return "unknown";
}

/// y' = linear * y + N(y) + G u with running cost
/// r(y, u) = cost_weight * |y|^2 + u^T B u, discounted by exp(-gamma t).
/// N is y^3 (Schlogl), D(y^2 / 2) + 1.5 y exp(-0.1 y) (Burgers) or 0.
struct ControlSystem {
  ModelKind kind = ModelKind::Linear;
  std::size_t d = 0;
  std::size_t m = 0;
  Eigen::MatrixXd linear;      // d x d
  Eigen::MatrixXd G;           // d x m
  Eigen::MatrixXd B;           // m x m, SPD
  double gamma = 0.0;
  double cost_weight = 1.0;
  double domain_halfwidth = 2.0;  // Omega = [-w, w]^d
  double h_spatial = 1.0;
  std::vector<double> grid;    // spatial nodes of PDE models
  double sigma = 0.0;

  /// Checks drift(0) = 0, B SPD, cost weight >= 0.
  void validate() const {
    detail::require_shape(d >= 1 && m >= 1, "ControlSystem: d and m must be >= 1");
    detail::require_shape(linear.rows() == static_cast<Eigen::Index>(d) && linear.cols() == linear.rows(),
                          "ControlSystem: linear part must be d x d");
    detail::require_shape(G.rows() == static_cast<Eigen::Index>(d) && G.cols() == static_cast<Eigen::Index>(m),
                          "ControlSystem: G must be d x m");
    detail::require_shape(B.rows() == static_cast<Eigen::Index>(m) && B.cols() == B.rows(),
                          "ControlSystem: B must be m x m");
    if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-14 * (1.0 + B.cwiseAbs().maxCoeff()) ||
        B.llt().info() != Eigen::Success)
      throw ConfigError("ControlSystem: B must be symmetric positive definite");
    if (!(cost_weight >= 0.0) || !(gamma >= 0.0))
      throw ConfigError("ControlSystem: cost weight and discount must be non-negative");
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    Eigen::VectorXd f(static_cast<Eigen::Index>(d));
    drift(zero.data(), f.data());
    if (f.cwiseAbs().maxCoeff() > 1e-14)
      throw ConfigError("ControlSystem: the origin is not a steady state of the drift");
  }

  void drift(const double* y, double* out) const {
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::Map<const Eigen::VectorXd> yv(y, n);
    Eigen::Map<Eigen::VectorXd> fv(out, n);
    fv.noalias() = linear * yv;
    switch (kind) {
      case ModelKind::Schlogl:
        for (Eigen::Index i = 0; i < n; ++i) fv(i) += y[i] * y[i] * y[i];
        break;
      case ModelKind::Burgers: {
        // central difference of y^2/2 with zero boundary values
        const double inv2h = 1.0 / (2.0 * h_spatial);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double left = i > 0 ? 0.5 * y[i - 1] * y[i - 1] : 0.0;
          const double right = i + 1 < n ? 0.5 * y[i + 1] * y[i + 1] : 0.0;
          fv(i) += (right - left) * inv2h + 1.5 * y[i] * std::exp(-0.1 * y[i]);
        }
        break;
      }
      case ModelKind::Linear: break;
    }
  }

  [[nodiscard]] Eigen::VectorXd drift(const Eigen::VectorXd& y) const {
    Eigen::VectorXd f(y.size());
    drift(y.data(), f.data());
    return f;
  }

  [[nodiscard]] Eigen::MatrixXd drift_jacobian(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd J = linear;
    const auto n = static_cast<Eigen::Index>(d);
    switch (kind) {
      case ModelKind::Schlogl:
        for (Eigen::Index i = 0; i < n; ++i) J(i, i) += 3.0 * y(i) * y(i);
        break;
      case ModelKind::Burgers: {
        const double inv2h = 1.0 / (2.0 * h_spatial);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i > 0) J(i, i - 1) -= y(i - 1) * inv2h;
          if (i + 1 < n) J(i, i + 1) += y(i + 1) * inv2h;
          J(i, i) += 1.5 * std::exp(-0.1 * y(i)) * (1.0 - 0.1 * y(i));
        }
        break;
      }
      case ModelKind::Linear: break;
    }
    return J;
  }

  [[nodiscard]] double state_cost(const double* y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += y[i] * y[i];
    return cost_weight * s;
  }
  [[nodiscard]] double state_cost(const Eigen::VectorXd& y) const { return state_cost(y.data()); }

  [[nodiscard]] double control_cost(const double* u) const {
    const Eigen::Map<const Eigen::VectorXd> uv(u, static_cast<Eigen::Index>(m));
    return uv.dot(B * uv);
  }
};

namespace detail {

/// Nodes x_i = -1 + i h, i = 1..d, with h = 2 / (d + 1).
inline std::vector<double> interior_grid(std::size_t d) {
  const double h = 2.0 / static_cast<double>(d + 1);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < d; ++i) x[i] = -1.0 + static_cast<double>(i + 1) * h;
  return x;
}

inline Eigen::MatrixXd indicator_column(const std::vector<double>& grid, double lo, double hi) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), 1);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] >= lo && grid[i] <= hi) G(static_cast<Eigen::Index>(i), 0) = 1.0;
  return G;
}

}  // namespace detail

/// Second-order Neumann Laplacian with mirrored ghost nodes; boundary rows
/// read (2 y_2 - 2 y_1) / h^2.
inline Eigen::MatrixXd neumann_laplacian(std::size_t d, double h) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double s = 1.0 / (h * h);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, i) = -2.0 * s;
    if (i > 0) A(i, i - 1) = s;
    if (i + 1 < n) A(i, i + 1) = s;
  }
  if (n >= 2) {
    A(0, 1) = 2.0 * s;
    A(n - 1, n - 2) = 2.0 * s;
  }
  return A;
}

/// Three-point Dirichlet Laplacian with zero ghost values.
inline Eigen::MatrixXd dirichlet_laplacian(std::size_t d, double h) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double s = 1.0 / (h * h);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, i) = -2.0 * s;
    if (i > 0) A(i, i - 1) = s;
    if (i + 1 < n) A(i, i + 1) = s;
  }
  return A;
}

/// y' = sigma A_N y + y^3 + mu y + chi_omega u, cost h |y|^2 + 0.1 u^2.
/// `linear_reaction` (mu) defaults to zero, which is the printed model.
inline ControlSystem build_schlogl(std::size_t d, double sigma, std::pair<double, double> omega,
                                   double domain_halfwidth, double linear_reaction = 0.0) {
  if (d < 2) throw ConfigError("build_schlogl: d must be >= 2");
  if (!(sigma > 0.0)) throw ConfigError("build_schlogl: sigma must be positive");
  ControlSystem s;
  s.kind = ModelKind::Schlogl;
  s.d = d;
  s.m = 1;
  s.sigma = sigma;
  s.h_spatial = 2.0 / static_cast<double>(d + 1);
  s.grid = detail::interior_grid(d);
  s.linear = sigma * neumann_laplacian(d, s.h_spatial) +
             linear_reaction * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                         static_cast<Eigen::Index>(d));
  s.G = detail::indicator_column(s.grid, omega.first, omega.second);
  s.B = Eigen::MatrixXd::Constant(1, 1, 0.1);
  s.cost_weight = s.h_spatial;
  s.domain_halfwidth = domain_halfwidth;
  s.validate();
  return s;
}

/// y' = sigma A_D y + D(y^2 / 2) + 1.5 y exp(-0.1 y) + chi_omega u.
inline ControlSystem build_burgers(std::size_t d, double sigma, std::pair<double, double> omega,
                                   double domain_halfwidth) {
  if (d < 2) throw ConfigError("build_burgers: d must be >= 2");
  if (!(sigma > 0.0)) throw ConfigError("build_burgers: sigma must be positive");
  ControlSystem s;
  s.kind = ModelKind::Burgers;
  s.d = d;
  s.m = 1;
  s.sigma = sigma;
  s.h_spatial = 2.0 / static_cast<double>(d + 1);
  s.grid = detail::interior_grid(d);
  s.linear = sigma * dirichlet_laplacian(d, s.h_spatial);
  s.G = detail::indicator_column(s.grid, omega.first, omega.second);
  s.B = Eigen::MatrixXd::Constant(1, 1, 0.1);
  s.cost_weight = s.h_spatial;
  s.domain_halfwidth = domain_halfwidth;
  s.validate();
  return s;
}

/// Linear-quadratic system y' = A y + G u, cost q |y|^2 + u^T B u.
inline ControlSystem build_linear(Eigen::MatrixXd A, Eigen::MatrixXd G, double q, Eigen::MatrixXd B,
                                  double domain_halfwidth, double gamma = 0.0) {
  ControlSystem s;
  s.kind = ModelKind::Linear;
  s.d = static_cast<std::size_t>(A.rows());
  s.m = static_cast<std::size_t>(G.cols());
  s.linear = std::move(A);
  s.G = std::move(G);
  s.B = std::move(B);
  s.cost_weight = q;
  s.gamma = gamma;
  s.domain_halfwidth = domain_halfwidth;
  s.validate();
  return s;
}

/// Linear heat equation sigma A_D y + chi_omega u with the PDE cost weights;
/// the linear-quadratic oracle problem.
inline ControlSystem build_linear_heat(std::size_t d, double sigma, std::pair<double, double> omega,
                                       double domain_halfwidth) {
  if (d < 2) throw ConfigError("build_linear_heat: d must be >= 2");
  const double h = 2.0 / static_cast<double>(d + 1);
  const auto grid = detail::interior_grid(d);
  ControlSystem s = build_linear(sigma * dirichlet_laplacian(d, h), detail::indicator_column(grid, omega.first, omega.second),
                                 h, Eigen::MatrixXd::Constant(1, 1, 0.1), domain_halfwidth);
  s.h_spatial = h;
  s.grid = grid;
  s.sigma = sigma;
  return s;
}

// ---------------------------------------------------------------------------
// Integration.

/// Classical RK4 step for y' = rhs(y).
template <class Rhs>
Eigen::VectorXd rk4_step(const Rhs& rhs, const Eigen::VectorXd& y, double h) {
  if (!(h > 0.0)) throw ShapeError("rk4_step: step size must be positive");
  const Eigen::VectorXd k1 = rhs(y);
  const Eigen::VectorXd k2 = rhs(Eigen::VectorXd(y + 0.5 * h * k1));
  const Eigen::VectorXd k3 = rhs(Eigen::VectorXd(y + 0.5 * h * k2));
  const Eigen::VectorXd k4 = rhs(Eigen::VectorXd(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Trajectory {
  std::vector<double> times;               // filled when states are recorded
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> controls;
  Eigen::VectorXd endpoint;
  double reward = 0.0;
  bool diverged = false;
  std::size_t steps = 0;
};

struct FlowOptions {
  double divergence_threshold = 1e6;
  bool record_states = false;
};

/// Integrates y' = f(y) + G alpha(y) from x for n_steps RK4 steps of size
/// h_time, accumulating the trapezoidal sum of exp(-gamma t_k) r(y_k, alpha(y_k)).
/// Stops early and sets `diverged` when a component exceeds the threshold in
/// magnitude or becomes non-finite.
inline Trajectory closed_loop_flow(const ControlSystem& sys, const Policy& policy,
                                   const Eigen::VectorXd& x, std::size_t n_steps, double h_time,
                                   const FlowOptions& opts = {}) {
  if (!(h_time > 0.0)) throw ShapeError("closed_loop_flow: step size must be positive");
  detail::require_shape(x.size() == static_cast<Eigen::Index>(sys.d),
                        "closed_loop_flow: state dimension mismatch");
  detail::require_shape(policy.control_dim() == sys.m, "closed_loop_flow: control dimension mismatch");
  const auto d = static_cast<Eigen::Index>(sys.d);
  const auto m = static_cast<Eigen::Index>(sys.m);
  PolicyWorkspace ws = policy.make_workspace();
  Eigen::VectorXd y = x, z(d), k1(d), k2(d), k3(d), k4(d), u(m), u_stage(m);

  const auto rhs = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& control, Eigen::VectorXd& out) {
    sys.drift(at.data(), out.data());
    out.noalias() += sys.G * control;
  };
  const auto feedback = [&](const Eigen::VectorXd& at, Eigen::VectorXd& out) {
    policy.eval(std::span<const double>(at.data(), sys.d), std::span<double>(out.data(), sys.m), ws);
  };
  const auto running = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& control) {
    return sys.state_cost(at.data()) + sys.control_cost(control.data());
  };
  const auto blew_up = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (!std::isfinite(v(i)) || std::abs(v(i)) > opts.divergence_threshold) return true;
    return false;
  };

  Trajectory traj;
  feedback(y, u);
  double r_prev = running(y, u);
  if (opts.record_states) {
    traj.times.push_back(0.0);
    traj.states.push_back(y);
    traj.controls.push_back(u);
  }
  double reward = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    rhs(y, u, k1);
    z = y + 0.5 * h_time * k1;
    feedback(z, u_stage);
    rhs(z, u_stage, k2);
    z = y + 0.5 * h_time * k2;
    feedback(z, u_stage);
    rhs(z, u_stage, k3);
    z = y + h_time * k3;
    feedback(z, u_stage);
    rhs(z, u_stage, k4);
    y += (h_time / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    traj.steps = k + 1;
    if (blew_up(y)) {
      traj.diverged = true;
      break;
    }
    feedback(y, u);
    const double r_next = running(y, u);
    const double w0 = std::exp(-sys.gamma * h_time * static_cast<double>(k));
    const double w1 = std::exp(-sys.gamma * h_time * static_cast<double>(k + 1));
    reward += 0.5 * h_time * (w0 * r_prev + w1 * r_next);
    r_prev = r_next;
    if (opts.record_states) {
      traj.times.push_back(h_time * static_cast<double>(k + 1));
      traj.states.push_back(y);
      traj.controls.push_back(u);
    }
  }
  traj.endpoint = y;
  traj.reward = reward;
  return traj;
}

}  // namespace hjbtt
