#pragma once

// Feedback laws: zero, linear (alpha = -K x) and the law induced by a TT
// value function, alpha(x) = -1/2 B^{-1} G^T grad v(x).

#include <Eigen/Dense>

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt {

/// Allocation-free repeated evaluation of a TT function whose modes all use
/// the same one-dimensional basis. Not thread-safe; use one per thread.
class ValueEvaluator {
 public:
  ValueEvaluator(const TTTensor& tt, const OrthoBasis1D& basis)
      : tt_(&tt), basis_(&basis) {
    detail::require_shape(tt.max_dim() == static_cast<std::size_t>(basis.size()) &&
                              std::all_of(tt.dims().begin(), tt.dims().end(),
                                          [&](std::size_t n) { return n == tt.max_dim(); }),
                          "ValueEvaluator: TT mode sizes must equal the basis size");
    const std::size_t r = tt.max_rank();
    const std::size_t n = tt.max_dim();
    psi_.resize(n);
    dpsi_.resize(n);
    v_.resize(r);
    dv_.resize(r);
    v_next_.resize(r);
    dv_next_.resize(r);
  }

  [[nodiscard]] std::size_t order() const { return tt_->order(); }

  double value(std::span<const double> x) {
    v_[0] = 1.0;
    for (std::size_t k = 0; k < tt_->order(); ++k) {
      basis_->eval_all(x[k], psi_);
      detail::contract_left(tt_->core(k), tt_->dim(k), v_.data(), psi_.data(), v_next_.data());
      v_.swap(v_next_);
    }
    return v_[0];
  }

  /// grad v(x) . dir by forward-mode propagation of (value, derivative)
  /// rank vectors; costs about twice a plain evaluation.
  double directional(std::span<const double> x, std::span<const double> dir) {
    v_[0] = 1.0;
    dv_[0] = 0.0;
    bool active = false;
    for (std::size_t k = 0; k < tt_->order(); ++k) {
      const RowMatrix& core = tt_->core(k);
      const std::size_t n = tt_->dim(k);
      const auto rr = static_cast<std::size_t>(core.cols());
      const std::size_t rl = static_cast<std::size_t>(core.rows()) / n;
      basis_->eval_all(x[k], psi_);
      const double g = dir[k];
      if (g != 0.0) basis_->eval_all_deriv(x[k], dpsi_);
      std::fill_n(v_next_.begin(), rr, 0.0);
      std::fill_n(dv_next_.begin(), rr, 0.0);
      const double* c = core.data();
      for (std::size_t a = 0; a < rl; ++a) {
        for (std::size_t i = 0; i < n; ++i) {
          const double w = v_[a] * psi_[i];
          double dw = active ? dv_[a] * psi_[i] : 0.0;
          if (g != 0.0) dw += g * v_[a] * dpsi_[i];
          const double* row = c + (a * n + i) * rr;
          for (std::size_t b = 0; b < rr; ++b) {
            v_next_[b] += w * row[b];
            dv_next_[b] += dw * row[b];
          }
        }
      }
      active = active || g != 0.0;
      v_.swap(v_next_);
      dv_.swap(dv_next_);
    }
    return active ? dv_[0] : 0.0;
  }

  Eigen::VectorXd gradient(std::span<const double> x) {
    const auto f = FeatureVectors::from_basis(*basis_, x, true);
    return tt_grad_eval(*tt_, f);
  }

 private:
  const TTTensor* tt_;
  const OrthoBasis1D* basis_;
  std::vector<double> psi_, dpsi_, v_, dv_, v_next_, dv_next_;
};

struct ZeroPolicy {
  std::size_t controls = 1;
};

struct LinearPolicy {
  Eigen::MatrixXd gain;  // m x d, alpha(x) = -gain * x
};

struct TTValuePolicy {
  std::shared_ptr<const TTTensor> value;
  std::shared_ptr<const OrthoBasis1D> basis;
  Eigen::MatrixXd G;               // d x m
  Eigen::MatrixXd half_B_inverse;  // 1/2 B^{-1}, m x m
};

/// Per-thread scratch space for policy evaluation.
struct PolicyWorkspace {
  std::optional<ValueEvaluator> evaluator;
  Eigen::VectorXd gt_grad;
};

class Policy {
 public:
  using Variant = std::variant<ZeroPolicy, LinearPolicy, TTValuePolicy>;

  static Policy zero(std::size_t controls) { return Policy(ZeroPolicy{controls}); }
  static Policy linear(Eigen::MatrixXd gain) { return Policy(LinearPolicy{std::move(gain)}); }
  static Policy from_value(TTTensor value, OrthoBasis1D basis, const Eigen::MatrixXd& G,
                           const Eigen::MatrixXd& B) {
    detail::require_shape(static_cast<std::size_t>(G.rows()) == value.order(),
                          "Policy::from_value: G rows must equal the state dimension");
    detail::require_shape(B.rows() == G.cols() && B.cols() == G.cols(),
                          "Policy::from_value: B must be m x m");
    TTValuePolicy p;
    p.value = std::make_shared<const TTTensor>(std::move(value));
    p.basis = std::make_shared<const OrthoBasis1D>(std::move(basis));
    p.G = G;
    p.half_B_inverse = 0.5 * B.llt().solve(Eigen::MatrixXd::Identity(B.rows(), B.cols()));
    return Policy(std::move(p));
  }

  [[nodiscard]] const Variant& variant() const { return v_; }
  [[nodiscard]] bool is_zero() const { return std::holds_alternative<ZeroPolicy>(v_); }

  [[nodiscard]] std::size_t control_dim() const {
    return std::visit(
        [](const auto& p) -> std::size_t {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, ZeroPolicy>) return p.controls;
          else if constexpr (std::is_same_v<T, LinearPolicy>) return static_cast<std::size_t>(p.gain.rows());
          else return static_cast<std::size_t>(p.G.cols());
        },
        v_);
  }

  [[nodiscard]] PolicyWorkspace make_workspace() const {
    PolicyWorkspace ws;
    if (const auto* p = std::get_if<TTValuePolicy>(&v_)) {
      ws.evaluator.emplace(*p->value, *p->basis);
      ws.gt_grad.resize(p->G.cols());
    }
    return ws;
  }

  /// Writes alpha(x) into `u` (m entries).
  void eval(std::span<const double> x, std::span<double> u, PolicyWorkspace& ws) const {
    if (const auto* lin = std::get_if<LinearPolicy>(&v_)) {
      const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
      Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())).noalias() =
          -lin->gain * xv;
    } else if (const auto* tt = std::get_if<TTValuePolicy>(&v_)) {
      const Eigen::Index m = tt->G.cols();
      for (Eigen::Index j = 0; j < m; ++j)
        ws.gt_grad(j) = ws.evaluator->directional(
            x, std::span<const double>(tt->G.col(j).data(), static_cast<std::size_t>(tt->G.rows())));
      Eigen::Map<Eigen::VectorXd>(u.data(), m).noalias() = -tt->half_B_inverse * ws.gt_grad;
    } else {
      std::fill(u.begin(), u.end(), 0.0);
    }
  }

  [[nodiscard]] Eigen::VectorXd eval(const Eigen::VectorXd& x) const {
    auto ws = make_workspace();
    Eigen::VectorXd u(static_cast<Eigen::Index>(control_dim()));
    eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
         std::span<double>(u.data(), static_cast<std::size_t>(u.size())), ws);
    return u;
  }

 private:
  explicit Policy(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

/// Free-function form of Policy::eval.
inline Eigen::VectorXd policy_eval(const Policy& policy, const Eigen::VectorXd& x) {
  return policy.eval(x);
}

}  // namespace hjbtt
