#pragma once

// One-dimensional polynomial bases that are orthonormal in H1(a, b) or
// L2(a, b). Under an H1-orthonormal basis the Frobenius norm of a tensor
// product coefficient tensor equals the H1_mix norm of the function it
// represents.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "hjbtt/errors.hpp"

namespace hjbtt {

enum class InnerProduct : std::uint8_t { H1 = 1, L2 = 2 };

inline std::string to_string(InnerProduct ip) { return ip == InnerProduct::H1 ? "H1" : "L2"; }

/// Gauss-Legendre rule with `n` nodes on [a, b]; exact for degree 2n - 1.
/// Nodes come from Newton iteration on P_n started at Chebyshev guesses.
struct GaussLegendre {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  GaussLegendre(int n, double a, double b) : nodes(n), weights(n) {
    if (n < 1) throw ShapeError("GaussLegendre: need at least one node");
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const auto legendre = [n](double x) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      // (P_n, P_n')
      return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      for (int iter = 0; iter < 100; ++iter) {
        const auto [p, dp] = legendre(x);
        const double dx = p / dp;
        x -= dx;
        if (std::abs(dx) < 1e-14) break;
      }
      const double dp = legendre(x).second;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes(i) = mid - half * x;
      nodes(n - 1 - i) = mid + half * x;
      weights(i) = half * w;
      weights(n - 1 - i) = half * w;
    }
  }
};

class OrthoBasis1D {
 public:
  static constexpr int kMaxDegree = 20;

  OrthoBasis1D() = default;

  /// Gram-Schmidt on monomials 1, x, ..., x^p under the requested inner
  /// product, evaluated by Gauss-Legendre quadrature with p + 3 nodes. Each
  /// vector is orthogonalized twice.
  OrthoBasis1D(double a, double b, int max_degree, InnerProduct ip = InnerProduct::H1)
      : a_(a), b_(b), degree_(max_degree), ip_(ip) {
    if (!(a < b)) throw ShapeError("OrthoBasis1D: interval must satisfy a < b");
    if (max_degree < 0 || max_degree > kMaxDegree)
      throw ShapeError("OrthoBasis1D: max_degree must lie in [0, 20]");
    const int n = max_degree + 1;
    const Eigen::MatrixXd gram = monomial_gram(n + 2);
    coeffs_ = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd v = Eigen::VectorXd::Unit(n, j);
      const double initial = std::sqrt(v.dot(gram * v));
      for (int pass = 0; pass < 2; ++pass) {
        for (int k = 0; k < j; ++k) {
          const Eigen::VectorXd ck = coeffs_.row(k).transpose();
          v -= ck.dot(gram * v) * ck;
        }
      }
      const double norm = std::sqrt(std::max(0.0, v.dot(gram * v)));
      if (!(norm > 1e-12 * initial) || !std::isfinite(norm))
        throw ConditioningError("OrthoBasis1D: Gram-Schmidt breakdown at degree " +
                                std::to_string(j));
      v /= norm;
      for (int k = j + 1; k < n; ++k) v(k) = 0.0;
      coeffs_.row(j) = v.transpose();
    }
  }

  /// Rebuilds a basis from stored coefficients (file deserialization).
  static OrthoBasis1D from_coefficients(double a, double b, InnerProduct ip,
                                        Eigen::MatrixXd coeffs) {
    detail::require_shape(coeffs.rows() == coeffs.cols() && coeffs.rows() >= 1,
                          "OrthoBasis1D: coefficient matrix must be square");
    OrthoBasis1D basis;
    basis.a_ = a;
    basis.b_ = b;
    basis.degree_ = static_cast<int>(coeffs.rows()) - 1;
    basis.ip_ = ip;
    basis.coeffs_ = std::move(coeffs);
    return basis;
  }

  [[nodiscard]] int max_degree() const { return degree_; }
  [[nodiscard]] int size() const { return degree_ + 1; }
  [[nodiscard]] double lower() const { return a_; }
  [[nodiscard]] double upper() const { return b_; }
  [[nodiscard]] InnerProduct inner_product() const { return ip_; }
  /// Row j holds the monomial coefficients of psi_j (lower triangular).
  [[nodiscard]] const Eigen::MatrixXd& coefficients() const { return coeffs_; }

  /// out[j] = psi_j(x). `out` must have size() entries.
  void eval_all(double x, std::span<double> out) const {
    const int n = size();
    double powers[kMaxDegree + 1];
    powers[0] = 1.0;
    for (int k = 1; k < n; ++k) powers[k] = powers[k - 1] * x;
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k <= j; ++k) s += coeffs_(j, k) * powers[k];
      out[j] = s;
    }
  }

  /// out[j] = psi_j'(x).
  void eval_all_deriv(double x, std::span<double> out) const {
    const int n = size();
    double dpowers[kMaxDegree + 1];
    dpowers[0] = 0.0;
    double p = 1.0;
    for (int k = 1; k < n; ++k) {
      dpowers[k] = k * p;
      p *= x;
    }
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 1; k <= j; ++k) s += coeffs_(j, k) * dpowers[k];
      out[j] = s;
    }
  }

  [[nodiscard]] Eigen::VectorXd eval_all(double x) const {
    Eigen::VectorXd v(size());
    eval_all(x, std::span<double>(v.data(), v.size()));
    return v;
  }
  [[nodiscard]] Eigen::VectorXd eval_all_deriv(double x) const {
    Eigen::VectorXd v(size());
    eval_all_deriv(x, std::span<double>(v.data(), v.size()));
    return v;
  }

  /// Coefficients of the monomial x^k in this basis, i.e. w with
  /// sum_j w_j psi_j(x) = x^k.
  [[nodiscard]] Eigen::VectorXd monomial_in_basis(int k) const {
    detail::require_shape(k >= 0 && k <= degree_, "OrthoBasis1D: monomial degree out of range");
    // psi = C m for the monomial vector m, so x^k = e_k^T C^{-1} psi.
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(size(), k);
    return coeffs_.transpose().triangularView<Eigen::Upper>().solve(e);
  }

  /// Gram matrix of the basis under `ip`, using `nodes` quadrature points.
  [[nodiscard]] Eigen::MatrixXd gram(InnerProduct ip, int nodes) const {
    const GaussLegendre q(nodes, a_, b_);
    const int n = size();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd v(n), dv(n);
    for (int i = 0; i < q.nodes.size(); ++i) {
      eval_all(q.nodes(i), std::span<double>(v.data(), n));
      g += q.weights(i) * v * v.transpose();
      if (ip == InnerProduct::H1) {
        eval_all_deriv(q.nodes(i), std::span<double>(dv.data(), n));
        g += q.weights(i) * dv * dv.transpose();
      }
    }
    return g;
  }

  friend bool operator==(const OrthoBasis1D& l, const OrthoBasis1D& r) {
    return l.a_ == r.a_ && l.b_ == r.b_ && l.degree_ == r.degree_ && l.ip_ == r.ip_ &&
           l.coeffs_ == r.coeffs_;
  }

 private:
  [[nodiscard]] Eigen::MatrixXd monomial_gram(int nodes) const {
    const GaussLegendre q(nodes, a_, b_);
    const int n = degree_ + 1;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd v(n), dv(n);
    for (int i = 0; i < q.nodes.size(); ++i) {
      const double x = q.nodes(i);
      double p = 1.0;
      for (int k = 0; k < n; ++k) {
        v(k) = p;
        dv(k) = 0.0;
        p *= x;
      }
      p = 1.0;
      for (int k = 1; k < n; ++k) {
        dv(k) = k * p;
        p *= x;
      }
      g += q.weights(i) * v * v.transpose();
      if (ip_ == InnerProduct::H1) g += q.weights(i) * dv * dv.transpose();
    }
    return g;
  }

  double a_ = -1.0;
  double b_ = 1.0;
  int degree_ = 0;
  InnerProduct ip_ = InnerProduct::H1;
  Eigen::MatrixXd coeffs_ = Eigen::MatrixXd::Identity(1, 1);
};

}  // namespace hjbtt
