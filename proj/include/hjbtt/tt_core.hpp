#pragma once

// Tensor-train representation of coefficient tensors.
//
// Core k is stored as its left unfolding, a row-major (r_{k-1} * n_k) x r_k
// matrix. Row-major storage makes the memory order (a, i, b) with b fastest,
// so the right unfolding r_{k-1} x (n_k * r_k) is the same buffer.
//
// Positions are 0-based: canon_pos = l means cores 0..l-1 are left-orthogonal
// and cores l+1..d-1 are right-orthogonal.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/rng.hpp"

namespace hjbtt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

/// Dense order-d array, row-major (last index fastest). Test oracle only.
struct DenseTensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;

  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> dims_)
      : dims(std::move(dims_)), data(element_count(dims), 0.0) {}

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }

  [[nodiscard]] std::size_t offset(std::span<const std::size_t> idx) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) off = off * dims[k] + idx[k];
    return off;
  }
  double& operator()(std::span<const std::size_t> idx) { return data[offset(idx)]; }
  double operator()(std::span<const std::size_t> idx) const { return data[offset(idx)]; }

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return std::sqrt(s);
  }
};

/// Per-mode basis evaluations Psi_k(x_k) at one point, optionally with the
/// derivative vectors Psi_k'(x_k).
struct FeatureVectors {
  std::vector<Eigen::VectorXd> values;
  std::vector<Eigen::VectorXd> derivs;

  [[nodiscard]] bool has_derivs() const { return !derivs.empty(); }

  static FeatureVectors from_basis(const OrthoBasis1D& basis, std::span<const double> x,
                                   bool with_derivs = false) {
    FeatureVectors f;
    f.values.reserve(x.size());
    for (double xi : x) f.values.push_back(basis.eval_all(xi));
    if (with_derivs) {
      f.derivs.reserve(x.size());
      for (double xi : x) f.derivs.push_back(basis.eval_all_deriv(xi));
    }
    return f;
  }
};

class TTTensor {
 public:
  TTTensor() = default;

  /// `cores[k]` is the left unfolding of core k. Ranks are inferred from the
  /// core shapes and checked for consistency.
  TTTensor(std::vector<RowMatrix> cores, std::vector<std::size_t> dims)
      : dims_(std::move(dims)), cores_(std::move(cores)) {
    validate();
  }

  /// The zero function: all ranks 1, all cores zero.
  static TTTensor zero(const std::vector<std::size_t>& dims) {
    std::vector<RowMatrix> cores;
    for (std::size_t n : dims) cores.push_back(RowMatrix::Zero(n, 1));
    return TTTensor(std::move(cores), dims);
  }

  /// Zero cores with the given rank vector (length d - 1).
  static TTTensor zero(const std::vector<std::size_t>& dims,
                       const std::vector<std::size_t>& ranks) {
    check_rank_vector(dims, ranks);
    std::vector<RowMatrix> cores;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      const std::size_t rl = k == 0 ? 1 : ranks[k - 1];
      const std::size_t rr = k + 1 == dims.size() ? 1 : ranks[k];
      cores.push_back(RowMatrix::Zero(rl * dims[k], rr));
    }
    return TTTensor(std::move(cores), dims);
  }

  /// Standard normal entries scaled by 1/sqrt(r_{k-1} n_k).
  static TTTensor random(const std::vector<std::size_t>& dims,
                         const std::vector<std::size_t>& ranks, CounterRng rng) {
    TTTensor t = zero(dims, ranks);
    for (auto& core : t.cores_) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(core.rows()));
      for (Eigen::Index i = 0; i < core.size(); ++i) core.data()[i] = scale * rng.normal();
    }
    return t;
  }

  [[nodiscard]] std::size_t order() const { return dims_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
  [[nodiscard]] std::size_t dim(std::size_t k) const { return dims_[k]; }
  /// Internal ranks r_1..r_{d-1}.
  [[nodiscard]] std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r;
    for (std::size_t k = 0; k + 1 < order(); ++k) r.push_back(right_rank(k));
    return r;
  }
  [[nodiscard]] std::size_t left_rank(std::size_t k) const {
    return static_cast<std::size_t>(cores_[k].rows()) / dims_[k];
  }
  [[nodiscard]] std::size_t right_rank(std::size_t k) const {
    return static_cast<std::size_t>(cores_[k].cols());
  }
  [[nodiscard]] std::size_t max_rank() const {
    std::size_t r = 1;
    for (std::size_t k = 0; k < order(); ++k) r = std::max(r, right_rank(k));
    return r;
  }
  [[nodiscard]] std::size_t max_dim() const {
    return dims_.empty() ? 0 : *std::max_element(dims_.begin(), dims_.end());
  }
  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t s = 0;
    for (const auto& c : cores_) s += static_cast<std::size_t>(c.size());
    return s;
  }

  [[nodiscard]] const RowMatrix& core(std::size_t k) const { return cores_[k]; }
  [[nodiscard]] ConstRowMap right_unfolding(std::size_t k) const {
    return ConstRowMap(cores_[k].data(), static_cast<Eigen::Index>(left_rank(k)),
                       static_cast<Eigen::Index>(dims_[k] * right_rank(k)));
  }
  [[nodiscard]] double entry(std::size_t k, std::size_t a, std::size_t i, std::size_t b) const {
    return cores_[k](static_cast<Eigen::Index>(a * dims_[k] + i), static_cast<Eigen::Index>(b));
  }

  [[nodiscard]] std::optional<std::size_t> canon_pos() const { return canon_pos_; }

  /// Replaces core k with a matrix of identical shape. Canonical form
  /// survives only when k is the active core.
  void set_core(std::size_t k, RowMatrix core) {
    detail::require_shape(k < order(), "TTTensor::set_core: position out of range");
    detail::require_shape(core.rows() == cores_[k].rows() && core.cols() == cores_[k].cols(),
                          "TTTensor::set_core: core shape mismatch");
    cores_[k] = std::move(core);
    if (canon_pos_ && *canon_pos_ != k) canon_pos_.reset();
  }

  /// Scales the active core (or core 0) in place.
  void scale(double s) { cores_[canon_pos_.value_or(0)] *= s; }

  /// Brings the train into mixed-canonical form at `pos` by QR sweeps.
  void canonicalize(std::size_t pos) {
    detail::require_shape(pos < order(), "canonicalize: position out of range");
    if (canon_pos_ == pos) return;
    if (canon_pos_) {
      while (*canon_pos_ < pos) move_canon_right();
      while (*canon_pos_ > pos) move_canon_left();
      return;
    }
    for (std::size_t k = 0; k < pos; ++k) left_orthogonalize(k);
    for (std::size_t k = order() - 1; k > pos; --k) right_orthogonalize(k);
    canon_pos_ = pos;
  }

  /// Shifts the active core one step right with a single QR.
  void move_canon_right() {
    detail::require_shape(canon_pos_.has_value() && *canon_pos_ + 1 < order(),
                          "move_canon_right: not canonical or already at the last core");
    left_orthogonalize(*canon_pos_);
    canon_pos_ = *canon_pos_ + 1;
  }
  void move_canon_left() {
    detail::require_shape(canon_pos_.has_value() && *canon_pos_ > 0,
                          "move_canon_left: not canonical or already at the first core");
    right_orthogonalize(*canon_pos_);
    canon_pos_ = *canon_pos_ - 1;
  }

  /// Marks the train as canonical at `pos` without touching the cores; used
  /// after operations that establish the form by construction.
  void assume_canonical(std::optional<std::size_t> pos) { canon_pos_ = pos; }

  friend bool operator==(const TTTensor& l, const TTTensor& r) {
    return l.dims_ == r.dims_ && l.cores_ == r.cores_;
  }

 private:
  static void check_rank_vector(const std::vector<std::size_t>& dims,
                                const std::vector<std::size_t>& ranks) {
    detail::require_shape(!dims.empty(), "TTTensor: order must be at least 1");
    detail::require_shape(ranks.size() + 1 == dims.size(),
                          "TTTensor: rank vector must have d - 1 entries");
    for (std::size_t r : ranks) detail::require_shape(r >= 1, "TTTensor: ranks must be >= 1");
    for (std::size_t n : dims) detail::require_shape(n >= 1, "TTTensor: mode sizes must be >= 1");
  }

  void validate() const {
    detail::require_shape(!dims_.empty() && dims_.size() == cores_.size(),
                          "TTTensor: need one core per mode");
    std::size_t prev = 1;
    for (std::size_t k = 0; k < order(); ++k) {
      detail::require_shape(dims_[k] >= 1 && cores_[k].cols() >= 1,
                            "TTTensor: mode sizes and ranks must be >= 1");
      detail::require_shape(static_cast<std::size_t>(cores_[k].rows()) == prev * dims_[k],
                            "TTTensor: core " + std::to_string(k) + " breaks the rank chain");
      prev = static_cast<std::size_t>(cores_[k].cols());
    }
    detail::require_shape(prev == 1, "TTTensor: last core must have right rank 1");
    for (const auto& c : cores_)
      detail::require_shape(c.allFinite(), "TTTensor: non-finite core entry");
  }

  void left_orthogonalize(std::size_t k) {
    const RowMatrix& c = cores_[k];
    const Eigen::Index m = c.rows();
    const Eigen::Index q = std::min(m, c.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    RowMatrix Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, q);
    RowMatrix R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
    const std::size_t n_next = dims_[k + 1];
    const auto r_next = static_cast<Eigen::Index>(right_rank(k + 1));
    RowMatrix next = R * right_unfolding(k + 1);
    cores_[k] = std::move(Q);
    cores_[k + 1] = RowMap(next.data(), q * static_cast<Eigen::Index>(n_next), r_next);
  }

  void right_orthogonalize(std::size_t k) {
    const auto rl = static_cast<Eigen::Index>(left_rank(k));
    const auto cols = static_cast<Eigen::Index>(dims_[k] * right_rank(k));
    const Eigen::MatrixXd mt = right_unfolding(k).transpose();
    const Eigen::Index q = std::min(cols, rl);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(mt);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, q);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
    RowMatrix qt = Q.transpose();
    RowMatrix prev = cores_[k - 1] * R.transpose();
    cores_[k] = RowMap(qt.data(), q * static_cast<Eigen::Index>(dims_[k]),
                       static_cast<Eigen::Index>(right_rank(k)));
    cores_[k - 1] = std::move(prev);
  }

  std::vector<std::size_t> dims_;
  std::vector<RowMatrix> cores_;
  std::optional<std::size_t> canon_pos_;
};

// ---------------------------------------------------------------------------
// Construction from and to dense tensors.

namespace detail {

/// Smallest rank t >= 1 whose discarded tail satisfies sqrt(sum sigma_j^2) <= delta.
inline Eigen::Index truncation_rank(const Eigen::VectorXd& sigma, double delta,
                                    std::size_t max_rank) {
  Eigen::Index t = sigma.size();
  double tail = 0.0;
  while (t > 1) {
    const double next = tail + sigma(t - 1) * sigma(t - 1);
    if (std::sqrt(next) > delta) break;
    tail = next;
    --t;
  }
  return std::max<Eigen::Index>(1, std::min<Eigen::Index>(t, static_cast<Eigen::Index>(max_rank)));
}

}  // namespace detail

/// TT-SVD. Every truncation discards at most tol * ||full|| / sqrt(d - 1) in
/// Frobenius norm, so the overall relative error is at most tol when the
/// rank caps do not bind.
inline TTTensor tt_from_full(const DenseTensor& full, const std::vector<std::size_t>& max_ranks,
                             double tol) {
  const std::size_t d = full.dims.size();
  detail::require_shape(d >= 1, "tt_from_full: order must be at least 1");
  detail::require_shape(max_ranks.size() + 1 == d, "tt_from_full: need d - 1 rank caps");
  detail::require_shape(full.data.size() == DenseTensor::element_count(full.dims),
                        "tt_from_full: data size does not match dims");
  detail::require_shape(tol >= 0.0, "tt_from_full: tol must be non-negative");
  for (double v : full.data)
    detail::require_shape(std::isfinite(v), "tt_from_full: non-finite input");

  const double delta = d > 1 ? tol * full.norm() / std::sqrt(static_cast<double>(d - 1)) : 0.0;
  std::vector<RowMatrix> cores;
  RowMatrix rest = ConstRowMap(full.data.data(), 1, static_cast<Eigen::Index>(full.size()));
  Eigen::Index r_prev = 1;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    const auto n = static_cast<Eigen::Index>(full.dims[k]);
    const Eigen::Index cols = rest.size() / (r_prev * n);
    const RowMatrix unfolded = RowMap(rest.data(), r_prev * n, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfolded, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Index t = detail::truncation_rank(svd.singularValues(), delta, max_ranks[k]);
    cores.emplace_back(svd.matrixU().leftCols(t));
    rest = svd.singularValues().head(t).asDiagonal() * svd.matrixV().leftCols(t).transpose();
    r_prev = t;
  }
  const auto n_last = static_cast<Eigen::Index>(full.dims[d - 1]);
  cores.emplace_back(RowMap(rest.data(), r_prev * n_last, 1));
  TTTensor tt(std::move(cores), full.dims);
  tt.assume_canonical(d - 1);
  return tt;
}

inline DenseTensor tt_to_full(const TTTensor& tt) {
  const std::size_t total = DenseTensor::element_count(tt.dims());
  if (total > 10'000'000) throw ShapeError("tt_to_full: more than 1e7 entries");
  RowMatrix acc = tt.core(0);  // (n_1) x r_1
  for (std::size_t k = 1; k < tt.order(); ++k) {
    RowMatrix next = acc * tt.right_unfolding(k);  // P x (n_k r_k)
    const Eigen::Index rows = acc.rows() * static_cast<Eigen::Index>(tt.dim(k));
    acc = RowMap(next.data(), rows, static_cast<Eigen::Index>(tt.right_rank(k)));
  }
  DenseTensor out(tt.dims());
  std::copy(acc.data(), acc.data() + acc.size(), out.data.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation.

namespace detail {

/// out[b] = sum_{a,i} left[a] psi[i] core(a n + i, b).
inline void contract_left(const RowMatrix& core, std::size_t n, const double* left,
                          const double* psi, double* out) {
  const Eigen::Index rr = core.cols();
  const auto rl = static_cast<Eigen::Index>(core.rows() / static_cast<Eigen::Index>(n));
  for (Eigen::Index b = 0; b < rr; ++b) out[b] = 0.0;
  const double* c = core.data();
  for (Eigen::Index a = 0; a < rl; ++a) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = left[a] * psi[i];
      const double* row = c + (a * static_cast<Eigen::Index>(n) + static_cast<Eigen::Index>(i)) * rr;
      for (Eigen::Index b = 0; b < rr; ++b) out[b] += w * row[b];
    }
  }
}

/// out[a] = sum_{i,b} core(a n + i, b) psi[i] right[b].
inline void contract_right(const RowMatrix& core, std::size_t n, const double* right,
                           const double* psi, double* out) {
  const Eigen::Index rr = core.cols();
  const auto rl = static_cast<Eigen::Index>(core.rows() / static_cast<Eigen::Index>(n));
  const double* c = core.data();
  for (Eigen::Index a = 0; a < rl; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = c + (a * static_cast<Eigen::Index>(n) + static_cast<Eigen::Index>(i)) * rr;
      double t = 0.0;
      for (Eigen::Index b = 0; b < rr; ++b) t += row[b] * right[b];
      s += psi[i] * t;
    }
    out[a] = s;
  }
}

inline void check_features(const TTTensor& tt, const FeatureVectors& f, bool need_derivs) {
  require_shape(f.values.size() == tt.order(), "feature vector count does not match TT order");
  for (std::size_t k = 0; k < tt.order(); ++k)
    require_shape(static_cast<std::size_t>(f.values[k].size()) == tt.dim(k),
                  "feature vector length does not match mode size");
  if (need_derivs) {
    require_shape(f.derivs.size() == tt.order(), "derivative feature vectors missing");
    for (std::size_t k = 0; k < tt.order(); ++k)
      require_shape(static_cast<std::size_t>(f.derivs[k].size()) == tt.dim(k),
                    "derivative feature vector length does not match mode size");
  }
}

}  // namespace detail

/// Left partial contractions: result[k] has r_{k-1} entries and contracts
/// cores 0..k-1 with their feature vectors (result[0] = [1]).
inline std::vector<Eigen::VectorXd> left_partials(const TTTensor& tt, const FeatureVectors& f) {
  std::vector<Eigen::VectorXd> out(tt.order());
  out[0] = Eigen::VectorXd::Ones(1);
  for (std::size_t k = 0; k + 1 < tt.order(); ++k) {
    out[k + 1].resize(static_cast<Eigen::Index>(tt.right_rank(k)));
    detail::contract_left(tt.core(k), tt.dim(k), out[k].data(), f.values[k].data(),
                          out[k + 1].data());
  }
  return out;
}

/// Right partial contractions: result[k] has r_k entries and contracts cores
/// k+1..d-1 (result[d-1] = [1]).
inline std::vector<Eigen::VectorXd> right_partials(const TTTensor& tt, const FeatureVectors& f) {
  const std::size_t d = tt.order();
  std::vector<Eigen::VectorXd> out(d);
  out[d - 1] = Eigen::VectorXd::Ones(1);
  for (std::size_t k = d - 1; k > 0; --k) {
    out[k - 1].resize(static_cast<Eigen::Index>(tt.left_rank(k)));
    detail::contract_right(tt.core(k), tt.dim(k), out[k].data(), f.values[k].data(),
                           out[k - 1].data());
  }
  return out;
}

/// v(x) = sum_i c[i_1..i_d] prod_k Psi_k(x_k)[i_k], by left-to-right rank
/// vector propagation.
inline double tt_eval(const TTTensor& tt, const FeatureVectors& f) {
  detail::check_features(tt, f, false);
  Eigen::VectorXd left = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd next;
  for (std::size_t k = 0; k < tt.order(); ++k) {
    next.resize(static_cast<Eigen::Index>(tt.right_rank(k)));
    detail::contract_left(tt.core(k), tt.dim(k), left.data(), f.values[k].data(), next.data());
    left.swap(next);
  }
  return left(0);
}

/// Gradient with respect to x: component k replaces Psi_k by Psi_k'.
inline Eigen::VectorXd tt_grad_eval(const TTTensor& tt, const FeatureVectors& f) {
  detail::check_features(tt, f, true);
  const auto lefts = left_partials(tt, f);
  const auto rights = right_partials(tt, f);
  Eigen::VectorXd grad(static_cast<Eigen::Index>(tt.order()));
  Eigen::VectorXd tmp;
  for (std::size_t k = 0; k < tt.order(); ++k) {
    tmp.resize(static_cast<Eigen::Index>(tt.right_rank(k)));
    detail::contract_left(tt.core(k), tt.dim(k), lefts[k].data(), f.derivs[k].data(), tmp.data());
    grad(static_cast<Eigen::Index>(k)) = tmp.dot(rights[k]);
  }
  return grad;
}

/// Maximum deviation from orthonormality of the unfoldings implied by
/// canon_pos (0 if the train carries no canonical position).
inline double canonical_deviation(const TTTensor& tt) {
  if (!tt.canon_pos()) return 0.0;
  const std::size_t pos = *tt.canon_pos();
  double dev = 0.0;
  for (std::size_t k = 0; k < tt.order(); ++k) {
    if (k < pos) {
      const Eigen::MatrixXd g = tt.core(k).transpose() * tt.core(k);
      dev = std::max(dev, (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    } else if (k > pos) {
      const auto ru = tt.right_unfolding(k);
      const Eigen::MatrixXd g = ru * ru.transpose();
      dev = std::max(dev, (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    }
  }
  return dev;
}

inline TTTensor canonicalize(TTTensor tt, std::size_t pos) {
  tt.canonicalize(pos);
  return tt;
}

// ---------------------------------------------------------------------------
// Arithmetic.

inline TTTensor tt_scale(TTTensor a, double s) {
  a.scale(s);
  return a;
}

/// Frobenius norm of the coefficient tensor. Uses the active core when the
/// train is canonical, otherwise a Gram contraction sweep.
inline double tt_norm(const TTTensor& tt) {
  if (tt.canon_pos()) return tt.core(*tt.canon_pos()).norm();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Ones(1, 1);
  for (std::size_t k = 0; k < tt.order(); ++k) {
    const std::size_t n = tt.dim(k);
    const auto rl = static_cast<Eigen::Index>(tt.left_rank(k));
    const auto rr = static_cast<Eigen::Index>(tt.right_rank(k));
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(rr, rr);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::MatrixXd slice(rl, rr);
      for (Eigen::Index a = 0; a < rl; ++a)
        slice.row(a) = tt.core(k).row(a * static_cast<Eigen::Index>(n) + static_cast<Eigen::Index>(i));
      next.noalias() += slice.transpose() * gram * slice;
    }
    gram.swap(next);
  }
  return std::sqrt(std::max(0.0, gram(0, 0)));
}

/// Sum with block structure; ranks add.
inline TTTensor tt_add(const TTTensor& a, const TTTensor& b) {
  detail::require_shape(a.dims() == b.dims(), "tt_add: dims mismatch");
  const std::size_t d = a.order();
  std::vector<RowMatrix> cores;
  if (d == 1) {
    cores.push_back(a.core(0) + b.core(0));
    return TTTensor(std::move(cores), a.dims());
  }
  for (std::size_t k = 0; k < d; ++k) {
    const auto n = static_cast<Eigen::Index>(a.dim(k));
    const auto al = static_cast<Eigen::Index>(a.left_rank(k));
    const auto ar = static_cast<Eigen::Index>(a.right_rank(k));
    const auto bl = static_cast<Eigen::Index>(b.left_rank(k));
    const auto br = static_cast<Eigen::Index>(b.right_rank(k));
    const Eigen::Index rl = k == 0 ? 1 : al + bl;
    const Eigen::Index rr = k + 1 == d ? 1 : ar + br;
    RowMatrix c = RowMatrix::Zero(rl * n, rr);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index x = 0; x < al; ++x) {
        const Eigen::Index row = (k == 0 ? 0 : x) * n + i;
        c.row(row).head(ar) += a.core(k).row(x * n + i);
      }
      for (Eigen::Index x = 0; x < bl; ++x) {
        const Eigen::Index row = (k == 0 ? 0 : al + x) * n + i;
        if (k + 1 == d)
          c.row(row).head(1) += b.core(k).row(x * n + i);
        else
          c.row(row).segment(ar, br) += b.core(k).row(x * n + i);
      }
    }
    cores.push_back(std::move(c));
  }
  return TTTensor(std::move(cores), a.dims());
}

/// SVD truncation after right-orthogonalization; the result is canonical at
/// the last core. Relative error <= tol when the rank caps do not bind.
inline TTTensor tt_round(TTTensor tt, const std::vector<std::size_t>& max_ranks, double tol) {
  const std::size_t d = tt.order();
  detail::require_shape(max_ranks.size() + 1 == d, "tt_round: need d - 1 rank caps");
  detail::require_shape(tol >= 0.0, "tt_round: tol must be non-negative");
  tt.canonicalize(0);
  if (d == 1) return tt;
  const double delta = tol * tt_norm(tt) / std::sqrt(static_cast<double>(d - 1));
  std::vector<RowMatrix> cores;
  for (std::size_t k = 0; k < d; ++k) cores.push_back(tt.core(k));
  for (std::size_t k = 0; k + 1 < d; ++k) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(cores[k]),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Index t = detail::truncation_rank(svd.singularValues(), delta, max_ranks[k]);
    const RowMatrix sv =
        svd.singularValues().head(t).asDiagonal() * svd.matrixV().leftCols(t).transpose();
    const auto n_next = static_cast<Eigen::Index>(tt.dim(k + 1));
    const Eigen::Index r_next = cores[k + 1].cols();
    const Eigen::Index r_cur = cores[k].cols();
    RowMatrix next = sv * ConstRowMap(cores[k + 1].data(), r_cur, n_next * r_next);
    cores[k] = svd.matrixU().leftCols(t);
    cores[k + 1] = RowMap(next.data(), t * n_next, r_next);
  }
  TTTensor out(std::move(cores), tt.dims());
  out.assume_canonical(d - 1);
  return out;
}

/// Local basis coefficients for the active core `pos`:
/// b^L(x_{<pos}) (x) Psi_pos(x_pos) (x) b^R(x_{>pos}), ordered like the core
/// entries (a, i, b). Its inner product with the flattened core is v(x).
inline Eigen::VectorXd local_features(const TTTensor& tt, std::size_t pos,
                                      const FeatureVectors& f) {
  detail::require_shape(pos < tt.order(), "local_features: position out of range");
  if (tt.canon_pos() != pos)
    throw ShapeError("local_features: TT is not canonicalized at position " + std::to_string(pos));
  detail::check_features(tt, f, false);
  Eigen::VectorXd left = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd tmp;
  for (std::size_t k = 0; k < pos; ++k) {
    tmp.resize(static_cast<Eigen::Index>(tt.right_rank(k)));
    detail::contract_left(tt.core(k), tt.dim(k), left.data(), f.values[k].data(), tmp.data());
    left.swap(tmp);
  }
  Eigen::VectorXd right = Eigen::VectorXd::Ones(1);
  for (std::size_t k = tt.order() - 1; k > pos; --k) {
    tmp.resize(static_cast<Eigen::Index>(tt.left_rank(k)));
    detail::contract_right(tt.core(k), tt.dim(k), right.data(), f.values[k].data(), tmp.data());
    right.swap(tmp);
  }
  const Eigen::Index n = f.values[pos].size();
  Eigen::VectorXd out(left.size() * n * right.size());
  Eigen::Index idx = 0;
  for (Eigen::Index a = 0; a < left.size(); ++a)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index b = 0; b < right.size(); ++b) out(idx++) = left(a) * f.values[pos](i) * right(b);
  return out;
}

}  // namespace hjbtt
