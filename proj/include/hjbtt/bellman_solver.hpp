#pragma once

// Monte-Carlo least squares for the linearized Bellman equation
//
//   (Id - e^{-gamma tau} K_tau) v = R,   R(x) = int_0^tau e^{-gamma t} r dt,
//
// on the TT manifold. The penalized empirical loss is
//
//   1/N sum_i |v(x_i) - rho v(Phi(x_i)) - R(x_i)|^2        (+ H1 rows)
//   + delta1 v(0)^2 + delta2 |grad v(0)|^2 + delta3 ||c||_F^2,
//
// with rho = e^{-gamma tau}. Under mixed-canonical form ||c||_F equals the
// norm of the active core, so every ALS micro-step is a ridge regression in
// the local basis.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/dynamics.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/parallel.hpp"
#include "hjbtt/policy.hpp"
#include "hjbtt/qmc.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt {

enum class LossVariant { L2, H1 };

inline std::string to_string(LossVariant v) { return v == LossVariant::L2 ? "L2" : "H1"; }

struct LossConfig {
  double delta1 = 100.0;
  double delta2 = 100.0;
  bool adaptive_delta3 = true;
  double kappa = 1e-3;         // delta3 = kappa * loss at sweep start
  double delta3 = 0.0;         // used when !adaptive_delta3
  double delta3_floor = 1e-12;
  LossVariant variant = LossVariant::L2;
  double epsilon = 1e-3;
  std::size_t max_sweeps = 20;
  double sweep_tol = 1e-6;
  double max_diverged_fraction = 0.2;
  /// Relative loss increase tolerated within a micro-step as roundoff.
  double increase_tol = 1e-10;
  /// Throw ConsistencyError on a larger increase instead of rejecting the step.
  bool strict_monotonicity = false;

  void validate() const {
    if (!(delta1 >= 0.0) || !(delta2 >= 0.0) || !(delta3 >= 0.0) || !(kappa >= 0.0))
      throw ConfigError("LossConfig: penalty weights must be non-negative");
    if (variant == LossVariant::H1 && !(epsilon > 0.0))
      throw ConfigError("LossConfig: the H1 variant needs epsilon > 0");
    if (!(epsilon >= 0.0)) throw ConfigError("LossConfig: epsilon must be non-negative");
    if (max_sweeps < 1) throw ConfigError("LossConfig: max_sweeps must be >= 1");
    if (!(max_diverged_fraction >= 0.0 && max_diverged_fraction <= 1.0))
      throw ConfigError("LossConfig: max_diverged_fraction must lie in [0, 1]");
  }
};

/// Closed-loop data for a batch of initial points (columns).
struct TrajectoryData {
  Eigen::MatrixXd points;     // d x N
  Eigen::MatrixXd endpoints;  // d x N
  Eigen::VectorXd rewards;    // N
  std::vector<std::uint8_t> diverged;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
};

struct SampleSet {
  TrajectoryData base;
  std::vector<TrajectoryData> shifted;  // H1 only: x + eps * G(:, j) for each control column j
  double discount_factor = 1.0;         // e^{-gamma tau}
  double epsilon = 0.0;
  double horizon = 0.0;

  [[nodiscard]] std::size_t size() const { return base.size(); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(base.points.rows()); }
  [[nodiscard]] bool has_shifted() const { return !shifted.empty(); }

  [[nodiscard]] bool sample_diverged(std::size_t i) const {
    if (base.diverged[i]) return true;
    for (const auto& s : shifted)
      if (s.diverged[i]) return true;
    return false;
  }
  [[nodiscard]] std::size_t diverged_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < size(); ++i) c += sample_diverged(i) ? 1 : 0;
    return c;
  }
  /// Samples that enter the design rows: all trajectories finite.
  [[nodiscard]] std::vector<std::size_t> used_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
      if (!sample_diverged(i)) idx.push_back(i);
    return idx;
  }
};

/// One closed-loop trajectory per column of `points`, computed in parallel.
inline TrajectoryData trajectory_batch(const ControlSystem& sys, const Policy& policy,
                                       const Eigen::MatrixXd& points, std::size_t n_steps,
                                       double h_time) {
  detail::require_shape(points.rows() == static_cast<Eigen::Index>(sys.d),
                        "trajectory_batch: point dimension mismatch");
  TrajectoryData out;
  const auto n = static_cast<std::size_t>(points.cols());
  out.points = points;
  out.endpoints.resize(points.rows(), points.cols());
  out.rewards.resize(points.cols());
  out.diverged.assign(n, 0);
  parallel_blocks(n, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      const Trajectory t = closed_loop_flow(sys, policy, points.col(col), n_steps, h_time);
      out.endpoints.col(col) = t.endpoint;
      out.rewards(col) = t.reward;
      out.diverged[i] = t.diverged ? 1 : 0;
    }
  });
  return out;
}

/// Integrates every sample point (and its shifted copies in H1 mode).
/// Throws InadmissiblePolicyError if the diverged fraction exceeds
/// config.max_diverged_fraction.
inline SampleSet assemble_sample_data(const ControlSystem& sys, const Policy& policy,
                                      const Eigen::MatrixXd& points, std::size_t n_steps,
                                      double h_time, const LossConfig& config) {
  config.validate();
  detail::require_shape(points.cols() >= 1, "assemble_sample_data: need at least one point");
  SampleSet s;
  s.horizon = static_cast<double>(n_steps) * h_time;
  s.discount_factor = std::exp(-sys.gamma * s.horizon);
  s.base = trajectory_batch(sys, policy, points, n_steps, h_time);
  if (config.variant == LossVariant::H1) {
    s.epsilon = config.epsilon;
    for (Eigen::Index j = 0; j < sys.G.cols(); ++j) {
      const Eigen::MatrixXd shifted = points.colwise() + config.epsilon * sys.G.col(j);
      s.shifted.push_back(trajectory_batch(sys, policy, shifted, n_steps, h_time));
    }
  }
  const std::size_t bad = s.diverged_count();
  if (static_cast<double>(bad) > config.max_diverged_fraction * static_cast<double>(s.size())) {
    std::ostringstream msg;
    msg << "policy not admissible on the sample domain: " << bad << " of " << s.size()
        << " closed-loop trajectories diverged";
    throw InadmissiblePolicyError(msg.str());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Loss evaluation by direct function evaluation.

struct LossTerms {
  double data = 0.0;          // 1/N sum of squared sample residuals
  double anchor_value = 0.0;  // delta1 v(0)^2
  double anchor_grad = 0.0;   // delta2 |grad v(0)|^2
  double ridge = 0.0;         // delta3 ||c||_F^2

  [[nodiscard]] double without_ridge() const { return data + anchor_value + anchor_grad; }
  [[nodiscard]] double total() const { return without_ridge() + ridge; }
};

inline double adaptive_delta3(const LossConfig& config, double loss_without_ridge) {
  if (!config.adaptive_delta3) return config.delta3;
  return std::max(config.delta3_floor, config.kappa * loss_without_ridge);
}

/// Penalized empirical loss evaluated with tt_eval at the sample points.
/// `delta3` < 0 selects the rule in `config` (adaptive: kappa times the
/// unregularized loss of `tt`).
inline LossTerms loss_terms(const TTTensor& tt, const SampleSet& samples, const OrthoBasis1D& basis,
                            const LossConfig& config, double delta3 = -1.0) {
  detail::require_shape(tt.order() == samples.dim(), "loss_terms: TT order must equal the state dimension");
  ValueEvaluator ev(tt, basis);
  const auto used = samples.used_indices();
  const double rho = samples.discount_factor;
  const auto at = [](const Eigen::MatrixXd& m, std::size_t i) {
    return std::span<const double>(m.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(m.rows()));
  };
  double sum = 0.0;
  for (std::size_t i : used) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double lhs = ev.value(at(samples.base.points, i)) - rho * ev.value(at(samples.base.endpoints, i));
    const double res = lhs - samples.base.rewards(ii);
    sum += res * res;
    if (config.variant != LossVariant::H1) continue;
    for (const auto& sh : samples.shifted) {
      const double lhs_s = ev.value(at(sh.points, i)) - rho * ev.value(at(sh.endpoints, i));
      const double r = ((lhs_s - lhs) - (sh.rewards(ii) - samples.base.rewards(ii))) / samples.epsilon;
      sum += r * r;
    }
  }
  LossTerms t;
  t.data = used.empty() ? 0.0 : sum / static_cast<double>(used.size());
  const std::vector<double> zero(tt.order(), 0.0);
  const auto f0 = FeatureVectors::from_basis(basis, zero, true);
  const double v0 = tt_eval(tt, f0);
  t.anchor_value = config.delta1 * v0 * v0;
  t.anchor_grad = config.delta2 * tt_grad_eval(tt, f0).squaredNorm();
  const double d3 = delta3 >= 0.0 ? delta3 : adaptive_delta3(config, t.without_ridge());
  const double nrm = tt_norm(tt);
  t.ridge = d3 * nrm * nrm;
  return t;
}

inline double residual(const TTTensor& tt, const SampleSet& samples, const OrthoBasis1D& basis,
                       const LossConfig& config, double delta3 = -1.0) {
  return loss_terms(tt, samples, basis, config, delta3).total();
}

// ---------------------------------------------------------------------------
// Local solves.

/// Minimizer of ||A c - rhs||^2 + delta3 ||c||^2 given the normal matrix
/// A^T A and A^T rhs. Cholesky with one refinement step; if the factorization
/// fails or is too ill-conditioned, eigenvalues are floored (delta3 > 0) or a
/// ConditioningError is raised (delta3 = 0).
inline Eigen::VectorXd solve_normal(const Eigen::MatrixXd& ata, const Eigen::VectorXd& atb, double delta3) {
  const Eigen::Index n = ata.rows();
  Eigen::MatrixXd m = ata;
  m.diagonal().array() += delta3;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-15) {
    Eigen::VectorXd c = llt.solve(atb);
    c += llt.solve(Eigen::VectorXd(atb - m * c));
    return c;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double top = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  if (delta3 <= 0.0)
    throw ConditioningError("solve_local: normal matrix is numerically singular and delta3 = 0");
  const double floor = std::max(delta3, 1e-15 * top);
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i) inv(i) = 1.0 / std::max(lam(i), floor);
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return v * inv.cwiseProduct(v.transpose() * atb);
}

inline Eigen::VectorXd solve_local(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, double delta3) {
  detail::require_shape(a.rows() >= 1 && a.rows() == rhs.size(), "solve_local: A and rhs shapes mismatch");
  if (!(delta3 >= 0.0)) throw ShapeError("solve_local: delta3 must be non-negative");
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(a.cols(), a.cols());
  ata.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  ata.triangularView<Eigen::StrictlyUpper>() = ata.transpose();
  return solve_normal(ata, a.transpose() * rhs, delta3);
}

// ---------------------------------------------------------------------------
// ALS.

struct LocalSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
};

struct SweepReport {
  double start_loss = 0.0;  // penalized loss before the first micro-step
  double loss = 0.0;        // penalized loss after the sweep, same delta3
  double delta3 = 0.0;
  std::vector<double> micro_losses;      // loss kept after each micro-step
  std::vector<double> candidate_losses;  // loss of each solver output before acceptance
  std::size_t rejected_steps = 0;
  double max_relative_increase = 0.0;
};

struct AlsReport {
  std::vector<SweepReport> sweeps;
  double final_loss = 0.0;
  [[nodiscard]] std::size_t rejected_steps() const {
    std::size_t r = 0;
    for (const auto& s : sweeps) r += s.rejected_steps;
    return r;
  }
};

/// Holds basis evaluations at every evaluation point and the left/right
/// partial contractions (stacks) of the TT being optimized.
///
/// Evaluation points are laid out in groups of N used samples: base points,
/// endpoints, then (H1) shifted points and shifted endpoints per control
/// column.
class AlsEngine {
 public:
  AlsEngine(const SampleSet& samples, const OrthoBasis1D& basis, LossConfig config)
      : samples_(&samples), basis_(&basis), config_(std::move(config)) {
    config_.validate();
    if (config_.variant == LossVariant::H1)
      detail::require_shape(samples.has_shifted(), "AlsEngine: H1 loss needs shifted sample data");
    used_ = samples.used_indices();
    if (used_.empty()) throw InadmissiblePolicyError("AlsEngine: every sample trajectory diverged");
    n_used_ = used_.size();
    d_ = samples.dim();
    n_shift_ = config_.variant == LossVariant::H1 ? samples.shifted.size() : 0;
    const std::size_t groups = 2 + 2 * n_shift_;
    const auto n_basis = static_cast<Eigen::Index>(basis.size());
    const auto p = static_cast<Eigen::Index>(groups * n_used_);
    psi_.assign(d_, Eigen::MatrixXd(p, n_basis));
    std::vector<const Eigen::MatrixXd*> sources = {&samples.base.points, &samples.base.endpoints};
    for (std::size_t j = 0; j < n_shift_; ++j) {
      sources.push_back(&samples.shifted[j].points);
      sources.push_back(&samples.shifted[j].endpoints);
    }
    Eigen::VectorXd buf(n_basis);
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t s = 0; s < n_used_; ++s) {
        const auto e = static_cast<Eigen::Index>(g * n_used_ + s);
        for (std::size_t k = 0; k < d_; ++k) {
          basis.eval_all((*sources[g])(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(used_[s])),
                         std::span<double>(buf.data(), static_cast<std::size_t>(n_basis)));
          psi_[k].row(e) = buf.transpose();
        }
      }
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_used_));
    rhs_.resize(static_cast<Eigen::Index>(n_used_ * (1 + n_shift_) + 1 + d_));
    rhs_.setZero();
    for (std::size_t s = 0; s < n_used_; ++s) {
      const auto i = static_cast<Eigen::Index>(used_[s]);
      const double r = samples.base.rewards(i);
      rhs_(static_cast<Eigen::Index>(s)) = inv_sqrt_n * r;
      for (std::size_t j = 0; j < n_shift_; ++j)
        rhs_(static_cast<Eigen::Index>((1 + j) * n_used_ + s)) =
            inv_sqrt_n * (samples.shifted[j].rewards(i) - r) / samples.epsilon;
    }
    const std::vector<double> zero(d_, 0.0);
    origin_ = FeatureVectors::from_basis(basis, zero, true);
  }

  [[nodiscard]] std::size_t used_samples() const { return n_used_; }
  [[nodiscard]] const LossConfig& config() const { return config_; }

  /// Canonicalizes `tt` at `pos` and rebuilds the stacks for it. The engine
  /// keeps a pointer to `tt` until the next attach.
  void attach(TTTensor& tt, std::size_t pos) {
    detail::require_shape(tt.order() == d_, "AlsEngine: TT order must equal the state dimension");
    for (std::size_t k = 0; k < d_; ++k)
      detail::require_shape(tt.dim(k) == static_cast<std::size_t>(basis_->size()),
                            "AlsEngine: TT mode sizes must equal the basis size");
    tt.canonicalize(pos);
    tt_ = &tt;
    pos_ = pos;
    const Eigen::Index p = psi_[0].rows();
    left_.assign(d_, Eigen::MatrixXd());
    right_.assign(d_, Eigen::MatrixXd());
    left_[0] = Eigen::MatrixXd::Ones(p, 1);
    for (std::size_t k = 0; k < pos; ++k) push_left(k);
    right_[d_ - 1] = Eigen::MatrixXd::Ones(p, 1);
    for (std::size_t k = d_ - 1; k > pos; --k) push_right(k);
  }

  /// Design matrix and right-hand side at the attached position: sample rows
  /// scaled by 1/sqrt(N), then sqrt(delta1) times the value anchor at 0 and
  /// sqrt(delta2) times the d gradient anchors at 0.
  [[nodiscard]] LocalSystem local_system() const {
    require_attached();
    const TTTensor& tt = *tt_;
    const std::size_t l = pos_;
    const auto rl = static_cast<Eigen::Index>(tt.left_rank(l));
    const auto n = static_cast<Eigen::Index>(tt.dim(l));
    const auto rr = static_cast<Eigen::Index>(tt.right_rank(l));
    const Eigen::Index cols = rl * n * rr;
    const auto nu = static_cast<Eigen::Index>(n_used_);
    LocalSystem sys;
    sys.A.resize(static_cast<Eigen::Index>(rhs_.size()), cols);
    sys.rhs = rhs_;
    const double rho = samples_->discount_factor;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_used_));
    const Eigen::MatrixXd& L = left_[l];
    const Eigen::MatrixXd& R = right_[l];
    const Eigen::MatrixXd& P = psi_[l];
    Eigen::RowVectorXd f0(cols), f1(cols), base(cols);
    const auto feature = [&](Eigen::Index e, Eigen::RowVectorXd& out) {
      Eigen::Index idx = 0;
      for (Eigen::Index a = 0; a < rl; ++a)
        for (Eigen::Index i = 0; i < n; ++i) {
          const double w = L(e, a) * P(e, i);
          for (Eigen::Index b = 0; b < rr; ++b) out(idx++) = w * R(e, b);
        }
    };
    for (Eigen::Index s = 0; s < nu; ++s) {
      feature(s, f0);
      feature(nu + s, f1);
      base = f0 - rho * f1;
      sys.A.row(s) = inv_sqrt_n * base;
      for (std::size_t j = 0; j < n_shift_; ++j) {
        const auto g = static_cast<Eigen::Index>(2 + 2 * j);
        feature(g * nu + s, f0);
        feature((g + 1) * nu + s, f1);
        sys.A.row(static_cast<Eigen::Index>(1 + j) * nu + s) =
            (inv_sqrt_n / samples_->epsilon) * ((f0 - rho * f1) - base);
      }
    }
    const Eigen::Index anchor = nu * static_cast<Eigen::Index>(1 + n_shift_);
    sys.A.row(anchor) = std::sqrt(config_.delta1) * local_features(tt, l, origin_).transpose();
    FeatureVectors fk;
    fk.values = origin_.values;
    for (std::size_t k = 0; k < d_; ++k) {
      fk.values[k] = origin_.derivs[k];
      sys.A.row(anchor + 1 + static_cast<Eigen::Index>(k)) =
          std::sqrt(config_.delta2) * local_features(tt, l, fk).transpose();
      fk.values[k] = origin_.values[k];
    }
    return sys;
  }

  /// One sweep: optimize cores 0..d-2 moving right, then d-1..1 moving left.
  /// delta3 is fixed for the whole sweep from the loss at its start.
  SweepReport sweep(TTTensor& tt) {
    if (tt_ != &tt || pos_ != 0 || tt.canon_pos() != std::optional<std::size_t>(0)) attach(tt, 0);
    SweepReport rep;
    rep.delta3 = -1.0;
    if (d_ == 1) {
      optimize(rep);
      rep.loss = rep.micro_losses.back();
      return rep;
    }
    for (std::size_t l = 0; l + 1 < d_; ++l) {
      optimize(rep);
      tt.move_canon_right();
      push_left(pos_);
      ++pos_;
    }
    for (std::size_t l = d_ - 1; l > 0; --l) {
      optimize(rep);
      tt.move_canon_left();
      push_right(pos_);
      --pos_;
    }
    rep.loss = rep.micro_losses.back();
    return rep;
  }

 private:
  void require_attached() const {
    if (tt_ == nullptr) throw ShapeError("AlsEngine: no TT attached");
    if (tt_->canon_pos() != pos_)
      throw ShapeError("AlsEngine: attached TT is not canonical at the engine position");
  }

  // left_[k + 1] from left_[k] and core k.
  void push_left(std::size_t k) {
    const RowMatrix& core = tt_->core(k);
    const auto n = static_cast<Eigen::Index>(tt_->dim(k));
    const Eigen::Index rl = core.rows() / n;
    const Eigen::Index p = psi_[k].rows();
    Eigen::MatrixXd m(p, rl * n);
    for (Eigen::Index a = 0; a < rl; ++a)
      for (Eigen::Index i = 0; i < n; ++i) m.col(a * n + i) = left_[k].col(a).cwiseProduct(psi_[k].col(i));
    left_[k + 1].noalias() = m * core;
  }

  // right_[k - 1] from right_[k] and core k.
  void push_right(std::size_t k) {
    const auto n = static_cast<Eigen::Index>(tt_->dim(k));
    const auto rr = static_cast<Eigen::Index>(tt_->right_rank(k));
    const Eigen::Index p = psi_[k].rows();
    Eigen::MatrixXd m(p, n * rr);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index b = 0; b < rr; ++b) m.col(i * rr + b) = psi_[k].col(i).cwiseProduct(right_[k].col(b));
    right_[k - 1].noalias() = m * tt_->right_unfolding(k).transpose();
  }

  void optimize(SweepReport& rep) {
    const LocalSystem sys = local_system();
    const RowMatrix& core = tt_->core(pos_);
    const Eigen::Map<const Eigen::VectorXd> c_old(core.data(), core.size());
    const double fit_old = (sys.A * c_old - sys.rhs).squaredNorm();
    if (rep.delta3 < 0.0) {
      rep.delta3 = adaptive_delta3(config_, fit_old);
      rep.start_loss = fit_old + rep.delta3 * c_old.squaredNorm();
    }
    const double delta3 = rep.delta3;
    const double loss_old = fit_old + delta3 * c_old.squaredNorm();

    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(sys.A.cols(), sys.A.cols());
    ata.selfadjointView<Eigen::Lower>().rankUpdate(sys.A.transpose());
    ata.triangularView<Eigen::StrictlyUpper>() = ata.transpose();
    const Eigen::VectorXd c_new = solve_normal(ata, sys.A.transpose() * sys.rhs, delta3);
    const double loss_new = (sys.A * c_new - sys.rhs).squaredNorm() + delta3 * c_new.squaredNorm();
    rep.candidate_losses.push_back(loss_new);

    const double increase = (loss_new - loss_old) / std::max(loss_old, 1e-300);
    rep.max_relative_increase = std::max(rep.max_relative_increase, increase);
    if (increase > config_.increase_tol) {
      if (config_.strict_monotonicity) {
        std::ostringstream msg;
        msg << "ALS micro-step at core " << pos_ << " increased the loss by a relative " << increase;
        throw ConsistencyError(msg.str());
      }
      ++rep.rejected_steps;
      rep.micro_losses.push_back(loss_old);
      return;
    }
    RowMatrix next(core.rows(), core.cols());
    std::copy(c_new.data(), c_new.data() + c_new.size(), next.data());
    tt_->set_core(pos_, std::move(next));
    rep.micro_losses.push_back(loss_new);
  }

  const SampleSet* samples_;
  const OrthoBasis1D* basis_;
  LossConfig config_;
  std::vector<std::size_t> used_;
  std::size_t n_used_ = 0;
  std::size_t d_ = 0;
  std::size_t n_shift_ = 0;
  std::vector<Eigen::MatrixXd> psi_;  // per mode: P x n basis values
  Eigen::VectorXd rhs_;
  FeatureVectors origin_;
  TTTensor* tt_ = nullptr;
  std::size_t pos_ = 0;
  std::vector<Eigen::MatrixXd> left_, right_;  // P x r_{k-1}, P x r_k
};

/// Design matrix and right-hand side for core `position` of a TT that is
/// already canonical there.
inline LocalSystem local_system(const TTTensor& tt, std::size_t position, const SampleSet& samples,
                                const OrthoBasis1D& basis, const LossConfig& config) {
  detail::require_shape(position < tt.order(), "local_system: position out of range");
  if (tt.canon_pos() != position)
    throw ShapeError("local_system: TT is not canonicalized at position " + std::to_string(position));
  AlsEngine engine(samples, basis, config);
  TTTensor copy = tt;
  engine.attach(copy, position);
  return engine.local_system();
}

inline SweepReport als_sweep(TTTensor& tt, const SampleSet& samples, const OrthoBasis1D& basis,
                             const LossConfig& config) {
  AlsEngine engine(samples, basis, config);
  return engine.sweep(tt);
}

/// Repeats sweeps until max_sweeps or until a sweep lowers its own
/// penalized loss (fixed delta3) by less than sweep_tol relative.
inline AlsReport als_solve(TTTensor& tt, const SampleSet& samples, const OrthoBasis1D& basis,
                           const LossConfig& config) {
  AlsEngine engine(samples, basis, config);
  AlsReport rep;
  for (std::size_t s = 0; s < config.max_sweeps; ++s) {
    rep.sweeps.push_back(engine.sweep(tt));
    const SweepReport& last = rep.sweeps.back();
    if (!std::isfinite(last.loss)) throw NumericalError("als_solve: non-finite loss");
    if (last.start_loss - last.loss <= config.sweep_tol * std::max(last.start_loss, 1e-300)) break;
  }
  rep.final_loss = rep.sweeps.back().loss;
  return rep;
}

}  // namespace hjbtt
