#pragma once

// Approximate policy iteration: alternate a Monte-Carlo least-squares solve
// of the linearized Bellman equation for the current feedback law with the
// update alpha = -1/2 B^{-1} G^T grad v.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/bellman_solver.hpp"
#include "hjbtt/dynamics.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/policy.hpp"
#include "hjbtt/qmc.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt {

struct IterationRecord {
  double loss = 0.0;
  double rel_change = 0.0;
  std::size_t diverged = 0;
  std::size_t sweeps = 0;
  std::size_t rejected_steps = 0;
  double delta3 = 0.0;
  double wall_time = 0.0;             // seconds spent in this iteration
  double cumulative_wall_time = 0.0;  // seconds since the start
};

struct PolicyIterationConfig {
  std::size_t max_iterations = 100;
  double tol = 1e-3;  // relative value change
  std::size_t n_samples = 4096;
  std::uint64_t seed = 0;  // QMC scramble seed of iteration k is seed + k
  bool scramble = true;
  std::size_t n_steps = 1000;
  double h_time = 1e-3;
  double loss_growth_factor = 10.0;
  std::size_t loss_growth_window = 3;
  std::function<void(std::size_t, const IterationRecord&)> on_iteration;  // progress hook

  void validate() const {
    if (max_iterations < 1) throw ConfigError("PolicyIterationConfig: max_iterations must be >= 1");
    if (!(tol >= 0.0)) throw ConfigError("PolicyIterationConfig: tol must be non-negative");
    if (n_samples < 1) throw ConfigError("PolicyIterationConfig: need at least one sample");
    if (n_steps < 1 || !(h_time > 0.0)) throw ConfigError("PolicyIterationConfig: invalid trajectory grid");
  }
};


struct PolicyIterationReport {
  std::vector<IterationRecord> records;
  std::size_t final_iterate = 0;
  std::string stop_reason;
};

struct PolicyIterationResult {
  TTTensor value;
  PolicyIterationReport report;
};

/// ||v_new - v_old||_F / max(||v_old||_F, 1e-14); the H1_mix distance under
/// an H1-orthonormal basis.
inline double value_diff_rel(const TTTensor& v_new, const TTTensor& v_old) {
  detail::require_shape(v_new.dims() == v_old.dims(), "value_diff_rel: dims mismatch");
  TTTensor diff = tt_add(v_new, tt_scale(v_old, -1.0));
  diff.canonicalize(0);
  return tt_norm(diff) / std::max(tt_norm(v_old), 1e-14);
}

/// Copies `tt` into a train with ranks `ranks` (>= the current ranks),
/// padding cores with zeros. The represented function is unchanged.
inline TTTensor tt_pad_ranks(const TTTensor& tt, const std::vector<std::size_t>& ranks) {
  TTTensor out = TTTensor::zero(tt.dims(), ranks);
  const std::size_t d = tt.order();
  std::vector<RowMatrix> cores;
  for (std::size_t k = 0; k < d; ++k) {
    RowMatrix c = out.core(k);
    const std::size_t n = tt.dim(k);
    detail::require_shape(tt.left_rank(k) <= out.left_rank(k) && tt.right_rank(k) <= out.right_rank(k),
                          "tt_pad_ranks: target ranks smaller than the current ranks");
    for (std::size_t a = 0; a < tt.left_rank(k); ++a)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < tt.right_rank(k); ++b)
          c(static_cast<Eigen::Index>(a * n + i), static_cast<Eigen::Index>(b)) = tt.entry(k, a, i, b);
    cores.push_back(std::move(c));
  }
  return TTTensor(std::move(cores), tt.dims());
}

/// Largest meaningful ranks: r_k <= min(prod_{i<=k} n_i, prod_{i>k} n_i).
inline std::vector<std::size_t> feasible_rank_bounds(const std::vector<std::size_t>& dims) {
  const std::size_t d = dims.size();
  std::vector<std::size_t> bounds(d > 0 ? d - 1 : 0);
  const auto capped_mul = [](std::size_t a, std::size_t b) {
    return a > (std::size_t{1} << 40) / std::max<std::size_t>(b, 1) ? (std::size_t{1} << 40) : a * b;
  };
  for (std::size_t k = 0; k + 1 < d; ++k) {
    std::size_t left = 1, right = 1;
    for (std::size_t i = 0; i <= k; ++i) left = capped_mul(left, dims[i]);
    for (std::size_t i = k + 1; i < d; ++i) right = capped_mul(right, dims[i]);
    bounds[k] = std::min(left, right);
  }
  return bounds;
}

/// Initial value train with the configured ranks: `start` rounded down to
/// and zero-padded up to `ranks`.
inline TTTensor fit_to_ranks(TTTensor start, const std::vector<std::size_t>& ranks) {
  if (start.order() > 1) start = tt_round(std::move(start), ranks, 0.0);
  std::vector<std::size_t> target(ranks.size());
  const auto cur = start.ranks();
  for (std::size_t k = 0; k < ranks.size(); ++k) target[k] = std::max(ranks[k], cur[k]);
  return tt_pad_ranks(start, target);
}

/// Runs policy iteration from `initial_policy`, warm-starting every ALS solve
/// from the previous value train (`initial_value` for the first one).
inline PolicyIterationResult policy_iteration(const ControlSystem& sys, const OrthoBasis1D& basis,
                                              TTTensor initial_value, const LossConfig& loss,
                                              const PolicyIterationConfig& pi, const Policy& initial_policy) {
  loss.validate();
  pi.validate();
  detail::require_shape(initial_value.order() == sys.d, "policy_iteration: TT order must equal the state dimension");
  detail::require_shape(initial_policy.control_dim() == sys.m, "policy_iteration: control dimension mismatch");
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  PolicyIterationResult res;
  res.value = std::move(initial_value);
  Policy policy = initial_policy;
  std::vector<double> losses;
  for (std::size_t it = 0; it < pi.max_iterations; ++it) {
    const auto t0 = clock::now();
    const Eigen::MatrixXd points =
        generate_qmc_samples(sys.d, sys.domain_halfwidth, pi.n_samples, pi.seed + it, pi.scramble);
    SampleSet samples;
    try {
      samples = assemble_sample_data(sys, policy, points, pi.n_steps, pi.h_time, loss);
    } catch (const InadmissiblePolicyError& e) {
      if (it == 0) throw InadmissiblePolicyError(std::string("initial policy: ") + e.what());
      res.report.stop_reason = "inadmissible policy at iteration " + std::to_string(it) + ": " + e.what();
      return res;
    }
    TTTensor next = res.value;
    const AlsReport als = als_solve(next, samples, basis, loss);

    IterationRecord rec;
    rec.loss = als.final_loss;
    rec.rel_change = value_diff_rel(next, res.value);
    rec.diverged = samples.diverged_count();
    rec.sweeps = als.sweeps.size();
    rec.rejected_steps = als.rejected_steps();
    rec.delta3 = als.sweeps.back().delta3;
    const auto t1 = clock::now();
    rec.wall_time = std::chrono::duration<double>(t1 - t0).count();
    rec.cumulative_wall_time = std::chrono::duration<double>(t1 - t_start).count();
    res.report.records.push_back(rec);
    res.report.final_iterate = it;
    res.value = std::move(next);
    losses.push_back(rec.loss);
    if (pi.on_iteration) pi.on_iteration(it, rec);
    policy = Policy::from_value(res.value, basis, sys.G, sys.B);

    if (rec.rel_change < pi.tol) {
      res.report.stop_reason = "converged: relative value change below tolerance";
      return res;
    }
    const std::size_t w = pi.loss_growth_window;
    if (w > 0 && losses.size() > w && losses.back() > pi.loss_growth_factor * losses[losses.size() - 1 - w]) {
      res.report.stop_reason = "loss diverged: grew by more than the configured factor";
      return res;
    }
  }
  res.report.stop_reason = "maximum iterations reached";
  return res;
}

}  // namespace hjbtt
