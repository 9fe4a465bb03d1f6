#pragma once

// Realized closed-loop costs, the result table and its aggregates.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/dynamics.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/parallel.hpp"
#include "hjbtt/policy.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt::harness {

struct CostResult {
  double cost = 0.0;
  bool stabilized = false;
  bool diverged = false;
  std::size_t steps = 0;
  double final_norm = 0.0;  // max-norm of the last state
};

/// J(x, alpha) integrated over [0, t_sim]. Stabilized means the trajectory
/// did not diverge and ends with max-norm below `stabilization_threshold`.
inline CostResult cost_of_policy(const ControlSystem& sys, const Policy& policy, const Eigen::VectorXd& x,
                                 double t_sim, double h_time, double stabilization_threshold,
                                 double divergence_threshold = 1e6) {
  if (!(t_sim > 0.0) || !(h_time > 0.0)) throw ConfigError("cost_of_policy: t_sim and h_time must be positive");
  const auto n_steps = static_cast<std::size_t>(std::llround(t_sim / h_time));
  FlowOptions opts;
  opts.divergence_threshold = divergence_threshold;
  const Trajectory traj = closed_loop_flow(sys, policy, x, std::max<std::size_t>(n_steps, 1), h_time, opts);
  CostResult r;
  r.cost = traj.reward;
  r.diverged = traj.diverged;
  r.steps = traj.steps;
  r.final_norm = traj.endpoint.size() ? traj.endpoint.cwiseAbs().maxCoeff() : 0.0;
  r.stabilized = !traj.diverged && r.final_norm < stabilization_threshold;
  return r;
}

struct ResultRow {
  std::string experiment;
  std::string controller;
  std::string iv_set;
  std::string iv_id;
  std::optional<double> predicted;  // v(x) for value-based controllers
  double realized_cost = 0.0;
  bool stabilized = false;
  std::size_t steps = 0;
  std::optional<double> wall_time;
};

inline std::string iv_label(const std::string& set, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%05zu", index);
  return set + buf;
}

struct Aggregate {
  std::string iv_set;
  std::string controller;
  std::size_t count = 0;
  std::size_t non_stabilized = 0;
  std::size_t common_count = 0;  // initial values stabilized by every feedback controller
  double mean_cost_common = std::nan("");
  double mean_cost_all = std::nan("");
};

struct PredictionViolation {
  std::string controller;
  std::string iv_id;
  double predicted = 0.0;
  double realized = 0.0;
  double relative_gap = 0.0;
};

class ResultTable {
 public:
  std::vector<ResultRow> rows;

  void add(ResultRow r) { rows.push_back(std::move(r)); }

  void sort() {
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
      return std::tie(a.experiment, a.iv_set, a.iv_id, a.controller) <
             std::tie(b.experiment, b.iv_set, b.iv_id, b.controller);
    });
  }

  /// Per (iv set, controller) statistics. The common subset is the set of
  /// initial values stabilized by every controller in `feedback` that was
  /// evaluated on that set; open-loop rows are averaged over the same subset.
  [[nodiscard]] std::vector<Aggregate> aggregates(const std::set<std::string>& feedback) const {
    std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
    std::map<std::string, std::map<std::string, int>> stabilized_by;  // set -> iv -> count
    std::map<std::string, std::set<std::string>> controllers_on_set;
    for (const auto& r : rows) {
      groups[{r.iv_set, r.controller}].push_back(&r);
      if (feedback.count(r.controller)) {
        controllers_on_set[r.iv_set].insert(r.controller);
        stabilized_by[r.iv_set][r.iv_id] += r.stabilized ? 1 : 0;
      }
    }
    std::vector<Aggregate> out;
    for (const auto& [key, group] : groups) {
      Aggregate a;
      a.iv_set = key.first;
      a.controller = key.second;
      const auto n_feedback = static_cast<int>(controllers_on_set[key.first].size());
      double sum_all = 0.0, sum_common = 0.0;
      for (const ResultRow* r : group) {
        ++a.count;
        if (!r->stabilized) ++a.non_stabilized;
        sum_all += r->realized_cost;
        const auto& s = stabilized_by[key.first];
        const auto it = s.find(r->iv_id);
        if (n_feedback > 0 && it != s.end() && it->second == n_feedback) {
          ++a.common_count;
          sum_common += r->realized_cost;
        }
      }
      if (a.count) a.mean_cost_all = sum_all / static_cast<double>(a.count);
      if (a.common_count) a.mean_cost_common = sum_common / static_cast<double>(a.common_count);
      out.push_back(a);
    }
    return out;
  }

  /// Stabilized rows whose prediction misses the realized cost by more than
  /// `threshold` relative to 1 + J.
  [[nodiscard]] std::vector<PredictionViolation> prediction_violations(double threshold) const {
    std::vector<PredictionViolation> out;
    for (const auto& r : rows) {
      if (!r.predicted || !r.stabilized) continue;
      const double gap = std::abs(*r.predicted - r.realized_cost) / (1.0 + r.realized_cost);
      if (gap > threshold) out.push_back({r.controller, r.iv_id, *r.predicted, r.realized_cost, gap});
    }
    return out;
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : "NA"; }

}  // namespace detail

inline void write_results_csv(const std::string& path, const ResultTable& table) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "experiment,controller,iv_id,predicted_value,realized_cost,stabilized,wall_time_s\n";
  for (const auto& r : table.rows)
    os << r.experiment << ',' << r.controller << ',' << r.iv_id << ',' << detail::fmt_opt(r.predicted) << ','
       << detail::fmt_num(r.realized_cost) << ',' << (r.stabilized ? 1 : 0) << ',' << detail::fmt_opt(r.wall_time)
       << '\n';
  if (!os) throw Error("write_results_csv: write failed for " + path);
}

inline void write_summary_csv(const std::string& path, const std::string& experiment,
                              const std::vector<Aggregate>& aggregates) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "experiment,iv_set,controller,count,non_stabilized,common_count,mean_cost_common,mean_cost_all\n";
  for (const auto& a : aggregates)
    os << experiment << ',' << a.iv_set << ',' << a.controller << ',' << a.count << ',' << a.non_stabilized << ','
       << a.common_count << ',' << detail::fmt_num(a.mean_cost_common) << ',' << detail::fmt_num(a.mean_cost_all)
       << '\n';
  if (!os) throw Error("write_summary_csv: write failed for " + path);
}

/// A feedback controller under evaluation; `value` (with its basis) gives the
/// predicted cost v(x) when present.
struct NamedController {
  std::string id;
  Policy policy;
  std::optional<TTTensor> value;
  std::optional<OrthoBasis1D> basis;
};

struct EvaluationSettings {
  std::string experiment;
  double t_sim = 5.0;
  double h_time = 1e-3;
  double stabilization_threshold = 2e-3;
  double divergence_threshold = 1e6;
  bool record_timing = false;
};

/// Evaluates every (initial value, controller) pair in parallel. `states` is
/// d x count; row i gets the id iv_label(iv_set, i).
inline std::vector<ResultRow> evaluate_controllers(const ControlSystem& sys,
                                                   const std::vector<NamedController>& controllers,
                                                   const std::string& iv_set, const Eigen::MatrixXd& states,
                                                   const EvaluationSettings& s) {
  hjbtt::detail::require_shape(states.rows() == static_cast<Eigen::Index>(sys.d),
                        "evaluate_controllers: initial values must have d rows");
  const auto n_iv = static_cast<std::size_t>(states.cols());
  const std::size_t n_pairs = n_iv * controllers.size();
  std::vector<ResultRow> rows(n_pairs);
  parallel_blocks(n_pairs, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t i = p / controllers.size();
      const NamedController& c = controllers[p % controllers.size()];
      const Eigen::VectorXd x = states.col(static_cast<Eigen::Index>(i));
      const auto t0 = std::chrono::steady_clock::now();
      const CostResult cr = cost_of_policy(sys, c.policy, x, s.t_sim, s.h_time, s.stabilization_threshold,
                                           s.divergence_threshold);
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ResultRow& r = rows[p];
      r.experiment = s.experiment;
      r.controller = c.id;
      r.iv_set = iv_set;
      r.iv_id = iv_label(iv_set, i);
      r.realized_cost = cr.cost;
      r.stabilized = cr.stabilized;
      r.steps = cr.steps;
      if (s.record_timing) r.wall_time = elapsed;
      if (c.value && c.basis) {
        ValueEvaluator ev(*c.value, *c.basis);
        r.predicted = ev.value(std::span<const double>(x.data(), sys.d));
      }
    }
  });
  return rows;
}

}  // namespace hjbtt::harness
