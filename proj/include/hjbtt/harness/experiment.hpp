#pragma once

// End-to-end experiment driver: LQR and open-loop baselines, policy
// iteration per TT controller, evaluation on the configured initial values
// and the output files (results.csv, summary.csv, value_<id>.tthjb,
// report.json).

#include <Eigen/Dense>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "hjbtt/baselines.hpp"
#include "hjbtt/basis.hpp"
#include "hjbtt/dynamics.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/harness/config.hpp"
#include "hjbtt/harness/evaluation.hpp"
#include "hjbtt/harness/ivs.hpp"
#include "hjbtt/parallel.hpp"
#include "hjbtt/policy.hpp"
#include "hjbtt/policy_iteration.hpp"
#include "hjbtt/serialization.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt::harness {

struct LqrBaseline {
  Linearization lin;
  RiccatiSolution care;
  TTTensor value;  // x^T P x as a rounded train
  Policy policy = Policy::zero(1);
};

/// Linearizes at the origin and solves the CARE with Q = c I, R = B, where
/// c |y|^2 is the state cost.
inline LqrBaseline compute_lqr(const ControlSystem& sys, const OrthoBasis1D& basis, double round_tol) {
  LqrBaseline out;
  out.lin = linearize(sys);
  const auto d = static_cast<Eigen::Index>(sys.d);
  const Eigen::MatrixXd q = sys.cost_weight * Eigen::MatrixXd::Identity(d, d);
  out.care = solve_care(out.lin.A, out.lin.G, q, sys.B);
  out.policy = Policy::linear(out.care.K);
  if (basis.max_degree() >= 2) out.value = lqr_value_as_tt(out.care.P, basis, round_tol);
  return out;
}

/// Explicit ranks, or the LQR train ranks capped at max_rank and at the
/// feasibility bounds.
inline std::vector<std::size_t> resolve_ranks(const ExperimentConfig& cfg, const TTTensor& lqr_value) {
  if (!cfg.ranks.explicit_ranks.empty()) return cfg.ranks.explicit_ranks;
  const auto bounds = feasible_rank_bounds(std::vector<std::size_t>(cfg.model.d, static_cast<std::size_t>(cfg.degree + 1)));
  std::vector<std::size_t> r = lqr_value.order() == cfg.model.d ? lqr_value.ranks()
                                                                 : std::vector<std::size_t>(cfg.model.d - 1, 1);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::max<std::size_t>(1, std::min({r[k], cfg.ranks.max_rank, bounds[k]}));
  return r;
}

inline Eigen::MatrixXd materialize_ivs(const ExperimentConfig& cfg, const IvSetConfig& s) {
  if (s.kind == "polynomial")
    return sample_initial_polynomial(cfg.model.d, s.count, s.min_degree, s.max_degree, s.rescale, s.seed);
  if (s.kind == "uniform") return sample_initial_uniform(cfg.model.d, s.count, s.low, s.high, s.seed);
  return read_states_csv(s.path, cfg.model.d);
}

inline std::size_t count_out_of_domain(const Eigen::MatrixXd& states, double halfwidth) {
  std::size_t n = 0;
  for (Eigen::Index s = 0; s < states.cols(); ++s)
    if (states.col(s).cwiseAbs().maxCoeff() > halfwidth) ++n;
  return n;
}

inline json pi_report_json(const PolicyIterationReport& r) {
  json recs = json::array();
  for (const auto& x : r.records)
    recs.push_back({{"loss", x.loss},
                    {"rel_change", x.rel_change},
                    {"diverged_samples", x.diverged},
                    {"sweeps", x.sweeps},
                    {"rejected_steps", x.rejected_steps},
                    {"delta3", x.delta3},
                    {"wall_time_s", x.wall_time},
                    {"cumulative_wall_time_s", x.cumulative_wall_time}});
  return {{"iterations", recs}, {"final_iterate", r.final_iterate}, {"stop_reason", r.stop_reason}};
}

inline json lqr_report_json(const LqrBaseline& l) {
  json j;
  j["care_residual"] = l.care.residual_norm;
  j["kleinman_iterations"] = l.care.iterations;
  j["gain"] = std::vector<double>(l.care.K.data(), l.care.K.data() + l.care.K.size());
  if (l.value.order() > 0) j["tt_ranks"] = l.value.ranks();
  return j;
}

struct SolvedController {
  ControllerConfig config;
  PolicyIterationResult result;
};

class Logger {
 public:
  explicit Logger(std::ostream* os) : os_(os) {}
  template <class... Args>
  void operator()(const Args&... args) const {
    if (!os_) return;
    ((*os_) << ... << args) << std::endl;
  }

 private:
  std::ostream* os_;
};

inline OrthoBasis1D make_basis(const ExperimentConfig& cfg) {
  return OrthoBasis1D(-cfg.domain_halfwidth, cfg.domain_halfwidth, cfg.degree, cfg.inner_product);
}

/// Policy iteration for every configured TT controller, warm-started from
/// the LQR train fitted to the configured ranks.
inline std::vector<SolvedController> solve_controllers(const ExperimentConfig& cfg, const ControlSystem& sys,
                                                       const OrthoBasis1D& basis, const LqrBaseline& lqr,
                                                       const Logger& log) {
  const auto ranks = resolve_ranks(cfg, lqr.value);
  const std::vector<std::size_t> dims(cfg.model.d, static_cast<std::size_t>(basis.size()));
  const TTTensor start = lqr.value.order() == cfg.model.d ? fit_to_ranks(lqr.value, ranks) : TTTensor::zero(dims, ranks);
  const Policy initial = cfg.initial_policy == "lqr" ? lqr.policy : Policy::zero(sys.m);
  std::vector<SolvedController> out;
  for (const auto& c : cfg.controllers) {
    log("[", cfg.name, "] policy iteration for ", c.id, " (N = ", c.n_samples, ")");
    PolicyIterationConfig pi = cfg.pi_config(c);
    pi.on_iteration = [&log](std::size_t k, const IterationRecord& r) {
      log("  it ", k, ": loss ", r.loss, ", rel change ", r.rel_change, ", diverged ", r.diverged, ", ",
          std::fixed, std::setprecision(1), r.wall_time, std::defaultfloat, std::setprecision(6), " s");
    };
    SolvedController s{c, policy_iteration(sys, basis, start, cfg.loss_config(c), pi, initial)};
    log("  stop: ", s.result.report.stop_reason);
    out.push_back(std::move(s));
  }
  return out;
}

struct OpenLoopRow {
  ResultRow row;
  OpenLoopSolution solution;
  std::string warm_start;  // "zero" or the id of the feedback controller used
};

/// Open-loop gradient descent from the first `count` states of `states`.
/// Descent starts from the cheapest of u = 0 and the sample-and-hold
/// controls of each warm-start controller; from rescaled profiles the
/// uncontrolled flow can blow up, leaving u = 0 with no usable gradient.
inline std::vector<OpenLoopRow> run_open_loop(const ExperimentConfig& cfg, const ControlSystem& sys,
                                              const std::string& iv_set, const Eigen::MatrixXd& states,
                                              const std::vector<NamedController>& warm_starts = {}) {
  const auto count = std::min<std::size_t>(cfg.open_loop.count, static_cast<std::size_t>(states.cols()));
  const auto n_steps = std::max<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.open_loop.t_end / cfg.open_loop.h_time)), 1);
  const double h = cfg.open_loop.t_end / static_cast<double>(n_steps);
  std::vector<OpenLoopRow> out(count);
  parallel_blocks(count, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::VectorXd x0 = states.col(static_cast<Eigen::Index>(i));
      const auto t0 = std::chrono::steady_clock::now();
      OpenLoopRow& o = out[i];
      o.row.experiment = cfg.name;
      o.row.controller = "open-loop";
      o.row.iv_set = iv_set;
      o.row.iv_id = iv_label(iv_set, i);
      OpenLoopOptions opts;
      opts.max_iters = cfg.open_loop.max_iters;
      o.warm_start = "zero";
      double best = open_loop_cost(sys, x0, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.m),
                                                                  static_cast<Eigen::Index>(n_steps)), h);
      for (const auto& c : warm_starts) {
        Eigen::MatrixXd u = feedback_controls(sys, c.policy, x0, h, n_steps);
        const double cost = open_loop_cost(sys, x0, u, h);
        if (cost < best) {
          best = cost;
          opts.initial_controls = std::move(u);
          o.warm_start = c.id;
        }
      }
      try {
        o.solution = open_loop_gradient_descent(sys, x0, cfg.open_loop.t_end, n_steps, opts);
        std::vector<Eigen::VectorXd> traj;
        open_loop_cost(sys, x0, o.solution.controls, h, &traj);
        o.row.realized_cost = o.solution.cost;
        o.row.stabilized = !traj.empty() && std::isfinite(o.solution.cost) &&
                           traj.back().cwiseAbs().maxCoeff() < cfg.stabilization_threshold();
      } catch (const NumericalError& e) {
        o.solution.note = e.what();
        o.row.realized_cost = std::numeric_limits<double>::infinity();
        o.row.stabilized = false;
      }
      o.row.steps = n_steps;
      if (cfg.record_timing)
        o.row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });
  return out;
}

struct ExperimentOptions {
  std::optional<std::string> output_dir;  // overrides the config
  std::ostream* log = nullptr;
};

struct ExperimentOutcome {
  ResultTable table;
  std::vector<Aggregate> aggregates;
  json report;
  std::string output_dir;
};

inline std::string ensure_output_dir(const ExperimentConfig& cfg, const ExperimentOptions& opts) {
  const std::string dir = opts.output_dir.value_or(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

/// The full comparison run. On failure, report.json is still written with
/// whatever finished and an "error" entry, then the exception propagates.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts = {}) {
  cfg.validate();
  const Logger log(opts.log);
  ExperimentOutcome out;
  out.output_dir = ensure_output_dir(cfg, opts);
  const std::filesystem::path dir(out.output_dir);
  json& report = out.report;
  report["config"] = config_to_json(cfg);
  const auto t_start = std::chrono::steady_clock::now();
  try {
    const ControlSystem sys = build_system(cfg);
    const OrthoBasis1D basis = make_basis(cfg);

    log("[", cfg.name, "] LQR baseline");
    const LqrBaseline lqr = compute_lqr(sys, basis, cfg.ranks.round_tol);
    report["lqr"] = lqr_report_json(lqr);
    report["ranks"] = resolve_ranks(cfg, lqr.value);

    const auto solved = solve_controllers(cfg, sys, basis, lqr, log);
    report["controllers"] = json::object();
    for (const auto& s : solved) {
      const std::string file = "value_" + s.config.id + ".tthjb";
      save_tt((dir / file).string(), s.result.value, basis);
      report["controllers"][s.config.id] = pi_report_json(s.result.report);
      report["controllers"][s.config.id]["value_file"] = file;
      report["controllers"][s.config.id]["variant"] = detail::variant_name(s.config.variant);
      report["controllers"][s.config.id]["n_samples"] = s.config.n_samples;
    }

    std::vector<NamedController> controllers;
    controllers.push_back({"lqr", lqr.policy, std::nullopt, std::nullopt});
    std::set<std::string> feedback = {"lqr"};
    for (const auto& s : solved) {
      controllers.push_back({s.config.id, Policy::from_value(s.result.value, basis, sys.G, sys.B), s.result.value, basis});
      feedback.insert(s.config.id);
    }

    EvaluationSettings es;
    es.experiment = cfg.name;
    es.t_sim = cfg.evaluation.t_sim;
    es.h_time = cfg.evaluation.h_time;
    es.stabilization_threshold = cfg.stabilization_threshold();
    es.divergence_threshold = cfg.evaluation.divergence_threshold;
    es.record_timing = cfg.record_timing;

    report["initial_values"] = json::object();
    report["open_loop"] = json::array();
    for (const auto& set : cfg.evaluation.iv_sets) {
      const Eigen::MatrixXd states = materialize_ivs(cfg, set);
      const std::size_t outside = count_out_of_domain(states, cfg.domain_halfwidth);
      report["initial_values"][set.id] = {{"count", states.cols()}, {"outside_domain", outside}};
      if (outside) log("  note: ", outside, " initial values of set ", set.id, " lie outside the fitted domain");
      log("[", cfg.name, "] evaluating ", controllers.size(), " controllers on ", states.cols(), " initial values (",
          set.id, ")");
      for (auto& r : evaluate_controllers(sys, controllers, set.id, states, es)) out.table.add(std::move(r));
      if (cfg.open_loop.enabled && cfg.open_loop.iv_set == set.id) {
        log("[", cfg.name, "] open-loop baseline on ", std::min<std::size_t>(cfg.open_loop.count, states.cols()),
            " initial values");
        for (auto& o : run_open_loop(cfg, sys, set.id, states, controllers)) {
          report["open_loop"].push_back({{"iv_id", o.row.iv_id},
                                         {"cost", detail::fmt_num(o.row.realized_cost)},
                                         {"iterations", o.solution.iterations},
                                         {"converged", o.solution.converged},
                                         {"warm_start", o.warm_start},
                                         {"note", o.solution.note}});
          out.table.add(std::move(o.row));
        }
      }
    }
    out.table.sort();
    out.aggregates = out.table.aggregates(feedback);
    write_results_csv((dir / "results.csv").string(), out.table);
    write_summary_csv((dir / "summary.csv").string(), cfg.name, out.aggregates);

    json aggs = json::array();
    for (const auto& a : out.aggregates)
      aggs.push_back({{"iv_set", a.iv_set},
                      {"controller", a.controller},
                      {"count", a.count},
                      {"non_stabilized", a.non_stabilized},
                      {"common_count", a.common_count},
                      {"mean_cost_common", detail::fmt_num(a.mean_cost_common)},
                      {"mean_cost_all", detail::fmt_num(a.mean_cost_all)}});
    report["aggregates"] = aggs;
    const auto violations = out.table.prediction_violations(cfg.evaluation.prediction_threshold);
    json viol = json::array();
    for (const auto& v : violations)
      viol.push_back({{"controller", v.controller},
                      {"iv_id", v.iv_id},
                      {"predicted", v.predicted},
                      {"realized", v.realized},
                      {"relative_gap", v.relative_gap}});
    report["prediction_violations"] = {{"threshold", cfg.evaluation.prediction_threshold},
                                       {"count", violations.size()},
                                       {"rows", viol}};
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_json((dir / "report.json").string(), report);
    for (const auto& a : out.aggregates)
      log("  ", a.iv_set, " ", a.controller, ": non-stabilized ", a.non_stabilized, "/", a.count, ", mean cost (common ",
          a.common_count, ") ", detail::fmt_num(a.mean_cost_common));
  } catch (const std::exception& e) {
    report["error"] = e.what();
    if (!out.table.rows.empty()) {
      out.table.sort();
      write_results_csv((dir / "results.partial.csv").string(), out.table);
    }
    write_json((dir / "report.json").string(), report);
    throw;
  }
  return out;
}

}  // namespace hjbtt::harness
