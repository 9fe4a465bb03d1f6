// Command-line front end: solve, evaluate, baselines, full comparison runs
// and initial-value generation.

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hjbtt/baselines.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/harness/config.hpp"
#include "hjbtt/harness/evaluation.hpp"
#include "hjbtt/harness/experiment.hpp"
#include "hjbtt/harness/ivs.hpp"
#include "hjbtt/serialization.hpp"

namespace fs = std::filesystem;
using namespace hjbtt;
using namespace hjbtt::harness;

namespace {

// A path to a JSON file, or the name of a built-in preset.
ExperimentConfig resolve_config(const std::string& arg) {
  if (fs::exists(arg)) return load_config(arg);
  for (const auto& name : preset_names())
    if (arg == name) return preset(name);
  throw ConfigError("no such config file or preset: " + arg);
}

int cmd_solve(const std::string& config_arg, const std::string& out_override, bool quiet) {
  const ExperimentConfig cfg = resolve_config(config_arg);
  ExperimentOptions opts;
  if (!out_override.empty()) opts.output_dir = out_override;
  const std::string dir = ensure_output_dir(cfg, opts);
  const Logger log(quiet ? nullptr : &std::cerr);
  const ControlSystem sys = build_system(cfg);
  const OrthoBasis1D basis = make_basis(cfg);
  const LqrBaseline lqr = compute_lqr(sys, basis, cfg.ranks.round_tol);
  json report;
  report["config"] = config_to_json(cfg);
  report["lqr"] = lqr_report_json(lqr);
  report["ranks"] = resolve_ranks(cfg, lqr.value);
  for (const auto& s : solve_controllers(cfg, sys, basis, lqr, log)) {
    const std::string file = "value_" + s.config.id + ".tthjb";
    save_tt((fs::path(dir) / file).string(), s.result.value, basis);
    report["controllers"][s.config.id] = pi_report_json(s.result.report);
    report["controllers"][s.config.id]["value_file"] = file;
    std::cout << (fs::path(dir) / file).string() << '\n';
  }
  write_json((fs::path(dir) / "solve_report.json").string(), report);
  return 0;
}

int cmd_evaluate(const std::string& value_path, const std::string& config_arg, const std::string& ivs_arg,
                 const std::string& out_path) {
  const ExperimentConfig cfg = resolve_config(config_arg);
  const StoredValue stored = load_tt(value_path);
  const ControlSystem sys = build_system(cfg);
  if (stored.value.order() != sys.d) throw ConfigError("value file order does not match the config dimension");

  Eigen::MatrixXd states;
  std::string set_name;
  if (fs::exists(ivs_arg)) {
    states = read_states_csv(ivs_arg, sys.d);
    set_name = fs::path(ivs_arg).stem().string();
  } else {
    for (const auto& s : cfg.evaluation.iv_sets)
      if (s.id == ivs_arg || (set_name.empty() && s.kind == ivs_arg)) {
        states = materialize_ivs(cfg, s);
        set_name = s.id;
      }
    if (set_name.empty()) throw ConfigError("--ivs must be a CSV file or an initial-value set of the config");
  }

  const OrthoBasis1D basis = make_basis(cfg);
  const LqrBaseline lqr = compute_lqr(sys, basis, cfg.ranks.round_tol);
  const std::string id = fs::path(value_path).stem().string();
  std::vector<NamedController> controllers;
  controllers.push_back({"lqr", lqr.policy, std::nullopt, std::nullopt});
  controllers.push_back(
      {id, Policy::from_value(stored.value, stored.basis, sys.G, sys.B), stored.value, stored.basis});
  EvaluationSettings es{cfg.name, cfg.evaluation.t_sim, cfg.evaluation.h_time, cfg.stabilization_threshold(),
                        cfg.evaluation.divergence_threshold, cfg.record_timing};
  ResultTable table;
  for (auto& r : evaluate_controllers(sys, controllers, set_name, states, es)) table.add(std::move(r));
  table.sort();
  if (out_path.empty()) {
    const std::string tmp = (fs::temp_directory_path() / "hjbtt_eval.csv").string();
    write_results_csv(tmp, table);
    std::ifstream in(tmp);
    std::cout << in.rdbuf();
    fs::remove(tmp);
  } else {
    write_results_csv(out_path, table);
  }
  for (const auto& a : table.aggregates({"lqr", id}))
    std::cerr << a.controller << ": non-stabilized " << a.non_stabilized << "/" << a.count << ", mean cost (common "
              << a.common_count << ") " << harness::detail::fmt_num(a.mean_cost_common) << '\n';
  return 0;
}

int cmd_baseline(const std::string& which, const std::string& config_arg, const std::string& out_override) {
  const ExperimentConfig cfg = resolve_config(config_arg);
  ExperimentOptions opts;
  if (!out_override.empty()) opts.output_dir = out_override;
  const std::string dir = ensure_output_dir(cfg, opts);
  const ControlSystem sys = build_system(cfg);
  const OrthoBasis1D basis = make_basis(cfg);
  if (which == "lqr") {
    const LqrBaseline lqr = compute_lqr(sys, basis, cfg.ranks.round_tol);
    json j = lqr_report_json(lqr);
    j["P"] = std::vector<double>(lqr.care.P.data(), lqr.care.P.data() + lqr.care.P.size());
    write_json((fs::path(dir) / "lqr.json").string(), j);
    if (lqr.value.order() > 0) save_tt((fs::path(dir) / "value_lqr.tthjb").string(), lqr.value, basis);
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  if (!cfg.open_loop.enabled) throw ConfigError("open_loop is not enabled in this config");
  const LqrBaseline lqr = compute_lqr(sys, basis, cfg.ranks.round_tol);
  const std::vector<NamedController> warm = {{"lqr", lqr.policy, std::nullopt, std::nullopt}};
  for (const auto& s : cfg.evaluation.iv_sets) {
    if (s.id != cfg.open_loop.iv_set) continue;
    json rows = json::array();
    for (const auto& o : run_open_loop(cfg, sys, s.id, materialize_ivs(cfg, s), warm))
      rows.push_back({{"iv_id", o.row.iv_id},
                      {"cost", harness::detail::fmt_num(o.row.realized_cost)},
                      {"stabilized", o.row.stabilized},
                      {"iterations", o.solution.iterations},
                      {"converged", o.solution.converged},
                      {"warm_start", o.warm_start},
                      {"note", o.solution.note}});
    write_json((fs::path(dir) / "openloop.json").string(), rows);
    std::cout << rows.dump(2) << '\n';
  }
  return 0;
}

int cmd_compare(const std::string& config_arg, const std::string& out_override, bool quiet) {
  const ExperimentConfig cfg = resolve_config(config_arg);
  ExperimentOptions opts;
  if (!out_override.empty()) opts.output_dir = out_override;
  opts.log = quiet ? nullptr : &std::cerr;
  const ExperimentOutcome out = run_experiment(cfg, opts);
  std::cout << (fs::path(out.output_dir) / "results.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-train policy iteration for optimal feedback control"};
  app.require_subcommand(1);

  std::string config_arg, out_dir;
  bool quiet = false;

  auto* solve = app.add_subcommand("solve", "run policy iteration and write the value trains and a report");
  solve->add_option("config", config_arg, "config file or preset name")->required();
  solve->add_option("--out", out_dir, "output directory (overrides the config)");
  solve->add_flag("-q,--quiet", quiet, "no progress output");

  std::string value_path, ivs_arg, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "cost table of a stored value function and LQR");
  evaluate->add_option("--value", value_path, "TTHJB1 file")->required();
  evaluate->add_option("--config", config_arg, "config file or preset name")->required();
  evaluate->add_option("--ivs", ivs_arg, "CSV of initial values, or an initial-value set of the config")->required();
  evaluate->add_option("--out", eval_out, "output CSV (default: stdout)");

  std::string which;
  auto* baseline = app.add_subcommand("baseline", "LQR or open-loop baseline");
  baseline->add_option("kind", which, "lqr or openloop")->required()->check(CLI::IsMember({"lqr", "openloop"}));
  baseline->add_option("config", config_arg, "config file or preset name")->required();
  baseline->add_option("--out", out_dir, "output directory (overrides the config)");

  auto* compare = app.add_subcommand("compare", "full run: baselines, policy iteration, evaluation");
  compare->add_option("config", config_arg, "config file or preset name")->required();
  compare->add_option("--out", out_dir, "output directory (overrides the config)");
  compare->add_flag("-q,--quiet", quiet, "no progress output");

  std::string kind, ivs_out;
  std::size_t count = 100, dim = 8;
  std::uint64_t seed = 1;
  double rescale = 1.75, low = -3.0, high = 3.0;
  std::pair<int, int> degrees{2, 20};
  auto* sample = app.add_subcommand("sample-ivs", "write random initial values as CSV");
  sample->add_option("--preset", kind, "polynomial or uniform")->required()->check(CLI::IsMember({"polynomial", "uniform"}));
  sample->add_option("--count", count, "number of states")->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "generator seed");
  sample->add_option("--out", ivs_out, "output CSV")->required();
  sample->add_option("--dim", dim, "state dimension")->check(CLI::Range(2, 4096));
  sample->add_option("--rescale", rescale, "max |p| on [-1, 1] (polynomial)");
  sample->add_option("--degrees", degrees, "degree range of the random factor (polynomial)");
  sample->add_option("--low", low, "lower bound (uniform)");
  sample->add_option("--high", high, "upper bound (uniform)");

  std::string preset_name;
  auto* dump = app.add_subcommand("config", "print a preset as JSON");
  dump->add_option("preset", preset_name, "preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*solve) return cmd_solve(config_arg, out_dir, quiet);
    if (*evaluate) return cmd_evaluate(value_path, config_arg, ivs_arg, eval_out);
    if (*baseline) return cmd_baseline(which, config_arg, out_dir);
    if (*compare) return cmd_compare(config_arg, out_dir, quiet);
    if (*sample) {
      const Eigen::MatrixXd states = kind == "polynomial"
                                         ? sample_initial_polynomial(dim, count, degrees.first, degrees.second, rescale, seed)
                                         : sample_initial_uniform(dim, count, low, high, seed);
      write_states_csv(ivs_out, states);
      return 0;
    }
    if (*dump) {
      std::cout << config_to_json(preset(preset_name)).dump(2) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
