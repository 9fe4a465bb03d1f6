// Configuration, initial-value samplers, cost evaluation, result tables and
// the end-to-end run on the linear-quadratic preset.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hjbtt/harness/config.hpp"
#include "hjbtt/harness/evaluation.hpp"
#include "hjbtt/harness/experiment.hpp"
#include "hjbtt/harness/ivs.hpp"
#include "hjbtt/serialization.hpp"

namespace hjbtt::harness {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hjbtt_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, PresetsValidateAndRoundTrip) {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    EXPECT_NO_THROW(c.validate()) << name;
    const json j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(j)), j) << name;
  }
  EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Config, PresetParameters) {
  const ExperimentConfig s = preset("schlogl-desk");
  EXPECT_EQ(s.model.d, 8u);
  EXPECT_EQ(s.degree, 4);
  EXPECT_EQ(s.n_steps, 1000u);
  EXPECT_DOUBLE_EQ(s.h_time, 1e-3);
  EXPECT_EQ(s.max_iterations, 20u);
  EXPECT_EQ(s.controllers.front().n_samples, 4096u);
  EXPECT_DOUBLE_EQ(s.loss.delta1, 100.0);
  EXPECT_DOUBLE_EQ(s.loss.delta2, 100.0);
  EXPECT_DOUBLE_EQ(s.evaluation.iv_sets.front().rescale, 1.75);
  const ExperimentConfig b = preset("burgers-desk");
  EXPECT_DOUBLE_EQ(b.model.sigma, 0.2);
  EXPECT_DOUBLE_EQ(b.h_time, 1e-2);
  EXPECT_DOUBLE_EQ(b.evaluation.iv_sets.front().rescale, 2.75);
  EXPECT_EQ(preset("schlogl-paper").ranks.explicit_ranks.size(), 31u);
  EXPECT_EQ(preset("schlogl-paper").controllers.front().n_samples, 32768u);
}

TEST(Config, StrictParsing) {
  json j = config_to_json(preset("lq-oracle"));
  json bad = j;
  bad["bogus"] = 1;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["loss"]["delta4"] = 1.0;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad.erase("version");
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["version"] = 99;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["ranks"] = {3, 3};  // d - 1 = 3 entries required
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["model"]["type"] = "navier-stokes";
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["controllers"][0]["id"] = "lqr";
  EXPECT_THROW(config_from_json(bad), ConfigError);
}

TEST(Config, Defaults) {
  ExperimentConfig c = preset("lq-oracle");
  c.evaluation.stabilization_threshold.reset();
  EXPECT_DOUBLE_EQ(c.stabilization_threshold(), 2e-3);
  c.domain_halfwidth = 3.0;
  EXPECT_DOUBLE_EQ(c.stabilization_threshold(), 3e-3);
  const PolicyIterationConfig pi = c.pi_config(c.controllers.front());
  EXPECT_EQ(pi.n_samples, 1024u);
  EXPECT_EQ(pi.seed, c.seed);
}

TEST(Config, LoadFromFile) {
  const fs::path dir = scratch_dir("config");
  std::ofstream(dir / "c.json") << config_to_json(preset("burgers-desk")).dump(2);
  EXPECT_EQ(config_to_json(load_config((dir / "c.json").string())), config_to_json(preset("burgers-desk")));
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "broken.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
}

// ---------------------------------------------------------------------------
// Initial values

TEST(InitialValues, PolynomialProfiles) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto p = random_polynomial_profile(CounterRng(s), 2, 20, 1.75);
    double peak = 0.0;
    for (int k = 0; k < kPolynomialCheckGrid; ++k)
      peak = std::max(peak, std::abs(detail::horner(p, -1.0 + 2.0 * k / (kPolynomialCheckGrid - 1))));
    EXPECT_NEAR(peak, 1.75, 1e-9);
    EXPECT_LT(std::abs(detail::horner(p, 1.0)), 1e-12);
    EXPECT_LT(std::abs(detail::horner(p, -1.0)), 1e-12);
    EXPECT_GE(p.size(), 5u);
    EXPECT_LE(p.size(), 23u);
  }
}

TEST(InitialValues, PolynomialStates) {
  const Eigen::MatrixXd a = sample_initial_polynomial(16, 30, 2, 20, 2.75, 9);
  EXPECT_EQ(a.rows(), 16);
  EXPECT_EQ(a.cols(), 30);
  EXPECT_TRUE(a == sample_initial_polynomial(16, 30, 2, 20, 2.75, 9));
  EXPECT_FALSE(a == sample_initial_polynomial(16, 30, 2, 20, 2.75, 10));
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 2.75 + 1e-9);
  // prefix stability: sample s depends only on (seed, s)
  EXPECT_TRUE(a.leftCols(10) == sample_initial_polynomial(16, 10, 2, 20, 2.75, 9));
  // grid values next to the boundary are O(h) small
  const double h = 2.0 / 17.0;
  const double slope_bound = 2.75 * 2.0 * 22.0 * 22.0;  // Markov inequality, degree <= 22
  EXPECT_LE(a.row(0).cwiseAbs().maxCoeff(), slope_bound * h);
  EXPECT_THROW(sample_initial_polynomial(8, 3, 5, 2, 1.0, 1), ConfigError);
  EXPECT_THROW(sample_initial_polynomial(8, 3, 2, 5, 0.0, 1), ConfigError);
}

TEST(InitialValues, Uniform) {
  const Eigen::MatrixXd u = sample_initial_uniform(4, 10000, -3.0, 3.0, 5);
  EXPECT_GE(u.minCoeff(), -3.0);
  EXPECT_LE(u.maxCoeff(), 3.0);
  const double sigma_mean = 6.0 / std::sqrt(12.0) / std::sqrt(10000.0);
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LT(std::abs(u.row(j).mean()), 3.0 * sigma_mean);
  EXPECT_TRUE(u == sample_initial_uniform(4, 10000, -3.0, 3.0, 5));
  EXPECT_THROW(sample_initial_uniform(4, 3, 1.0, 1.0, 5), ConfigError);
}

TEST(InitialValues, CsvRoundTrip) {
  const fs::path dir = scratch_dir("csv");
  const Eigen::MatrixXd a = sample_initial_polynomial(8, 7, 2, 20, 1.75, 3);
  write_states_csv((dir / "a.csv").string(), a);
  EXPECT_TRUE(read_states_csv((dir / "a.csv").string(), 8) == a);
  EXPECT_THROW(read_states_csv((dir / "a.csv").string(), 9), ConfigError);
  std::ofstream(dir / "b.csv") << "# two states\n1, 2, 3\n\n4,5,6\n";
  const Eigen::MatrixXd b = read_states_csv((dir / "b.csv").string());
  ASSERT_EQ(b.rows(), 3);
  ASSERT_EQ(b.cols(), 2);
  EXPECT_EQ(b(2, 1), 6.0);
  std::ofstream(dir / "c.csv") << "1,2\n3\n";
  EXPECT_THROW(read_states_csv((dir / "c.csv").string()), ConfigError);
  std::ofstream(dir / "d.csv") << "1,x\n";
  EXPECT_THROW(read_states_csv((dir / "d.csv").string()), ConfigError);
}

// ---------------------------------------------------------------------------
// Cost evaluation

ControlSystem scalar(double a) {
  return build_linear(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Ones(1, 1), 1.0,
                      Eigen::MatrixXd::Constant(1, 1, 0.1), 2.0);
}

TEST(Cost, Examples) {
  const ControlSystem s = scalar(1.0);
  const RiccatiSolution r = solve_care(s.linear, s.G, Eigen::MatrixXd::Ones(1, 1), s.B);
  const Policy lqr = Policy::linear(r.K);
  const CostResult zero = cost_of_policy(s, lqr, Eigen::VectorXd::Zero(1), 5.0, 1e-3, 2e-3);
  EXPECT_EQ(zero.cost, 0.0);
  EXPECT_TRUE(zero.stabilized);
  // closed-loop rate 10 P - 1 = 3.3, so T = 5 covers many time constants
  const CostResult c = cost_of_policy(s, lqr, Eigen::VectorXd::Constant(1, 1.5), 5.0, 1e-3, 2e-3);
  EXPECT_TRUE(c.stabilized);
  EXPECT_LT(std::abs(c.cost - 2.25 * r.P(0, 0)) / (2.25 * r.P(0, 0)), 1e-2);
  const CostResult u = cost_of_policy(s, Policy::zero(1), Eigen::VectorXd::Constant(1, 0.1), 5.0, 1e-3, 2e-3);
  EXPECT_FALSE(u.stabilized);
  EXPECT_GT(u.cost, 0.0);
  const CostResult blow = cost_of_policy(scalar(5.0), Policy::zero(1), Eigen::VectorXd::Constant(1, 1.0), 5.0, 1e-3, 2e-3);
  EXPECT_TRUE(blow.diverged);
  EXPECT_FALSE(blow.stabilized);
  EXPECT_THROW(cost_of_policy(s, lqr, Eigen::VectorXd::Zero(1), 0.0, 1e-3, 2e-3), ConfigError);
}

ResultRow row(const std::string& ctrl, const std::string& iv, double cost, bool stab,
              std::optional<double> pred = std::nullopt) {
  ResultRow r;
  r.experiment = "t";
  r.controller = ctrl;
  r.iv_set = "s";
  r.iv_id = iv;
  r.realized_cost = cost;
  r.stabilized = stab;
  r.predicted = pred;
  return r;
}

TEST(Table, AggregatesRecomputeFromRows) {
  ResultTable t;
  t.add(row("lqr", "s-00000", 1.0, true));
  t.add(row("tt", "s-00000", 0.8, true, 0.79));
  t.add(row("lqr", "s-00001", 9.0, false));
  t.add(row("tt", "s-00001", 2.0, true, 1.0));
  t.add(row("lqr", "s-00002", 3.0, true));
  t.add(row("tt", "s-00002", 2.5, true, 2.5));
  t.add(row("open-loop", "s-00000", 0.7, true));
  const auto aggs = t.aggregates({"lqr", "tt"});
  ASSERT_EQ(aggs.size(), 3u);
  for (const Aggregate& a : aggs) {
    // recompute by hand
    std::size_t n = 0, bad = 0, common = 0;
    double all = 0.0, sum_common = 0.0;
    for (const auto& r : t.rows) {
      if (r.controller != a.controller) continue;
      ++n;
      bad += r.stabilized ? 0 : 1;
      all += r.realized_cost;
      if (r.iv_id != "s-00001") {
        ++common;
        sum_common += r.realized_cost;
      }
    }
    EXPECT_EQ(a.count, n);
    EXPECT_EQ(a.non_stabilized, bad);
    EXPECT_EQ(a.common_count, common);
    EXPECT_DOUBLE_EQ(a.mean_cost_all, all / n);
    EXPECT_DOUBLE_EQ(a.mean_cost_common, sum_common / common);
  }
  const auto v = t.prediction_violations(0.25);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].iv_id, "s-00001");
  EXPECT_NEAR(v[0].relative_gap, 1.0 / 3.0, 1e-15);
}

TEST(Table, SortedCsv) {
  ResultTable t;
  t.add(row("tt", "s-00001", 2.0, true, 1.0));
  t.add(row("lqr", "s-00000", 1.0 / 3.0, false));
  t.sort();
  const fs::path dir = scratch_dir("table");
  write_results_csv((dir / "r.csv").string(), t);
  EXPECT_EQ(slurp(dir / "r.csv"),
            "experiment,controller,iv_id,predicted_value,realized_cost,stabilized,wall_time_s\n"
            "t,lqr,s-00000,NA,0.333333333333,0,NA\n"
            "t,tt,s-00001,1,2,1,NA\n");
  EXPECT_EQ(iv_label("poly", 7), "poly-00007");
}

// ---------------------------------------------------------------------------
// End to end

TEST(Experiment, LinearQuadraticPresetMatchesLqr) {
  const fs::path dir = scratch_dir("lq");
  ExperimentOptions opts;
  opts.output_dir = (dir / "a").string();
  const ExperimentOutcome out = run_experiment(preset("lq-oracle"), opts);
  std::map<std::string, double> lqr_cost;
  for (const auto& r : out.table.rows)
    if (r.controller == "lqr") lqr_cost[r.iv_id] = r.realized_cost;
  std::size_t checked = 0;
  for (const auto& r : out.table.rows) {
    EXPECT_GE(r.realized_cost, 0.0);
    if (r.controller != "tt-l2") continue;
    ++checked;
    EXPECT_LT(std::abs(r.realized_cost - lqr_cost.at(r.iv_id)), 0.02 * lqr_cost.at(r.iv_id)) << r.iv_id;
    ASSERT_TRUE(r.predicted.has_value());
    EXPECT_LT(std::abs(*r.predicted - r.realized_cost) / (1.0 + r.realized_cost), 0.25);
  }
  EXPECT_EQ(checked, 20u);
  for (const char* f : {"results.csv", "summary.csv", "report.json", "value_tt-l2.tthjb"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  const json report = json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_FALSE(report.contains("error"));
  EXPECT_EQ(report["prediction_violations"]["count"], 0);
  EXPECT_EQ(report["initial_values"]["uniform"]["outside_domain"], 0);
  const StoredValue v = load_tt((dir / "a" / "value_tt-l2.tthjb").string());
  EXPECT_EQ(v.value.order(), 4u);

  // same seeds, same bytes
  opts.output_dir = (dir / "b").string();
  run_experiment(preset("lq-oracle"), opts);
  EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
}

TEST(Experiment, OpenLoopWarmStartsFromFeedback) {
  ExperimentConfig c = preset("schlogl-desk");
  c.open_loop.count = 1;
  c.open_loop.t_end = 2.0;
  c.open_loop.h_time = 5e-3;
  c.open_loop.max_iters = 5;
  const ControlSystem sys = build_system(c);
  const OrthoBasis1D basis = make_basis(c);
  const LqrBaseline lqr = compute_lqr(sys, basis, 1e-6);
  Eigen::MatrixXd x(8, 1);
  for (Eigen::Index i = 0; i < 8; ++i) x(i, 0) = 1.5 * (0.8 * std::cos(1.3 * sys.grid[static_cast<std::size_t>(i)]) + 0.2);

  const auto cold = run_open_loop(c, sys, "poly", x);
  ASSERT_EQ(cold.size(), 1u);
  EXPECT_EQ(cold[0].warm_start, "zero");
  EXPECT_FALSE(std::isfinite(cold[0].row.realized_cost));

  const auto warm = run_open_loop(c, sys, "poly", x, {{"lqr", lqr.policy, std::nullopt, std::nullopt}});
  EXPECT_EQ(warm[0].warm_start, "lqr");
  EXPECT_TRUE(std::isfinite(warm[0].row.realized_cost));
  EXPECT_LE(warm[0].solution.costs.back(), warm[0].solution.costs.front());
}

TEST(Experiment, FailureWritesReport) {
  ExperimentConfig c = preset("lq-oracle");
  c.model = {"schlogl", 3, 1.0, {-0.4, 0.4}, 0.0};
  c.domain_halfwidth = 4.0;
  c.initial_policy = "zero";
  c.n_steps = 3000;
  c.controllers = {{"tt", LossVariant::L2, 64}};
  const fs::path dir = scratch_dir("fail");
  ExperimentOptions opts;
  opts.output_dir = dir.string();
  EXPECT_THROW(run_experiment(c, opts), InadmissiblePolicyError);
  const json report = json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(report.contains("error"));
  EXPECT_TRUE(report.contains("lqr"));
}

}  // namespace
}  // namespace hjbtt::harness
