// Acceptance run: one PASS/FAIL line per criterion, also written to
// <workdir>/acceptance.txt.
//
//   acceptance [--workdir DIR] [--only 1,2,...] [--allow-fail N,...]
//
// Criteria 8 and 9 solve the desk presets and take tens of minutes on one
// core. The exit status is non-zero when a criterion fails that is not
// listed in --allow-fail.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hjbtt/baselines.hpp"
#include "hjbtt/basis.hpp"
#include "hjbtt/bellman_solver.hpp"
#include "hjbtt/dynamics.hpp"
#include "hjbtt/harness/config.hpp"
#include "hjbtt/harness/experiment.hpp"
#include "hjbtt/policy_iteration.hpp"
#include "hjbtt/tt_core.hpp"
#include "test_util.hpp"

#ifndef HJBTT_CLI_PATH
#define HJBTT_CLI_PATH "hjbtt"
#endif

namespace fs = std::filesystem;
using namespace hjbtt;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

fs::path g_workdir = fs::temp_directory_path() / "hjbtt_acceptance";

// ---------------------------------------------------------------------------

void basis_orthonormality(Outcome& o) {
  double worst = 0.0;
  for (int p = 0; p <= 6; ++p) {
    const OrthoBasis1D b(-2.0, 2.0, p);
    worst = std::max(worst, (b.gram(InnerProduct::H1, 2 * p + 6) - Eigen::MatrixXd::Identity(p + 1, p + 1)).cwiseAbs().maxCoeff());
  }
  const OrthoBasis1D b(-2.0, 2.0, 6);
  const double psi0 = b.eval_all(0.7)(0);
  const double lead1 = b.coefficients()(1, 1);
  o.check(worst < 1e-10, "H1 Gram deviation");
  o.check(std::abs(psi0 - 0.5) < 1e-10, "psi_0");
  o.check(std::abs(lead1 - std::sqrt(3.0 / 28.0)) < 1e-10, "psi_1 leading coefficient");
  o.detail << "Gram dev " << sci(worst) << ", psi0 " << psi0 << ", lead(psi1) - sqrt(3/28) " << sci(lead1 - std::sqrt(3.0 / 28.0));
}

void tt_oracles(Outcome& o) {
  const std::vector<std::size_t> dims{4, 4, 4};
  // rank-(2,2) tensor: a sum of two outer products
  DenseTensor full(dims);
  CounterRng rng(21);
  std::vector<Eigen::VectorXd> f(6, Eigen::VectorXd(4));
  for (auto& v : f)
    for (Eigen::Index i = 0; i < 4; ++i) v(i) = rng.normal();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t idx[3] = {i, j, k};
        const auto e = [&](int t, std::size_t n) { return f[static_cast<std::size_t>(t)](static_cast<Eigen::Index>(n)); };
        full.data[full.offset(idx)] = e(0, i) * e(1, j) * e(2, k) + e(3, i) * e(4, j) * e(5, k);
      }
  const TTTensor tt = tt_from_full(full, {2, 2}, 0.0);
  const double round_trip = testing::max_abs_diff(tt_to_full(tt), full);
  double eval_err = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const FeatureVectors fv = testing::random_features(dims, CounterRng(22).derive(t));
    eval_err = std::max(eval_err, std::abs(tt_eval(tt, fv) - testing::dense_contract(full, fv)));
  }
  double canon_err = 0.0, conc_err = 0.0;
  for (std::size_t pos = 0; pos < 3; ++pos) {
    const TTTensor c = canonicalize(tt, pos);
    canon_err = std::max(canon_err, testing::max_abs_diff(tt_to_full(c), full));
    conc_err = std::max(conc_err, std::abs(c.core(pos).norm() - full.norm()) / full.norm());
  }
  o.check(round_trip < 1e-12, "round trip");
  o.check(eval_err < 1e-12, "tt_eval vs dense");
  o.check(canon_err < 1e-12, "canonicalization");
  o.check(conc_err < 1e-12, "norm concentration");
  o.detail << "ranks " << tt.ranks()[0] << "," << tt.ranks()[1] << "; round trip " << sci(round_trip) << ", eval "
           << sci(eval_err) << ", canon " << sci(canon_err) << ", concentration " << sci(conc_err);
}

double adjoint_fd_error(const ControlSystem& s) {
  Eigen::VectorXd x0(8);
  // moderate amplitude: the uncontrolled cubic blows up from O(1) data within T = 1
  for (std::size_t i = 0; i < 8; ++i) x0(static_cast<Eigen::Index>(i)) = 0.4 * std::cos(1.3 * s.grid[i]) + 0.1;
  CounterRng rng(31);
  Eigen::MatrixXd u(1, 100);
  for (Eigen::Index k = 0; k < 100; ++k) u(0, k) = 0.5 * rng.normal();
  Eigen::MatrixXd grad;
  if (!std::isfinite(open_loop_gradient(s, x0, u, 0.01, grad))) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::uint64_t dir = 0; dir < 5; ++dir) {
    CounterRng r = rng.derive(dir);
    Eigen::MatrixXd e(1, 100);
    for (Eigen::Index k = 0; k < 100; ++k) e(0, k) = r.normal();
    const double fd = (open_loop_cost(s, x0, u + 1e-6 * e, 0.01) - open_loop_cost(s, x0, u - 1e-6 * e, 0.01)) / 2e-6;
    const double an = (grad.array() * e.array()).sum();
    const double err = std::abs(fd - an) / std::abs(an);
    worst = std::isfinite(err) ? std::max(worst, err) : std::numeric_limits<double>::infinity();
  }
  return worst;
}

void gradient_checks(Outcome& o) {
  const OrthoBasis1D b(-2.0, 2.0, 4);
  const TTTensor v = TTTensor::random({5, 5, 5, 5, 5}, {3, 4, 4, 3}, CounterRng(32));
  CounterRng rng(33);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    auto x = testing::random_point(5, 1.8, rng);
    const Eigen::VectorXd g = tt_grad_eval(v, FeatureVectors::from_basis(b, x, true));
    for (std::size_t k = 0; k < 5; ++k) {
      auto xp = x, xm = x;
      xp[k] += 1e-5;
      xm[k] -= 1e-5;
      const double fd = (tt_eval(v, FeatureVectors::from_basis(b, xp)) - tt_eval(v, FeatureVectors::from_basis(b, xm))) / 2e-5;
      worst = std::max(worst, std::abs(fd - g(static_cast<Eigen::Index>(k))) / std::max(std::abs(g(static_cast<Eigen::Index>(k))), 1.0));
    }
  }
  const double schlogl = adjoint_fd_error(build_schlogl(8, 1.0, {-0.4, 0.4}, 2.0));
  const double burgers = adjoint_fd_error(build_burgers(8, 0.2, {-0.5, 0.2}, 2.0));
  o.check(worst < 1e-6, "tt_grad_eval");
  o.check(schlogl < 1e-4, "Schlogl adjoint");
  o.check(burgers < 1e-4, "Burgers adjoint");
  o.detail << "TT gradient " << sci(worst) << ", adjoint Schlogl " << sci(schlogl) << ", Burgers " << sci(burgers);
}

void riccati_oracle(Outcome& o) {
  const RiccatiSolution s = solve_care(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                                       Eigen::MatrixXd::Constant(1, 1, 0.1));
  const double closed = (2.0 + std::sqrt(44.0)) / 20.0;
  const ControlSystem h = build_linear_heat(4, 1.0, {-0.4, 0.4}, 2.0);
  CounterRng rng(41);
  Eigen::MatrixXd m(4, 4);
  for (Eigen::Index i = 0; i < 16; ++i) m.data()[i] = rng.normal();
  const Eigen::MatrixXd q = m * m.transpose();
  const RiccatiSolution r = solve_care(h.linear, h.G, q, h.B);
  const double res = care_residual(h.linear, h.G, q, h.B, r.P).norm() / q.norm();
  const Eigen::MatrixXd oracle = testing::care_by_hamiltonian(h.linear, h.G, q, h.B);
  const double match = (r.P - oracle).cwiseAbs().maxCoeff();
  bool monotone = true;
  const ControlSystem sch = build_schlogl(8, 1.0, {-0.4, 0.4}, 2.0);
  const RiccatiSolution k = solve_care(sch.linear, sch.G, sch.cost_weight * Eigen::MatrixXd::Identity(8, 8), sch.B);
  for (std::size_t i = 0; i + 1 < k.iterates.size(); ++i) {
    const Eigen::MatrixXd d = k.iterates[i] - k.iterates[i + 1];
    monotone &= Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (d + d.transpose())).eigenvalues().minCoeff() >= -1e-10;
  }
  o.check(std::abs(s.P(0, 0) - closed) < 1e-10 && std::abs(s.P(0, 0) - 0.4316625) < 5e-8, "scalar P");
  o.check(res < 1e-10, "d=4 residual");
  o.check(match < 1e-8, "d=4 oracle");
  o.check(monotone, "Kleinman monotonicity");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.7f", s.P(0, 0));
  o.detail << "scalar P " << buf << " (closed form dev " << sci(s.P(0, 0) - closed) << "), d=4 residual/|Q| " << sci(res)
           << ", oracle dev " << sci(match) << ", Kleinman iterates " << k.iterates.size() << " monotone";
}

void lq_end_to_end(Outcome& o) {
  const ControlSystem sys = build_linear_heat(4, 1.0, {-0.4, 0.4}, 2.0);
  const OrthoBasis1D basis(-2.0, 2.0, 2);
  const RiccatiSolution care = solve_care(sys.linear, sys.G, sys.cost_weight * Eigen::MatrixXd::Identity(4, 4), sys.B);
  const TTTensor lqr_tt = lqr_value_as_tt(care.P, basis, 1e-6);
  LossConfig loss;
  loss.kappa = 1e-8;
  PolicyIterationConfig pi;
  pi.n_samples = 1024;
  pi.n_steps = 1000;
  pi.h_time = 1e-3;
  pi.tol = 1e-6;
  pi.max_iterations = 10;
  pi.seed = 11;
  // zero train with the LQR ranks, LQR initial policy
  const PolicyIterationResult r = policy_iteration(sys, basis, TTTensor::zero(lqr_tt.dims(), lqr_tt.ranks()), loss, pi,
                                                   Policy::linear(care.K));
  CounterRng rng(51);
  double num = 0.0, den = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto xs = testing::random_point(4, 2.0, rng);
    const Eigen::Map<const Eigen::VectorXd> x(xs.data(), 4);
    const double exact = x.dot(care.P * x);
    const double approx = tt_eval(r.value, FeatureVectors::from_basis(basis, xs));
    num += (approx - exact) * (approx - exact);
    den += exact * exact;
  }
  const double rel = std::sqrt(num / den);
  const std::size_t updates = r.report.records.size();
  const bool converged = r.report.stop_reason.rfind("converged", 0) == 0;
  o.check(converged && updates <= 3, "converged within 3 policy updates");
  o.check(rel < 1e-2, "relative L2 error");
  o.detail << "ranks";
  for (auto k : lqr_tt.ranks()) o.detail << " " << k;
  o.detail << ", iterations " << updates << " (" << r.report.stop_reason << "), relative L2 error " << sci(rel);
}

void preconditioner_identities(Outcome& o) {
  const ControlSystem base = build_schlogl(8, 1.0, {-0.4, 0.4}, 2.0);
  const Policy p = Policy::linear(Eigen::MatrixXd::Constant(1, 8, 0.5));
  Eigen::VectorXd x(8);
  for (std::size_t i = 0; i < 8; ++i) x(static_cast<Eigen::Index>(i)) = 0.8 * std::cos(1.3 * base.grid[i]) + 0.2;
  double worst = 0.0;
  for (double gamma : {0.0, 0.5}) {
    ControlSystem s = base;
    s.gamma = gamma;
    const std::size_t steps = 40;
    const double h = 0.005, tau = steps * h;
    for (std::size_t n : {1u, 4u, 9u}) {
      double sum = 0.0;
      Eigen::VectorXd y = x;
      for (std::size_t i = 0; i <= n; ++i) {
        const Trajectory t = closed_loop_flow(s, p, y, steps, h);
        sum += std::exp(-gamma * tau * static_cast<double>(i)) * t.reward;
        y = t.endpoint;
      }
      const double whole = closed_loop_flow(s, p, x, steps * (n + 1), h).reward;
      worst = std::max(worst, std::abs(sum - whole) / std::abs(whole));
    }
  }
  // scalar LQ normal matrix in the degree-2 space, anchors included
  const ControlSystem lq = build_linear(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), 1.0,
                                        Eigen::MatrixXd::Constant(1, 1, 0.1), 2.0);
  const RiccatiSolution r = solve_care(lq.linear, lq.G, Eigen::MatrixXd::Ones(1, 1), lq.B);
  const OrthoBasis1D basis(-2.0, 2.0, 2);
  LossConfig cfg;
  cfg.adaptive_delta3 = false;
  const Eigen::MatrixXd pts = generate_qmc_samples(1, 2.0, 256, 1);
  std::vector<double> cond;
  for (std::size_t steps : {100u, 500u, 1000u}) {
    const SampleSet set = assemble_sample_data(lq, Policy::linear(r.K), pts, steps, 1e-3, cfg);
    TTTensor tt = TTTensor::zero({3});
    tt.canonicalize(0);
    const LocalSystem ls = local_system(tt, 0, set, basis, cfg);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ls.A.transpose() * ls.A).eigenvalues();
    cond.push_back(ev.maxCoeff() / ev.minCoeff());
  }
  o.check(worst < 1e-12, "telescoping");
  o.check(cond[0] > cond[1] && cond[1] > cond[2], "condition number decreasing");
  o.detail << "telescoping rel dev " << sci(worst) << "; cond at tau 0.1/0.5/1.0: " << sci(cond[0]) << " / "
           << sci(cond[1]) << " / " << sci(cond[2]);
}

void als_behavior(Outcome& o) {
  const ControlSystem s = build_schlogl(4, 1.0, {-0.4, 0.4}, 2.0);
  const OrthoBasis1D basis(-2.0, 2.0, 4);
  LossConfig cfg;
  cfg.kappa = 1e-4;
  cfg.max_sweeps = 5;
  const SampleSet set = assemble_sample_data(s, Policy::linear(Eigen::MatrixXd::Constant(1, 4, 1.0)),
                                             generate_qmc_samples(4, 2.0, 512, 6), 500, 1e-3, cfg);
  TTTensor tt = TTTensor::random({5, 5, 5, 5}, {3, 4, 3}, CounterRng(71));
  const AlsReport rep = als_solve(tt, set, basis, cfg);
  double worst = 0.0;
  std::size_t steps = 0;
  for (const auto& sw : rep.sweeps) {
    double prev = sw.start_loss;
    for (double l : sw.micro_losses) {
      worst = std::max(worst, (l - prev) / prev);
      prev = l;
      ++steps;
    }
  }
  // constant function: its own core reproduces zero sample rows at gamma = 0
  std::vector<RowMatrix> cores;
  for (int k = 0; k < 4; ++k) {
    RowMatrix c = RowMatrix::Zero(5, 1);
    c(0, 0) = 1.0 / basis.eval_all(0.0)(0);
    cores.push_back(c);
  }
  TTTensor one(cores, {5, 5, 5, 5});
  double kernel = 0.0;
  for (std::size_t pos = 0; pos < 4; ++pos) {
    one.canonicalize(pos);
    const LocalSystem ls = local_system(one, pos, set, basis, cfg);
    const RowMatrix& c = one.core(pos);
    const Eigen::VectorXd av = ls.A * Eigen::Map<const Eigen::VectorXd>(c.data(), c.size());
    kernel = std::max(kernel, av.head(static_cast<Eigen::Index>(set.used_indices().size())).cwiseAbs().maxCoeff());
  }
  o.check(worst <= 1e-10, "micro-step monotonicity");
  o.check(kernel < 1e-13, "constants in kernel");
  o.detail << steps << " micro-steps in " << rep.sweeps.size() << " sweeps, max relative increase " << sci(worst)
           << ", constant-function sample rows max " << sci(kernel);
}

// ---------------------------------------------------------------------------
// Desk-scale runs.

const harness::Aggregate* find(const std::vector<harness::Aggregate>& aggs, const std::string& set,
                               const std::string& ctrl) {
  for (const auto& a : aggs)
    if (a.iv_set == set && a.controller == ctrl) return &a;
  return nullptr;
}

harness::ExperimentOutcome run_preset(const std::string& name) {
  harness::ExperimentOptions opts;
  opts.output_dir = (g_workdir / name).string();
  opts.log = &std::cerr;
  return harness::run_experiment(harness::preset(name), opts);
}

void desk_schlogl(Outcome& o) {
  const harness::ExperimentConfig cfg = harness::preset("schlogl-desk");
  const auto out = run_preset("schlogl-desk");
  std::size_t max_rank = 0;
  for (auto r : out.report["ranks"].get<std::vector<std::size_t>>()) max_rank = std::max(max_rank, r);
  const std::string set = cfg.evaluation.iv_sets.front().id;
  const auto* lqr = find(out.aggregates, set, "lqr");
  const auto* l2 = find(out.aggregates, set, "tt-l2");
  const auto* h1 = find(out.aggregates, set, "tt-h1");
  if (!lqr || !l2 || !h1) {
    o.check(false, "missing aggregates");
    return;
  }
  o.check(max_rank <= 5, "ranks <= 5");
  o.check(h1->non_stabilized <= l2->non_stabilized && l2->non_stabilized <= lqr->non_stabilized,
          "non-stabilized H1 <= L2 <= LQR");
  o.check(l2->common_count > 0 && l2->mean_cost_common <= 1.02 * lqr->mean_cost_common, "mean cost L2 <= 1.02 LQR");
  o.detail << "non-stabilized H1/L2/LQR " << h1->non_stabilized << "/" << l2->non_stabilized << "/" << lqr->non_stabilized
           << " of " << lqr->count << "; common subset " << l2->common_count << ": mean cost L2 "
           << harness::detail::fmt_num(l2->mean_cost_common) << ", H1 " << harness::detail::fmt_num(h1->mean_cost_common)
           << ", LQR " << harness::detail::fmt_num(lqr->mean_cost_common) << " (ratio L2/LQR "
           << sci(l2->mean_cost_common / lqr->mean_cost_common) << "); max rank " << max_rank;
}

void desk_burgers(Outcome& o) {
  const harness::ExperimentConfig cfg = harness::preset("burgers-desk");
  const auto out = run_preset("burgers-desk");
  const std::string set = cfg.evaluation.iv_sets.front().id;
  const auto* lqr = find(out.aggregates, set, "lqr");
  if (!lqr) {
    o.check(false, "missing LQR aggregate");
    return;
  }
  o.detail << "mean cost over " << lqr->count << " initial values: LQR " << harness::detail::fmt_num(lqr->mean_cost_all);
  for (const auto& c : cfg.controllers) {
    const auto* a = find(out.aggregates, set, c.id);
    if (!a) {
      o.check(false, "missing aggregate " + c.id);
      continue;
    }
    o.check(a->mean_cost_all <= lqr->mean_cost_all, c.id + " mean cost <= LQR");
    o.detail << ", " << c.id << " " << harness::detail::fmt_num(a->mean_cost_all) << " ("
             << sci(100.0 * (1.0 - a->mean_cost_all / lqr->mean_cost_all)) << "% lower)";
  }
  o.detail << "; non-stabilized LQR " << lqr->non_stabilized;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Two `compare` runs of the CLI on a reduced Schlogl config (both loss
// variants, open loop) with different worker counts.
void reproducibility(Outcome& o) {
  harness::ExperimentConfig cfg = harness::preset("schlogl-desk");
  cfg.name = "repro";
  cfg.model.d = 4;
  cfg.max_iterations = 3;
  cfg.n_steps = 500;
  for (auto& c : cfg.controllers) c.n_samples = 256;
  cfg.evaluation.iv_sets.front().count = 10;
  cfg.open_loop.count = 1;
  cfg.open_loop.max_iters = 20;
  const fs::path dir = g_workdir / "repro";
  fs::create_directories(dir);
  std::ofstream(dir / "repro.json") << harness::config_to_json(cfg).dump(2) << '\n';
  std::vector<std::string> csv;
  for (const char* threads : {"1", "3"}) {
    const fs::path out = dir / (std::string("threads") + threads);
    fs::remove_all(out);
    const std::string cmd = std::string("HJB_TT_THREADS=") + threads + " \"" + HJBTT_CLI_PATH + "\" compare -q \"" +
                            (dir / "repro.json").string() + "\" --out \"" + out.string() + "\" > /dev/null";
    const int rc = std::system(cmd.c_str());
    o.check(rc == 0, std::string("compare exit status with ") + threads + " threads");
    csv.push_back(slurp(out / "results.csv"));
  }
  o.check(!csv[0].empty() && csv[0] == csv[1], "results.csv identical");
  o.check(slurp(dir / "threads1" / "summary.csv") == slurp(dir / "threads3" / "summary.csv"), "summary.csv identical");
  std::size_t lines = 0;
  for (char c : csv[0]) lines += c == '\n';
  o.detail << "results.csv " << csv[0].size() << " bytes, " << lines << " lines; identical across runs with 1 and 3 workers";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string workdir, only, allow;
  app.add_option("--workdir", workdir, "directory for run outputs");
  app.add_option("--only", only, "comma-separated criteria to run");
  app.add_option("--allow-fail", allow, "comma-separated criteria whose failure does not fail the run");
  CLI11_PARSE(app, argc, argv);
  if (!workdir.empty()) g_workdir = workdir;
  fs::create_directories(g_workdir);

  const auto parse_set = [](const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) out.insert(std::stoi(tok));
    return out;
  };
  const std::set<int> selected = parse_set(only), allowed = parse_set(allow);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"basis orthonormality", basis_orthonormality},
      {"TT oracle suite", tt_oracles},
      {"gradient checks", gradient_checks},
      {"Riccati oracle", riccati_oracle},
      {"LQ end-to-end oracle", lq_end_to_end},
      {"preconditioner identities", preconditioner_identities},
      {"ALS behavior", als_behavior},
      {"desk-scale Schlogl", desk_schlogl},
      {"desk-scale Burgers", desk_burgers},
      {"reproducibility", reproducibility},
  };

  std::ofstream record(g_workdir / "acceptance.txt");
  int hard_failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[2048];
    std::snprintf(line, sizeof line, "criterion %2d %s: %s | %s | %.1f s\n", id, o.pass ? "PASS" : "FAIL",
                  criteria[i].first.c_str(), o.detail.str().c_str(), secs);
    std::fputs(line, stdout);
    std::fflush(stdout);
    record << line << std::flush;
    if (!o.pass && !allowed.count(id)) ++hard_failures;
  }
  return hard_failures == 0 ? 0 : 1;
}
