#pragma once

// Initial-value samplers and the CSV exchange format (one state per row).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hjbtt/dynamics.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/rng.hpp"

namespace hjbtt::harness {

inline constexpr int kPolynomialCheckGrid = 1001;

namespace detail {

inline double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

}  // namespace detail

/// Random polynomial profile p(x) = q(x) (x - 1)(x + 1), with deg q uniform in
/// [min_degree, max_degree] and standard normal coefficients, scaled so that
/// max |p| over a 1001-point grid on [-1, 1] equals `rescale_to`.
inline std::vector<double> random_polynomial_profile(CounterRng rng, int min_degree, int max_degree,
                                                     double rescale_to) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    CounterRng r = rng.derive(attempt);
    const auto deg = static_cast<int>(r.uniform_int(min_degree, max_degree));
    std::vector<double> q(static_cast<std::size_t>(deg) + 1);
    for (double& c : q) c = r.normal();
    // multiply by x^2 - 1
    std::vector<double> p(q.size() + 2, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
      p[i] -= q[i];
      p[i + 2] += q[i];
    }
    double peak = 0.0;
    for (int k = 0; k < kPolynomialCheckGrid; ++k) {
      const double x = -1.0 + 2.0 * k / (kPolynomialCheckGrid - 1);
      peak = std::max(peak, std::abs(detail::horner(p, x)));
    }
    if (!(peak > 0.0) || !std::isfinite(peak)) continue;  // degenerate draw
    for (double& c : p) c *= rescale_to / peak;
    return p;
  }
}

/// `count` states, each a random polynomial evaluated at the interior grid
/// nodes of a d-point discretization of [-1, 1]. Returns d x count.
inline Eigen::MatrixXd sample_initial_polynomial(std::size_t d, std::size_t count, int min_degree, int max_degree,
                                                 double rescale_to, std::uint64_t seed) {
  if (!(rescale_to > 0.0)) throw ConfigError("sample_initial_polynomial: rescale_to must be positive");
  if (min_degree < 0 || min_degree > max_degree) throw ConfigError("sample_initial_polynomial: bad degree range");
  const auto grid = hjbtt::detail::interior_grid(d);
  const CounterRng base = CounterRng(seed).derive("iv/polynomial");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
  for (std::size_t s = 0; s < count; ++s) {
    const auto p = random_polynomial_profile(base.derive(s), min_degree, max_degree, rescale_to);
    for (std::size_t i = 0; i < d; ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = detail::horner(p, grid[i]);
  }
  return out;
}

/// `count` states with i.i.d. U(low, high) components. Returns d x count.
inline Eigen::MatrixXd sample_initial_uniform(std::size_t d, std::size_t count, double low, double high,
                                              std::uint64_t seed) {
  if (!(low < high)) throw ConfigError("sample_initial_uniform: low must be < high");
  const CounterRng base = CounterRng(seed).derive("iv/uniform");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
  for (std::size_t s = 0; s < count; ++s) {
    CounterRng r = base.derive(s);
    for (std::size_t i = 0; i < d; ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = r.uniform(low, high);
  }
  return out;
}

inline void write_states_csv(const std::string& path, const Eigen::MatrixXd& states) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  char buf[32];
  for (Eigen::Index s = 0; s < states.cols(); ++s) {
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", states(i, s));
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os) throw Error("write_states_csv: write failed for " + path);
}

/// Reads a CSV of states (one per row). Blank lines and lines starting with
/// '#' are skipped. With expected_dim > 0 every row must have that many columns.
inline Eigen::MatrixXd read_states_csv(const std::string& path, std::size_t expected_dim = 0) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open initial-value file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no initial values");
  if (expected_dim > 0 && rows.front().size() != expected_dim)
    throw ConfigError(path + ": expected " + std::to_string(expected_dim) + " columns, got " +
                      std::to_string(rows.front().size()));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t i = 0; i < rows[s].size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = rows[s][i];
  return out;
}

}  // namespace hjbtt::harness
