#pragma once

// Halton points with optional digit scrambling. Scrambling applies an
// independent random permutation of {0..b-1} to every (dimension, digit
// position) pair, keyed by the seed.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hjbtt/errors.hpp"
#include "hjbtt/rng.hpp"

namespace hjbtt {

inline std::vector<std::uint32_t> first_primes(std::size_t count) {
  std::vector<std::uint32_t> primes;
  for (std::uint32_t c = 2; primes.size() < count; ++c) {
    bool prime = true;
    for (std::uint32_t p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

class HaltonSequence {
 public:
  HaltonSequence(std::size_t dim, bool scramble, std::uint64_t seed)
      : primes_(first_primes(dim)), perms_(dim), scrambled_(scramble) {
    detail::require_shape(dim >= 1, "HaltonSequence: dimension must be >= 1");
    for (std::size_t j = 0; j < dim; ++j) {
      const std::uint32_t b = primes_[j];
      // enough digits to exhaust double precision
      const auto digits = static_cast<std::size_t>(std::ceil(53.0 / std::log2(static_cast<double>(b))));
      perms_[j].resize(digits);
      CounterRng rng = CounterRng(seed).derive("halton").derive(j);
      for (std::size_t k = 0; k < digits; ++k) {
        auto& p = perms_[j][k];
        p.resize(b);
        std::iota(p.begin(), p.end(), 0u);
        if (scramble) {
          CounterRng r = rng.derive(k);
          for (std::uint32_t i = b - 1; i > 0; --i) {
            const auto s = static_cast<std::uint32_t>(r.uniform_int(0, i));
            std::swap(p[i], p[s]);
          }
        }
      }
    }
  }

  [[nodiscard]] std::size_t dim() const { return primes_.size(); }

  /// Coordinate j of the point with index i (radical inverse of i in base p_j).
  [[nodiscard]] double coordinate(std::uint64_t i, std::size_t j) const {
    const std::uint32_t b = primes_[j];
    const auto& perm = perms_[j];
    const double inv_b = 1.0 / static_cast<double>(b);
    double scale = inv_b;
    double x = 0.0;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const auto digit = static_cast<std::uint32_t>(i % b);
      i /= b;
      x += perm[k][digit] * scale;
      scale *= inv_b;
      // unscrambled trailing digits are zero; scrambled ones map 0 to perm[k][0]
      if (i == 0 && !scrambled_) break;
    }
    return x;
  }

 private:
  std::vector<std::uint32_t> primes_;
  std::vector<std::vector<std::vector<std::uint32_t>>> perms_;
  bool scrambled_;
};

/// N Halton points (indices 1..N) mapped affinely to [-halfwidth, halfwidth]^d,
/// returned as a d x N matrix.
inline Eigen::MatrixXd generate_qmc_samples(std::size_t d, double halfwidth, std::size_t n,
                                            std::uint64_t seed, bool scramble = true) {
  detail::require_shape(n >= 1, "generate_qmc_samples: N must be >= 1");
  detail::require_shape(halfwidth > 0.0, "generate_qmc_samples: half-width must be positive");
  const HaltonSequence seq(d, scramble, seed);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      pts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          halfwidth * (2.0 * seq.coordinate(i + 1, j) - 1.0);
  return pts;
}

}  // namespace hjbtt
