#pragma once

// TTHJB1 binary format, little-endian:
//   "TTHJB1", u64 d, u64 dims[d], u64 ranks[d-1], cores (row-major f64),
//   u64 max_degree, f64 a, f64 b, u8 inner-product tag, coeffs (row-major f64).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hjbtt/basis.hpp"
#include "hjbtt/errors.hpp"
#include "hjbtt/tt_core.hpp"

namespace hjbtt {

inline constexpr std::array<char, 6> kTTMagic = {'T', 'T', 'H', 'J', 'B', '1'};

struct StoredValue {
  TTTensor value;
  OrthoBasis1D basis;
};

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw ConfigError("TT file: unexpected end of data");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace detail

inline void write_tt(std::ostream& os, const TTTensor& tt, const OrthoBasis1D& basis) {
  os.write(kTTMagic.data(), kTTMagic.size());
  detail::write_le<std::uint64_t>(os, tt.order());
  for (std::size_t n : tt.dims()) detail::write_le<std::uint64_t>(os, n);
  for (std::size_t r : tt.ranks()) detail::write_le<std::uint64_t>(os, r);
  for (std::size_t k = 0; k < tt.order(); ++k) {
    const RowMatrix& c = tt.core(k);
    for (Eigen::Index i = 0; i < c.size(); ++i) detail::write_le<double>(os, c.data()[i]);
  }
  detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(basis.max_degree()));
  detail::write_le<double>(os, basis.lower());
  detail::write_le<double>(os, basis.upper());
  detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(basis.inner_product()));
  const Eigen::MatrixXd& coeffs = basis.coefficients();
  for (Eigen::Index i = 0; i < coeffs.rows(); ++i)
    for (Eigen::Index j = 0; j < coeffs.cols(); ++j) detail::write_le<double>(os, coeffs(i, j));
  if (!os) throw Error("write_tt: stream write failed");
}

inline StoredValue read_tt(std::istream& is) {
  std::array<char, 6> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kTTMagic)
    throw ConfigError("TT file: bad magic, expected TTHJB1");
  const auto d = detail::read_le<std::uint64_t>(is);
  if (d < 1 || d > 4096) throw ConfigError("TT file: implausible order");
  std::vector<std::size_t> dims(d), ranks(d - 1);
  for (auto& n : dims) n = detail::read_le<std::uint64_t>(is);
  for (auto& r : ranks) r = detail::read_le<std::uint64_t>(is);
  std::vector<RowMatrix> cores;
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t rl = k == 0 ? 1 : ranks[k - 1];
    const std::size_t rr = k + 1 == d ? 1 : ranks[k];
    if (rl == 0 || rr == 0 || dims[k] == 0 || rl * dims[k] * rr > (std::size_t{1} << 28))
      throw ConfigError("TT file: implausible core shape");
    RowMatrix c(static_cast<Eigen::Index>(rl * dims[k]), static_cast<Eigen::Index>(rr));
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = detail::read_le<double>(is);
    cores.push_back(std::move(c));
  }
  const auto degree = detail::read_le<std::uint64_t>(is);
  if (degree > static_cast<std::uint64_t>(OrthoBasis1D::kMaxDegree))
    throw ConfigError("TT file: basis degree out of range");
  const double a = detail::read_le<double>(is);
  const double b = detail::read_le<double>(is);
  const auto tag = detail::read_le<std::uint8_t>(is);
  if (tag != 1 && tag != 2) throw ConfigError("TT file: unknown inner-product tag");
  const auto n = static_cast<Eigen::Index>(degree + 1);
  Eigen::MatrixXd coeffs(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) coeffs(i, j) = detail::read_le<double>(is);
  try {
    return {TTTensor(std::move(cores), std::move(dims)),
            OrthoBasis1D::from_coefficients(a, b, static_cast<InnerProduct>(tag), std::move(coeffs))};
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("TT file: ") + e.what());
  }
}

inline void save_tt(const std::string& path, const TTTensor& tt, const OrthoBasis1D& basis) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  write_tt(os, tt, basis);
}

inline StoredValue load_tt(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_tt(is);
}

}  // namespace hjbtt
