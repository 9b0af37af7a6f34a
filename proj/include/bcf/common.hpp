// Shared plumbing: error taxonomy, dense 2-D array, deterministic RNG,
// numeric formatting, small string/CSV helpers.
#ifndef BCF_COMMON_HPP
#define BCF_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcf {

// ---------------------------------------------------------------------------
// Errors

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration, shape mismatch, or violated call precondition.
class config_error : public error {
 public:
  explicit config_error(const std::string& msg) : error(msg) {}
};

/// Malformed or inconsistent input data.
class data_error : public error {
 public:
  explicit data_error(const std::string& msg) : error(msg) {}
};

/// A forward produced NaN/Inf or a statistic is undefined.
class numeric_error : public error {
 public:
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

/// Wrong API/CLI usage (non-scalar backward root, bad flags, ...).
class usage_error : public error {
 public:
  explicit usage_error(const std::string& msg) : error(msg) {}
};

// ---------------------------------------------------------------------------
// Dense row-major 2-D array (plain data, no autodiff)

struct Array2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Array2D() = default;
  Array2D(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return at(r, c); }
  double operator()(std::size_t r, std::size_t c) const { return at(r, c); }
  std::size_t size() const { return data.size(); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Deterministic RNG stream
//
// mt19937_64 output is fully specified by the standard; the uniform/normal
// transforms below avoid std::*_distribution so that the same seed yields
// bit-identical streams on every toolchain.

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::size_t uniform_int(std::size_t n) {
    if (n == 0) throw usage_error("uniform_int: n must be positive");
    const std::uint64_t nn = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % nn;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return static_cast<std::size_t>(x % nn);
  }

  /// Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

  /// k distinct indices from [0, n), partial Fisher-Yates order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw usage_error("sample_without_replacement: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

  /// k indices from [0, n), drawn independently (duplicates possible).
  std::vector<std::size_t> sample_with_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(uniform_int(n));
    return out;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Numeric formatting and hashing

/// Format with 17 significant digits (round-trips any double).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

/// Fixed decimals for display tables.
inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_u64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Small string helpers

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw data_error("mean of empty vector");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population (1/n) standard deviation.
inline double stddev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace bcf

#endif  // BCF_COMMON_HPP
