#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfgru {

// Error taxonomy: schema_error for malformed input files, numeric_error for
// non-finite values, error for everything else (shape mismatches, misuse).
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct schema_error : error {
  using error::error;
};
struct numeric_error : error {
  using error::error;
};

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::size_t size() const { return rows * cols; }
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

// Deterministic splitmix64 stream. Own implementation so that identical seeds
// give identical sequences on every platform and standard-library version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller (deterministic, no libm distribution state).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  // Independent child stream; derived from the seed, leaves this stream intact.
  Rng fork(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Vec matvec(const Matrix& m, const Vec& v) {
  if (m.cols != v.size()) {
    throw error("matvec: shape mismatch, matrix " + shape_str(m) + " vs vector " +
                std::to_string(v.size()));
  }
  Vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = &m.data[i * m.cols];
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * v[j];
    out[i] = s;
  }
  return out;
}

// out[j] = sum_i m(i,j) * v[i], i.e. m^T v. Used on backward passes.
inline Vec matvec_transposed(const Matrix& m, const Vec& v) {
  if (m.rows != v.size()) {
    throw error("matvec_transposed: shape mismatch, matrix " + shape_str(m) + " vs vector " +
                std::to_string(v.size()));
  }
  Vec out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double vi = v[i];
    const double* row = &m.data[i * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j] * vi;
  }
  return out;
}

// acc(i,j) += a[i] * b[j]
inline void add_outer(Matrix& acc, const Vec& a, const Vec& b) {
  if (acc.rows != a.size() || acc.cols != b.size()) {
    throw error("add_outer: shape mismatch, matrix " + shape_str(acc) + " vs vectors " +
                std::to_string(a.size()) + "," + std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < acc.rows; ++i) {
    double* row = &acc.data[i * acc.cols];
    const double ai = a[i];
    for (std::size_t j = 0; j < acc.cols; ++j) row[j] += ai * b[j];
  }
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vec sigmoid(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

inline Vec tanh(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

inline void check_same_length(const Vec& a, const Vec& b, const char* op) {
  if (a.size() != b.size()) {
    throw error(std::string(op) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  }
}

inline Vec hadamard(const Vec& a, const Vec& b) {
  check_same_length(a, b, "hadamard");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

inline Vec add(const Vec& a, const Vec& b) {
  check_same_length(a, b, "add");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline void add_inplace(Vec& a, const Vec& b) {
  check_same_length(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Glorot-uniform initialization: entries in [-b, b], b = sqrt(6 / (fan_in + fan_out)).
inline Matrix init_uniform(Rng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in,
                           std::size_t fan_out) {
  if (rows == 0 || cols == 0 || fan_in + fan_out == 0) {
    throw error("init_uniform: dimensions must be positive");
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.uniform(-bound, bound);
  return m;
}

// Central-difference gradient of a scalar function, (f(p+h e_i) - f(p-h e_i)) / 2h.
inline std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> params, double h) {
  if (!(h > 0.0)) throw error("finite_diff_grad: step must be positive");
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double p0 = params[i];
    params[i] = p0 + h;
    const double fp = f(params);
    params[i] = p0 - h;
    const double fm = f(params);
    params[i] = p0;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw numeric_error("finite_diff_grad: non-finite function value at coordinate " +
                          std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace sfgru
