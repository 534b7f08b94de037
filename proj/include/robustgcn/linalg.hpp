#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace robustgcn {

/// Dense row-major matrix of doubles. Small helper, not a full linear
/// algebra library; the model only needs matmul, transpose-products and
/// element-wise passes.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix& o) const = default;
};

/// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);

/// c = a^T * b  (a: n x k, b: n x m, c: k x m)
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

/// c = a * b^T  (a: n x k, b: m x k, c: n x m)
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

/// dst += s * src (same shape)
void add_scaled(Matrix& dst, const Matrix& src, double s);

bool all_finite(const Matrix& m);
bool all_finite(std::span<const double> v);

double max_abs_diff(const Matrix& a, const Matrix& b);

/// Deterministic RNG (splitmix64 core). Distribution mapping is done by
/// hand so streams are bit-identical across platforms and standard library
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) { warm_up(); }

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53 random bits.
  double uniform01();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n), rejection-sampled (unbiased).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (two uniforms per call).
  double normal();

  /// Fisher-Yates shuffle with this generator.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  // splitmix64-style state advance; deterministic and portable.
  std::uint64_t state_;
  void warm_up();
};

}  // namespace robustgcn
