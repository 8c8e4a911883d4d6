#pragma once

// Dense vector/matrix substrate and seeded randomness shared by every module.
// Everything is 64-bit; there is deliberately no float path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lindml/error.hpp"

namespace lindml {

/// Norms below this are treated as a dead activation, not clamped.
inline constexpr double kNormalizationFloor = 1e-8;

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : v_(dim, fill) {
    if (dim == 0) fail(ErrorKind::invalid_argument, "vector dimension must be positive");
  }
  Vector(std::initializer_list<double> init) : v_(init) {}
  explicit Vector(std::vector<double> values) : v_(std::move(values)) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }

  double& operator[](std::size_t i) noexcept { return v_[i]; }
  double operator[](std::size_t i) const noexcept { return v_[i]; }

  double* data() noexcept { return v_.data(); }
  const double* data() const noexcept { return v_.data(); }
  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  std::span<double> span() noexcept { return v_; }
  std::span<const double> span() const noexcept { return v_; }
  const std::vector<double>& values() const noexcept { return v_; }

  bool all_finite() const noexcept {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }

  Vector& operator+=(const Vector& o);
  Vector& operator-=(const Vector& o);
  Vector& operator*=(double s) noexcept {
    for (double& x : v_) x *= s;
    return *this;
  }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> v_;
};

namespace detail {

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorKind::dimension_mismatch, std::string(what) + ": dimension mismatch (" +
                                            std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

// Four independent accumulators so the loop pipelines without -ffast-math.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (std::size_t i = body; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y += a * x
inline void axpy(double a, const double* __restrict x, double* __restrict y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

namespace gemm {

// One row of C += A_row * B over a W-wide column block; accumulators stay in registers.
template <std::size_t W>
inline void row_block(const double* a_row, const double* b, double* c, std::size_t k,
                      std::size_t ldb) noexcept {
  double acc[W];
  for (std::size_t j = 0; j < W; ++j) acc[j] = c[j];
  for (std::size_t p = 0; p < k; ++p) {
    const double a = a_row[p];
    const double* bp = b + p * ldb;
    for (std::size_t j = 0; j < W; ++j) acc[j] += a * bp[j];
  }
  for (std::size_t j = 0; j < W; ++j) c[j] = acc[j];
}

}  // namespace gemm

// C (m x n) += A (m x k) * B (k x n), all row-major and contiguous.
inline void matmul_add(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n) noexcept {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    double* c_row = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) gemm::row_block<16>(a_row, b + j, c_row + j, k, n);
    for (; j + 8 <= n; j += 8) gemm::row_block<8>(a_row, b + j, c_row + j, k, n);
    for (; j + 4 <= n; j += 4) gemm::row_block<4>(a_row, b + j, c_row + j, k, n);
    for (; j < n; ++j) gemm::row_block<1>(a_row, b + j, c_row + j, k, n);
  }
}

inline double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(const double* a, const double* b, std::size_t n) noexcept {
  return std::sqrt(squared_distance(a, b, n));
}

}  // namespace detail

inline Vector& Vector::operator+=(const Vector& o) {
  detail::require_same_dim(size(), o.size(), "vector +=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

inline Vector& Vector::operator-=(const Vector& o) {
  detail::require_same_dim(size(), o.size(), "vector -=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(double s, Vector v) { return v *= s; }

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) fail(ErrorKind::invalid_argument, "matrix shape must be positive");
  }
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) fail(ErrorKind::invalid_argument, "matrix shape must be positive");
    if (data_.size() != rows * cols) {
      fail(ErrorKind::dimension_mismatch, "matrix entry count does not equal rows x cols");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  void fill(double x) noexcept { std::fill(data_.begin(), data_.end(), x); }

  Vector operator*(const Vector& v) const {
    detail::require_same_dim(cols_, v.size(), "matrix-vector product");
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = detail::dot(&data_[r * cols_], v.data(), cols_);
    return out;
  }

  /// Changes the shape, keeping the allocation when it is large enough.
  /// Entries are unspecified afterwards.
  void reshape(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) fail(ErrorKind::invalid_argument, "matrix shape must be positive");
    rows_ = rows;
    cols_ = cols;
    data_.resize(rows * cols);
  }

  void transpose_into(Matrix& t) const {
    t.reshape(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) t.data_[c * rows_ + r] = data_[r * cols_ + c];
    }
  }

  Matrix transposed() const {
    Matrix t;
    transpose_into(t);
    return t;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Deterministic random stream. One instance per consumer; never shared across threads.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Independent stream for a sub-task, derived from a base seed by offset.
  static SeededRng derive(std::uint64_t seed, std::uint64_t stream) {
    return SeededRng(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1)));
  }

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next() { return engine_(); }

  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  static std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double dot(const Vector& a, const Vector& b) {
  detail::require_same_dim(a.size(), b.size(), "dot");
  return detail::dot(a.data(), b.data(), a.size());
}

inline double norm(const Vector& v) noexcept { return std::sqrt(detail::dot(v.data(), v.data(), v.size())); }

inline double euclid_dist(const Vector& a, const Vector& b) {
  detail::require_same_dim(a.size(), b.size(), "euclid_dist");
  return detail::distance(a.data(), b.data(), a.size());
}

inline Vector unit_normalize(const Vector& z) {
  const double n = norm(z);
  if (!(n >= kNormalizationFloor)) {
    fail(ErrorKind::degenerate, "unit_normalize: norm " + std::to_string(n) +
                                    " is below the normalization floor (dead activation)");
  }
  Vector x = z;
  x *= 1.0 / n;
  return x;
}

/// d(z/|z|)/dz = (I - x x^T) / |z|, with x = z/|z|.
inline Matrix unit_normalize_jacobian(const Vector& z) {
  const Vector x = unit_normalize(z);
  const double inv = 1.0 / norm(z);
  const std::size_t d = z.size();
  Matrix j(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      j(r, c) = ((r == c ? 1.0 : 0.0) - x[r] * x[c]) * inv;
    }
  }
  return j;
}

/// Jacobian-vector product with the normalization Jacobian, without forming it.
inline Vector apply_unit_normalize_jacobian(const Vector& z, const Vector& g) {
  detail::require_same_dim(z.size(), g.size(), "normalization jacobian product");
  const double n = norm(z);
  if (!(n >= kNormalizationFloor)) {
    fail(ErrorKind::degenerate, "normalization jacobian: norm below the normalization floor");
  }
  const double inv = 1.0 / n;
  const double xg = detail::dot(z.data(), g.data(), z.size()) * inv;
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (g[i] - z[i] * inv * xg) * inv;
  return out;
}

inline Vector standard_normal_vector(std::size_t dim, SeededRng& rng) {
  if (dim == 0) fail(ErrorKind::invalid_argument, "standard_normal_vector: dim must be >= 1");
  Vector v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

/// Uniform point on the unit (dim-1)-sphere.
inline Vector uniform_sphere_point(std::size_t dim, SeededRng& rng) {
  for (;;) {
    Vector v = standard_normal_vector(dim, rng);
    if (norm(v) >= kNormalizationFloor) return unit_normalize(v);
  }
}

/// FNV-1a over the raw bytes of a sequence of doubles.
inline std::uint64_t fnv1a(std::span<const double> values,
                           std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace lindml
