#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ppt {

/// Dense row-major matrix of 32-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Seeded generator: splitmix64 seeding followed by xorshift64*.
///
///   state = splitmix64(seed)            (0 is replaced by 0x9E3779B97F4A7C15)
///   next:  x ^= x >> 12; x ^= x << 25; x ^= x >> 27;
///          return x * 0x2545F4914F6CDD1D
///
/// The integer stream is bit-exact on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller (cosine branch only).
  double normal();
  bool coin() { return (next_u64() >> 63) != 0; }

 private:
  std::uint64_t state_;
};

// Softmax of (logits + log sizes) with max-subtraction. Throws on length
// mismatch, non-finite input, or a size below 1.
std::vector<float> softmax_size_biased(std::span<const float> logits, std::span<const float> sizes);
std::vector<float> row_softmax(std::span<const float> logits);

/// a.b / (|a||b|), or 0 when either norm is below 1e-12.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Mean squared deviation from the mean (divides by N).
double population_variance(std::span<const double> values);
double population_variance(std::span<const float> values);

double l2_norm(std::span<const float> v);

/// Attention-weighted sum of value rows for one query:
/// sum_j softmax(q.k_j * scale + log s_j) v_j.
std::vector<float> attend(std::span<const float> query, const Matrix& keys, const Matrix& values,
                          std::span<const float> sizes, float scale);

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b + bias (bias broadcast over rows).
Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias);
Matrix transpose(const Matrix& a);
Matrix layernorm(const Matrix& x, std::span<const float> gamma, std::span<const float> beta,
                 float eps = 1e-6f);

/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))), evaluated in double.
float gelu(float x);
void gelu_inplace(Matrix& x);

bool all_finite(std::span<const float> values);

}  // namespace ppt
