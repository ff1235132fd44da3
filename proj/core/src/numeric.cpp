#include "ppt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ppt {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<float> softmax_impl(std::span<const float> logits, const std::span<const float>* sizes) {
  if (logits.empty()) {
    throw std::invalid_argument("softmax: empty row");
  }
  if (sizes != nullptr && sizes->size() != logits.size()) {
    throw std::invalid_argument("softmax: logits/sizes length mismatch");
  }
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      throw std::invalid_argument("softmax: non-finite logit");
    }
    z[i] = static_cast<double>(logits[i]);
    if (sizes != nullptr) {
      const float s = (*sizes)[i];
      if (!std::isfinite(s) || s < 1.0f) {
        throw std::invalid_argument("softmax: token size must be >= 1");
      }
      z[i] += std::log(static_cast<double>(s));
    }
  }
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  std::vector<float> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = static_cast<float>(z[i] / total);
  }
  return out;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(splitmix64(seed)) {
  if (state_ == 0) {
    state_ = 0x9E3779B97F4A7C15ULL;
  }
}

std::uint64_t Rng::next_u64() {
  std::uint64_t x = state_;
  x ^= x >> 12;
  x ^= x << 25;
  x ^= x >> 27;
  state_ = x;
  return x * 0x2545F4914F6CDD1DULL;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<float> softmax_size_biased(std::span<const float> logits, std::span<const float> sizes) {
  return softmax_impl(logits, &sizes);
}

std::vector<float> row_softmax(std::span<const float> logits) {
  return softmax_impl(logits, nullptr);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: length mismatch");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) {
    return 0.0;
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

namespace {

template <typename T>
double variance_of(std::span<const T> values) {
  if (values.empty()) {
    throw std::invalid_argument("population_variance: empty input");
  }
  double mean = 0.0;
  for (const T v : values) {
    mean += static_cast<double>(v);
  }
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (const T v : values) {
    const double d = static_cast<double>(v) - mean;
    acc += d * d;
  }
  return acc / static_cast<double>(values.size());
}

}  // namespace

double population_variance(std::span<const double> values) { return variance_of(values); }
double population_variance(std::span<const float> values) { return variance_of(values); }

double l2_norm(std::span<const float> v) {
  double acc = 0.0;
  for (const float x : v) {
    acc += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(acc);
}

std::vector<float> attend(std::span<const float> query, const Matrix& keys, const Matrix& values,
                          std::span<const float> sizes, float scale) {
  if (keys.cols() != query.size() || keys.rows() != values.rows() || keys.rows() != sizes.size()) {
    throw std::invalid_argument("attend: shape mismatch");
  }
  std::vector<float> logits(keys.rows());
  for (std::size_t j = 0; j < keys.rows(); ++j) {
    double dot = 0.0;
    const auto k = keys.row(j);
    for (std::size_t c = 0; c < query.size(); ++c) {
      dot += static_cast<double>(query[c]) * static_cast<double>(k[c]);
    }
    logits[j] = static_cast<float>(dot * static_cast<double>(scale));
  }
  const auto probs = softmax_size_biased(logits, sizes);
  std::vector<double> acc(values.cols(), 0.0);
  for (std::size_t j = 0; j < values.rows(); ++j) {
    const double p = probs[j];
    const auto v = values.row(j);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      acc[c] += p * static_cast<double>(v[c]);
    }
  }
  return {acc.begin(), acc.end()};
}

Matrix affine(const Matrix& a, const Matrix& b, std::span<const float> bias) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + ")");
  }
  if (!bias.empty() && bias.size() != b.cols()) {
    throw std::invalid_argument("affine: bias length mismatch");
  }
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  Matrix out(n, m);
  std::vector<double> acc(m);
  const float* bdata = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    if (bias.empty()) {
      std::fill(acc.begin(), acc.end(), 0.0);
    } else {
      for (std::size_t j = 0; j < m; ++j) {
        acc[j] = static_cast<double>(bias[j]);
      }
    }
    const auto arow = a.row(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const double av = arow[k];
      const float* brow = bdata + k * m;
      for (std::size_t j = 0; j < m; ++j) {
        acc[j] += av * static_cast<double>(brow[j]);
      }
    }
    auto orow = out.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      orow[j] = static_cast<float>(acc[j]);
    }
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) { return affine(a, b, {}); }

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(j, i) = a(i, j);
    }
  }
  return out;
}

Matrix layernorm(const Matrix& x, std::span<const float> gamma, std::span<const float> beta, float eps) {
  if (gamma.size() != x.cols() || beta.size() != x.cols()) {
    throw std::invalid_argument("layernorm: parameter length mismatch");
  }
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto in = x.row(i);
    double mean = 0.0;
    for (const float v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (const float v : in) {
      const double d = v - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    auto o = out.row(i);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = static_cast<float>((in[c] - mean) * inv * gamma[c] + beta[c]);
    }
  }
  return out;
}

float gelu(float x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  const double v = x;
  return static_cast<float>(0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v))));
}

void gelu_inplace(Matrix& x) {
  for (float& v : x.data()) v = gelu(v);
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace ppt
