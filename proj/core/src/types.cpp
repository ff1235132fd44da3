#include "ppt/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppt/error.hpp"

namespace ppt {

std::size_t ModelConfig::hidden_dim() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(dim)));
}

void ModelConfig::validate() const {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
    throw ConfigError("image_size (" + std::to_string(image_size) + ") must be a positive multiple of patch_size (" +
                      std::to_string(patch_size) + ")");
  }
  if (channels == 0 || dim == 0 || depth == 0 || heads == 0 || num_classes == 0) {
    throw ConfigError("channels, dim, depth, heads and num_classes must be positive");
  }
  if (dim % heads != 0) {
    throw ConfigError("dim (" + std::to_string(dim) + ") must be divisible by heads (" + std::to_string(heads) + ")");
  }
  if (!(mlp_ratio > 0.0) || !std::isfinite(mlp_ratio) || hidden_dim() == 0) {
    throw ConfigError("mlp_ratio must be positive");
  }
}

ModelConfig ModelConfig::deit_tiny() {
  ModelConfig c;
  c.dim = 192;
  c.heads = 3;
  return c;
}

ModelConfig ModelConfig::deit_small() { return ModelConfig{}; }

ModelConfig ModelConfig::deit_base() {
  ModelConfig c;
  c.dim = 768;
  c.heads = 12;
  return c;
}

std::optional<ModelConfig> ModelConfig::preset(const std::string& name) {
  if (name == "deit-ti" || name == "deit-tiny") return deit_tiny();
  if (name == "deit-s" || name == "deit-small") return deit_small();
  if (name == "deit-b" || name == "deit-base") return deit_base();
  return std::nullopt;
}

double TokenBatch::total_size() const {
  double total = 0.0;
  for (const float s : sizes) total += s;
  return total;
}

void TokenBatch::check() const {
  if (sizes.size() != tokens.rows()) {
    throw std::invalid_argument("TokenBatch: sizes length differs from token count");
  }
  if (tokens.rows() == 0) {
    throw std::invalid_argument("TokenBatch: no CLS token");
  }
  if (sizes[0] != 1.0f) {
    throw std::invalid_argument("TokenBatch: CLS size must stay 1");
  }
  if (std::any_of(sizes.begin(), sizes.end(), [](float s) { return !(s >= 1.0f); })) {
    throw std::invalid_argument("TokenBatch: token sizes must be >= 1");
  }
}

Matrix AttentionByproducts::mean_keys() const {
  if (keys.empty()) {
    throw std::invalid_argument("AttentionByproducts: no heads");
  }
  const std::size_t n = keys.front().rows();
  const std::size_t c = keys.front().cols();
  Matrix out(n, c);
  std::vector<double> acc(c);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const Matrix& k : keys) {
      if (k.rows() != n || k.cols() != c) {
        throw std::invalid_argument("AttentionByproducts: heads disagree on key shape");
      }
      const auto row = k.row(i);
      for (std::size_t j = 0; j < c; ++j) acc[j] += row[j];
    }
    auto o = out.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = static_cast<float>(acc[j] / static_cast<double>(keys.size()));
    }
  }
  return out;
}

const char* to_string(Policy p) { return p == Policy::prune ? "prune" : "pool"; }

MergeMap MergeMap::identity(std::size_t count) {
  MergeMap m;
  m.groups.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    m.groups[i] = {static_cast<std::uint32_t>(i)};
  }
  return m;
}

std::size_t MergeMap::inputs() const {
  std::size_t n = pruned.size();
  for (const auto& g : groups) n += g.size();
  return n;
}

bool MergeMap::is_partition() const {
  const std::size_t n = inputs();
  std::vector<bool> seen(n, false);
  auto mark = [&](std::uint32_t idx) {
    if (idx >= n || seen[idx]) return false;
    seen[idx] = true;
    return true;
  };
  for (const auto& g : groups) {
    if (g.empty()) return false;
    for (const auto idx : g) {
      if (!mark(idx)) return false;
    }
  }
  for (const auto idx : pruned) {
    if (!mark(idx)) return false;
  }
  return true;
}

}  // namespace ppt
