#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppt/numeric.hpp"

namespace ppt {

/// Generic ViT shape. Only the shape parameters matter; any ViT variant
/// reducible to "patchify + N blocks + CLS head" can be described.
struct ModelConfig {
  std::size_t image_size = 224;
  std::size_t patch_size = 16;
  std::size_t channels = 3;
  std::size_t dim = 384;
  std::size_t depth = 12;
  std::size_t heads = 6;
  double mlp_ratio = 4.0;
  std::size_t num_classes = 1000;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  /// Token count at the input, CLS included.
  std::size_t num_tokens() const { return num_patches() + 1; }
  std::size_t head_dim() const { return dim / heads; }
  std::size_t hidden_dim() const;
  std::size_t patch_vector() const { return channels * patch_size * patch_size; }

  /// Throws ConfigError when the shape is inconsistent.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;

  static ModelConfig deit_tiny();
  static ModelConfig deit_small();
  static ModelConfig deit_base();
  /// "deit-ti" / "deit-tiny", "deit-s" / "deit-small", "deit-b" / "deit-base".
  static std::optional<ModelConfig> preset(const std::string& name);
};

/// Normalized image, height x width x channels, channel-last.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  float at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * channels + c]; }
};

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const RgbImage&) const = default;
};

using SizeVector = std::vector<float>;

/// Token features for one image. Row 0 is CLS; sizes[i] counts the original
/// patches token i stands for.
struct TokenBatch {
  Matrix tokens;
  SizeVector sizes;

  std::size_t count() const { return tokens.rows(); }
  double total_size() const;
  /// Throws std::invalid_argument if the CLS/size invariants are broken.
  void check() const;
};

/// Quantities of one MSA evaluation consumed by the compressors, kept per head.
struct AttentionByproducts {
  std::vector<std::vector<float>> cls_attention;  // [head][N], row 0 of A
  std::vector<std::vector<float>> value_norms;    // [head][N], |V_i|
  std::vector<Matrix> keys;                       // [head] N x head_dim

  std::size_t heads() const { return keys.size(); }
  std::size_t tokens() const { return keys.empty() ? 0 : keys.front().rows(); }
  /// Head-averaged keys: float(sum_h double(K_h) / H).
  Matrix mean_keys() const;
};

enum class Policy { prune, pool };

const char* to_string(Policy p);

struct PolicyDecision {
  Policy policy = Policy::pool;
  /// Redundancy statistic the decision was derived from (score variance
  /// or mean similarity depending on the metric).
  double statistic = 0.0;

  bool operator==(const PolicyDecision&) const = default;
};

/// Token provenance. As a per-stage delta, indices refer to the image tokens
/// entering the stage (0-based, CLS excluded) and groups[k] lists the inputs
/// that became output image token k. Flattened, indices are original patches.
struct MergeMap {
  std::vector<std::vector<std::uint32_t>> groups;
  std::vector<std::uint32_t> pruned;

  static MergeMap identity(std::size_t count);
  std::size_t inputs() const;
  /// Each index 0..inputs()-1 appears exactly once, groups nonempty.
  bool is_partition() const;

  bool operator==(const MergeMap&) const = default;
};

struct LayerTrace {
  std::size_t layer = 0;  // 1-based
  std::size_t tokens_in = 0;   // at the MSA input
  std::size_t tokens_out = 0;  // at the FFN input (after any compression)
  std::size_t r = 0;           // tokens removed at this layer
  std::optional<PolicyDecision> policy;
  /// Variance of the significance scores, recorded at compression layers
  /// and at every layer in observe mode.
  std::optional<double> score_variance;
  std::optional<MergeMap> merge_delta;
  std::optional<double> dpc_cutoff;
};

}  // namespace ppt
