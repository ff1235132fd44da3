#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "ppt/compress.hpp"
#include "ppt/types.hpp"

namespace ppt {

// FLOPs here count one multiply-accumulate as one operation. LayerNorm,
// GELU, softmax and residual adds are not counted.

struct BlockFlops {
  std::uint64_t msa = 0;
  std::uint64_t ffn = 0;
};

struct LayerFlops {
  std::size_t layer = 0;
  std::size_t tokens_msa = 0;
  std::size_t tokens_ffn = 0;
  std::uint64_t msa = 0;
  std::uint64_t ffn = 0;
};

struct FlopsReport {
  std::vector<LayerFlops> layers;
  std::uint64_t patch_embed = 0;
  std::uint64_t head = 0;
  std::uint64_t total = 0;
  std::uint64_t baseline_total = 0;
  double reduction_percent = 0.0;
};

/// Token counts (at the MSA input, at the FFN input) for each block.
using TokenTrajectory = std::vector<std::pair<std::size_t, std::size_t>>;

/// msa = 4 n d^2 + 2 n^2 d, ffn = 2 n d (mlp_ratio d).
BlockFlops block_flops(std::size_t n_msa, std::size_t n_ffn, const ModelConfig& config);

/// Policy-agnostic trajectory: compression sits between MSA and FFN of the
/// stage layers. Throws ScheduleError if the budget is exceeded.
TokenTrajectory token_trajectory(const ModelConfig& config, const CompressionSchedule& schedule);

FlopsReport model_flops(const ModelConfig& config, const TokenTrajectory& trajectory);
FlopsReport model_flops(const ModelConfig& config, const CompressionSchedule& schedule);

}  // namespace ppt
