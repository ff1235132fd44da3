#include "ppt/flops.hpp"

#include <stdexcept>

#include "ppt/error.hpp"

namespace ppt {

BlockFlops block_flops(std::size_t n_msa, std::size_t n_ffn, const ModelConfig& config) {
  const std::uint64_t d = config.dim;
  const std::uint64_t nm = n_msa;
  const std::uint64_t nf = n_ffn;
  BlockFlops f;
  f.msa = 4 * nm * d * d + 2 * nm * nm * d;
  f.ffn = 2 * nf * d * config.hidden_dim();
  return f;
}

TokenTrajectory token_trajectory(const ModelConfig& config, const CompressionSchedule& schedule) {
  config.validate();
  schedule.validate(config);
  TokenTrajectory out;
  out.reserve(config.depth);
  std::size_t n = config.num_tokens();
  for (std::size_t layer = 1; layer <= config.depth; ++layer) {
    const std::size_t n_msa = n;
    if (const auto stage = schedule.stage_at(layer)) {
      n -= schedule.removal(*stage, n);
    }
    out.emplace_back(n_msa, n);
  }
  return out;
}

FlopsReport model_flops(const ModelConfig& config, const TokenTrajectory& trajectory) {
  config.validate();
  if (trajectory.size() != config.depth) {
    throw std::invalid_argument("model_flops: trajectory length differs from depth");
  }
  FlopsReport report;
  report.patch_embed = static_cast<std::uint64_t>(config.num_patches()) * config.patch_vector() * config.dim;
  report.head = static_cast<std::uint64_t>(config.dim) * config.num_classes;
  report.total = report.patch_embed + report.head;
  report.baseline_total = report.total;
  const BlockFlops full = block_flops(config.num_tokens(), config.num_tokens(), config);
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto [n_msa, n_ffn] = trajectory[i];
    if (n_msa < 1 || n_ffn < 1 || n_ffn > n_msa) {
      throw std::invalid_argument("model_flops: invalid token counts at layer " + std::to_string(i + 1));
    }
    const BlockFlops f = block_flops(n_msa, n_ffn, config);
    report.layers.push_back({i + 1, n_msa, n_ffn, f.msa, f.ffn});
    report.total += f.msa + f.ffn;
    report.baseline_total += full.msa + full.ffn;
  }
  report.reduction_percent =
      100.0 * (1.0 - static_cast<double>(report.total) / static_cast<double>(report.baseline_total));
  return report;
}

FlopsReport model_flops(const ModelConfig& config, const CompressionSchedule& schedule) {
  return model_flops(config, token_trajectory(config, schedule));
}

}  // namespace ppt
