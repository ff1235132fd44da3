#include "ppt/forward.hpp"

namespace ppt {

TraceReport model_forward(const Image& image, const ModelWeights& weights, const ModelConfig& config,
                          const CompressionSchedule& schedule, const ForwardOptions& options) {
  config.validate();
  validate_weights(weights, config);
  schedule.validate(config);

  TokenBatch batch = patch_embed(image, weights, config);
  Rng rng(schedule.random_seed);
  TraceReport report;
  std::vector<MergeMap> deltas;
  TokenTrajectory trajectory;

  const Compressor observe = [&](const TokenBatch& b, const AttentionByproducts& bp, LayerTrace& trace) {
    const ScoreVector scores = significance_scores(bp, schedule.scoring);
    trace.score_variance = population_variance(std::span<const double>(scores));
    return b;
  };

  for (std::size_t layer = 1; layer <= config.depth; ++layer) {
    Compressor hook;
    if (const auto stage = schedule.stage_at(layer)) {
      hook = [&, index = *stage](const TokenBatch& b, const AttentionByproducts& bp, LayerTrace& trace) {
        return compress_stage(b, bp, schedule, index, rng, trace);
      };
    } else if (options.observe) {
      hook = observe;
    }
    BlockResult step = block_forward(std::move(batch), weights.blocks[layer - 1], config, layer,
                                     hook ? &hook : nullptr, options.attention);
    batch = std::move(step.batch);
    if (step.trace.merge_delta) deltas.push_back(*step.trace.merge_delta);
    trajectory.emplace_back(step.trace.tokens_in, step.trace.tokens_out);
    report.layers.push_back(std::move(step.trace));
  }
  report.logits = classify(batch, weights);
  report.merge_map = flatten_provenance(config.num_patches(), deltas);
  report.flops = model_flops(config, trajectory);
  return report;
}

}  // namespace ppt
