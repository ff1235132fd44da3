#pragma once

#include "ppt/compress.hpp"
#include "ppt/trace.hpp"
#include "ppt/types.hpp"
#include "ppt/vit.hpp"

namespace ppt {

struct ForwardOptions {
  /// Score every layer (without compressing) so the trace carries a
  /// score variance at non-stage layers too.
  bool observe = false;
  AttentionOptions attention;
};

/// Full forward pass with the compression schedule installed. The schedule's
/// random policy draws from an Rng seeded with schedule.random_seed.
TraceReport model_forward(const Image& image, const ModelWeights& weights, const ModelConfig& config,
                          const CompressionSchedule& schedule, const ForwardOptions& options = {});

}  // namespace ppt
