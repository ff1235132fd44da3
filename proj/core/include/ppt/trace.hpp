#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ppt/flops.hpp"
#include "ppt/types.hpp"

namespace ppt {

struct TraceReport {
  std::vector<LayerTrace> layers;
  FlopsReport flops;
  /// Provenance over original patches after the last layer.
  MergeMap merge_map;
  std::vector<float> logits;

  std::size_t top1() const;
};

/// Composes per-stage deltas (in stage order) onto the identity partition of
/// `num_patches` patches. Throws std::logic_error on a non-partition delta.
MergeMap flatten_provenance(std::size_t num_patches, const std::vector<MergeMap>& deltas);

/// Fixed 32-entry RGB palette used for merge groups.
const std::vector<std::array<std::uint8_t, 3>>& group_palette();

/// Pruned patches darkened to a quarter; merged groups (size >= 2) tinted
/// and outlined in a palette colour chosen by group rank of minimum patch.
RgbImage render_patch_map(const RgbImage& image, const MergeMap& map, const ModelConfig& config);

/// Per-layer mean score variance over a corpus. Layers for which no report
/// carries a variance are omitted. Throws std::invalid_argument when empty.
std::vector<std::pair<std::size_t, double>> variance_series(const std::vector<TraceReport>& reports);

/// "layer,mean_variance" CSV with shortest round-trip numbers.
std::string variance_series_csv(const std::vector<std::pair<std::size_t, double>>& series);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace ppt
