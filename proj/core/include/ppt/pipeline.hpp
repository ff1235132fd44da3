#pragma once

#include <optional>
#include <string>

#include "ppt/forward.hpp"
#include "ppt/io.hpp"

namespace ppt {

struct RunArtifacts {
  TraceReport report;
  std::string trace_json;
  std::optional<RgbImage> visualization;
};

/// One image through the configured model: normalize, forward with the
/// effective schedule, serialize the trace and optionally render the
/// provenance map. Observe/viz are taken from config.flags.
RunArtifacts run_pipeline(const RunConfig& config, const ModelWeights& weights, const RgbImage& image);

/// One-line human summary: top-1, total FLOPs, per-stage policies.
std::string summary_line(const TraceReport& report);

}  // namespace ppt
