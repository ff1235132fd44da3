#pragma once

// Self-contained verification routines shared by `ppt selftest` and the
// acceptance binary. Each returns a verdict plus a human-readable detail.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ppt/io.hpp"
#include "ppt/pipeline.hpp"

namespace ppt::check {

struct Result {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Model totals against the published reference figures (±2%) and the
/// DeiT-S r=50 reduction in [35, 38]%.
Result flops_reference();

/// Exact MAC totals for a fixed table of (model, r) pairs.
Result flops_regression();

/// FFN-input token counts of a DeiT-S forward under three policies.
Result token_trajectory(std::uint64_t seed);

Result bsm_oracle(std::size_t instances, std::uint64_t seed);
Result topk_oracle(std::size_t instances, std::uint64_t seed);
Result marginalization(std::size_t instances, std::uint64_t seed);

/// Depth-4 model, pairwise-duplicated patches, forced pooling at layer 1.
Result duplicate_merge(std::uint64_t seed);

/// Threshold extremes, inverted mode and every mechanism variant.
Result policy_boundaries(std::uint64_t seed);

/// Small fixed run used for the determinism goldens.
RunConfig golden_config();
RunArtifacts golden_run();

/// Two runs byte-identical; if `golden_dir` is given, also identical to
/// golden_trace.json / golden_viz.ppm stored there.
Result determinism(const std::optional<std::filesystem::path>& golden_dir);

/// DeiT-S synthetic forward: r=50 schedule at least 20% faster.
Result speedup(std::uint64_t seed);

/// Fast subset for the CLI selftest.
std::vector<Result> selftest();

}  // namespace ppt::check
