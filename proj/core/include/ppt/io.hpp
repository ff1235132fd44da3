#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppt/compress.hpp"
#include "ppt/flops.hpp"
#include "ppt/trace.hpp"
#include "ppt/types.hpp"
#include "ppt/vit.hpp"

namespace ppt {

// ---------------------------------------------------------------------------
// Weight file
//
//   bytes 0..3   "PPTW"
//   bytes 4..7   u32 little-endian header length H
//   bytes 8..8+H UTF-8 JSON header:
//                {"version": 1, "config": {...model...},
//                 "tensors": [{"name", "shape", "dtype": "f32", "offset"}]}
//   remainder    payload of little-endian f32 values; "offset" is the byte
//                offset of a tensor inside the payload.
//
// Every tensor of tensor_layout(config) must be present exactly once, with
// the exact shape, in-bounds and non-overlapping. Violations throw
// WeightsError.
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_weight_file(const ModelWeights& weights, const ModelConfig& config);
ModelWeights decode_weight_file(std::span<const std::uint8_t> bytes, const ModelConfig& config);
void write_weight_file(const std::filesystem::path& path, const ModelWeights& weights, const ModelConfig& config);
ModelWeights read_weight_file(const std::filesystem::path& path, const ModelConfig& config);

// ---------------------------------------------------------------------------
// Binary PPM (P6), 8-bit. Malformed input throws ImageError.
// ---------------------------------------------------------------------------

RgbImage decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

/// Deterministic test card: coloured 8x8 cells with per-pixel noise.
RgbImage synthetic_image(std::size_t size, std::uint64_t seed);

struct Normalization {
  std::vector<double> mean{0.485, 0.456, 0.406};
  std::vector<double> std{0.229, 0.224, 0.225};
};

/// (v/255 - mean[c]) / std[c]. Throws ImageError if the channel count differs.
Image normalize_image(const RgbImage& image, const Normalization& norm);

// ---------------------------------------------------------------------------
// Run configuration (JSON). Unknown keys are rejected with ConfigError.
//
// {
//   "model": "deit-s" | {"preset"?, "image_size", "patch_size", "channels",
//                        "dim", "depth", "heads", "mlp_ratio", "num_classes"},
//   "schedule": {"stages": [{"layer": 4, "r": 50}, ...], "tau": 7e-5 | "inf",
//                "mode", "metric", "tau_similarity", "scoring", "pooling",
//                "merge", "cap_at_bipartite_limit", "random_seed"},
//   "normalization": {"mean": [...], "std": [...]},
//   "seed": 0,
//   "flags": {"observe": false, "viz": false, "policy": "pool_only"}
// }
// ---------------------------------------------------------------------------

struct RunFlags {
  bool observe = false;
  bool viz = false;
  std::optional<PolicyMode> policy;
};

struct RunConfig {
  ModelConfig model;
  CompressionSchedule schedule;
  Normalization normalization;
  std::uint64_t seed = 0;
  RunFlags flags;

  /// Schedule with flag overrides applied.
  CompressionSchedule effective_schedule() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_json(const RunConfig& config);

// ---------------------------------------------------------------------------
// Report JSON: sorted keys, two-space indent, trailing newline.
// ---------------------------------------------------------------------------

std::string flops_report_json(const FlopsReport& report);
std::string trace_report_json(const TraceReport& report, const RunConfig& config);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ppt
