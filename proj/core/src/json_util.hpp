#pragma once

#include <json.hpp>

#include "ppt/compress.hpp"
#include "ppt/types.hpp"

namespace ppt::detail {

nlohmann::json model_config_to_json(const ModelConfig& config);
/// Accepts a preset name or an object (optionally with "preset" plus
/// overrides). Throws ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json schedule_to_json(const CompressionSchedule& schedule);

}  // namespace ppt::detail
