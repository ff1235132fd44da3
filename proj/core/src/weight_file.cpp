#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json_util.hpp"
#include "ppt/error.hpp"
#include "ppt/io.hpp"

namespace ppt {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'T', 'W'};
constexpr int kVersion = 1;

std::uint32_t load_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

}  // namespace

std::vector<std::uint8_t> encode_weight_file(const ModelWeights& weights, const ModelConfig& config) {
  validate_weights(weights, config);
  auto tensors = const_cast<ModelWeights&>(weights).tensors();
  nlohmann::json header;
  header["version"] = kVersion;
  header["config"] = detail::model_config_to_json(config);
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const TensorRef& t : tensors) {
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", "f32"}, {"offset", offset}});
    offset += t.values.size() * 4;
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(8 + text.size() + offset);
  std::memcpy(out.data(), kMagic, 4);
  store_u32_le(out.data() + 4, static_cast<std::uint32_t>(text.size()));
  std::memcpy(out.data() + 8, text.data(), text.size());
  std::uint8_t* payload = out.data() + 8 + text.size();
  for (const TensorRef& t : tensors) {
    for (const float v : t.values) {
      store_u32_le(payload, std::bit_cast<std::uint32_t>(v));
      payload += 4;
    }
  }
  return out;
}

ModelWeights decode_weight_file(std::span<const std::uint8_t> bytes, const ModelConfig& config) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw WeightsError("not a PPTW weight file (bad magic)");
  }
  const std::size_t header_len = load_u32_le(bytes.data() + 4);
  if (header_len > bytes.size() - 8) {
    throw WeightsError("weight file header length exceeds file size");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError(std::string("weight file header is not valid JSON: ") + e.what());
  }
  const std::span<const std::uint8_t> payload = bytes.subspan(8 + header_len);

  ModelWeights weights = ModelWeights::zeros(config);
  auto tensors = weights.tensors();
  std::map<std::string, TensorRef*> by_name;
  for (TensorRef& t : tensors) by_name[t.name] = &t;

  try {
    if (header.at("version").get<int>() != kVersion) {
      throw WeightsError("unsupported weight file version");
    }
    ModelConfig file_config;
    try {
      file_config = detail::model_config_from_json(header.at("config"));
    } catch (const ConfigError& e) {
      throw WeightsError(std::string("weight file config: ") + e.what());
    }
    if (!(file_config == config)) {
      throw WeightsError("weight file was written for a different model configuration");
    }
    std::map<std::string, bool> seen;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto it = by_name.find(name);
      if (it == by_name.end()) {
        throw WeightsError("unexpected tensor '" + name + "'");
      }
      if (seen[name]) {
        throw WeightsError("tensor '" + name + "' appears twice");
      }
      seen[name] = true;
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw WeightsError("tensor '" + name + "' is not f32");
      }
      TensorRef& t = *it->second;
      if (entry.at("shape").get<std::vector<std::size_t>>() != t.shape) {
        throw WeightsError("tensor '" + name + "' has the wrong shape for this config");
      }
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t len = t.values.size() * 4;
      if (offset > payload.size() || len > payload.size() - offset) {
        throw WeightsError("tensor '" + name + "' lies outside the payload");
      }
      ranges.emplace_back(offset, offset + len);
      const std::uint8_t* src = payload.data() + offset;
      for (float& v : t.values) {
        v = std::bit_cast<float>(load_u32_le(src));
        src += 4;
      }
    }
    if (seen.size() != tensors.size()) {
      for (const TensorRef& t : tensors) {
        if (!seen.contains(t.name)) throw WeightsError("tensor '" + t.name + "' is missing");
      }
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
      if (ranges[i].first < ranges[i - 1].second) {
        throw WeightsError("tensor payload ranges overlap");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError(std::string("malformed weight file header: ") + e.what());
  }
  return weights;
}

void write_weight_file(const std::filesystem::path& path, const ModelWeights& weights, const ModelConfig& config) {
  write_file(path, encode_weight_file(weights, config));
}

ModelWeights read_weight_file(const std::filesystem::path& path, const ModelConfig& config) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error& e) {
    throw WeightsError(e.what());
  }
  return decode_weight_file(bytes, config);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("short write to " + path.string());
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace ppt
