#include <cmath>
#include <initializer_list>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "json_util.hpp"
#include "ppt/error.hpp"
#include "ppt/io.hpp"

namespace ppt {

using nlohmann::json;

namespace {

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!names.contains(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError("'" + std::string(key) + "' in " + where + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double parse_threshold(const json& v, const char* key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "+inf") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError(std::string("'") + key + "' must be a number or \"inf\"");
}

json threshold_json(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

template <typename E>
E parse_enum(const json& obj, const char* key, std::optional<E> (*parse)(const std::string&)) {
  const auto text = get<std::string>(obj, key, "schedule");
  const auto value = parse(text);
  if (!value) {
    throw ConfigError("unknown " + std::string(key) + " '" + text + "'");
  }
  return *value;
}

CompressionSchedule schedule_from_json(const json& j) {
  only_keys(j,
            {"stages", "tau", "mode", "metric", "tau_similarity", "scoring", "pooling", "merge",
             "cap_at_bipartite_limit", "random_seed"},
            "schedule");
  CompressionSchedule s;
  if (j.contains("stages")) {
    if (!j["stages"].is_array()) throw ConfigError("schedule.stages must be an array");
    for (const auto& st : j["stages"]) {
      only_keys(st, {"layer", "r"}, "schedule stage");
      if (!st.contains("layer") || !st.contains("r")) {
        throw ConfigError("each schedule stage needs 'layer' and 'r'");
      }
      s.stages.push_back({get_count(st, "layer", "schedule stage"), get_count(st, "r", "schedule stage")});
    }
  }
  if (j.contains("tau")) s.tau = parse_threshold(j["tau"], "tau");
  if (j.contains("tau_similarity")) s.tau_similarity = parse_threshold(j["tau_similarity"], "tau_similarity");
  if (std::isnan(s.tau) || std::isnan(s.tau_similarity)) throw ConfigError("thresholds must not be NaN");
  if (j.contains("mode")) s.mode = parse_enum<PolicyMode>(j, "mode", parse_policy_mode);
  if (j.contains("metric")) s.metric = parse_enum<RedundancyMetric>(j, "metric", parse_metric);
  if (j.contains("scoring")) s.scoring = parse_enum<ScoringVariant>(j, "scoring", parse_scoring);
  if (j.contains("pooling")) s.pooling = parse_enum<PoolingMethod>(j, "pooling", parse_pooling);
  if (j.contains("merge")) s.reduction = parse_enum<MergeReduction>(j, "merge", parse_reduction);
  if (j.contains("cap_at_bipartite_limit")) {
    s.cap_at_bipartite_limit = get<bool>(j, "cap_at_bipartite_limit", "schedule");
  }
  if (j.contains("random_seed")) s.random_seed = get<std::uint64_t>(j, "random_seed", "schedule");
  return s;
}

}  // namespace

namespace detail {

json schedule_to_json(const CompressionSchedule& s) {
  json stages = json::array();
  for (const Stage& st : s.stages) stages.push_back({{"layer", st.layer}, {"r", st.r}});
  return {{"stages", stages},
          {"tau", threshold_json(s.tau)},
          {"mode", to_string(s.mode)},
          {"metric", to_string(s.metric)},
          {"tau_similarity", threshold_json(s.tau_similarity)},
          {"scoring", to_string(s.scoring)},
          {"pooling", to_string(s.pooling)},
          {"merge", to_string(s.reduction)},
          {"cap_at_bipartite_limit", s.cap_at_bipartite_limit},
          {"random_seed", s.random_seed}};
}

json model_config_to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size}, {"patch_size", c.patch_size}, {"channels", c.channels},
          {"dim", c.dim},               {"depth", c.depth},           {"heads", c.heads},
          {"mlp_ratio", c.mlp_ratio},   {"num_classes", c.num_classes}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  if (j.is_string()) {
    const auto preset = ModelConfig::preset(j.get<std::string>());
    if (!preset) throw ConfigError("unknown model preset '" + j.get<std::string>() + "'");
    c = *preset;
  } else {
    only_keys(j,
              {"preset", "image_size", "patch_size", "channels", "dim", "depth", "heads", "mlp_ratio",
               "num_classes"},
              "model");
    if (j.contains("preset")) {
      const auto name = get<std::string>(j, "preset", "model");
      const auto preset = ModelConfig::preset(name);
      if (!preset) throw ConfigError("unknown model preset '" + name + "'");
      c = *preset;
    }
    if (j.contains("image_size")) c.image_size = get_count(j, "image_size", "model");
    if (j.contains("patch_size")) c.patch_size = get_count(j, "patch_size", "model");
    if (j.contains("channels")) c.channels = get_count(j, "channels", "model");
    if (j.contains("dim")) c.dim = get_count(j, "dim", "model");
    if (j.contains("depth")) c.depth = get_count(j, "depth", "model");
    if (j.contains("heads")) c.heads = get_count(j, "heads", "model");
    if (j.contains("mlp_ratio")) c.mlp_ratio = get<double>(j, "mlp_ratio", "model");
    if (j.contains("num_classes")) c.num_classes = get_count(j, "num_classes", "model");
  }
  c.validate();
  return c;
}

}  // namespace detail

CompressionSchedule RunConfig::effective_schedule() const {
  CompressionSchedule s = schedule;
  if (flags.policy) s.mode = *flags.policy;
  return s;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, {"model", "schedule", "normalization", "seed", "flags"}, "config");
  RunConfig rc;
  if (j.contains("seed")) rc.seed = get<std::uint64_t>(j, "seed", "config");
  if (j.contains("model")) rc.model = detail::model_config_from_json(j["model"]);
  rc.schedule.random_seed = rc.seed;
  if (j.contains("schedule")) {
    const bool explicit_seed = j["schedule"].is_object() && j["schedule"].contains("random_seed");
    rc.schedule = schedule_from_json(j["schedule"]);
    if (!explicit_seed) rc.schedule.random_seed = rc.seed;
  }
  if (j.contains("normalization")) {
    const json& n = j["normalization"];
    only_keys(n, {"mean", "std"}, "normalization");
    if (n.contains("mean")) rc.normalization.mean = get<std::vector<double>>(n, "mean", "normalization");
    if (n.contains("std")) rc.normalization.std = get<std::vector<double>>(n, "std", "normalization");
  }
  if (rc.normalization.mean.size() != rc.model.channels || rc.normalization.std.size() != rc.model.channels) {
    throw ConfigError("normalization needs one mean and one std per channel");
  }
  for (const double s : rc.normalization.std) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("normalization std must be positive");
  }
  if (j.contains("flags")) {
    const json& f = j["flags"];
    only_keys(f, {"observe", "viz", "policy"}, "flags");
    if (f.contains("observe")) rc.flags.observe = get<bool>(f, "observe", "flags");
    if (f.contains("viz")) rc.flags.viz = get<bool>(f, "viz", "flags");
    if (f.contains("policy") && !f["policy"].is_null()) {
      const auto name = get<std::string>(f, "policy", "flags");
      const auto mode = parse_policy_mode(name);
      if (!mode) throw ConfigError("unknown policy override '" + name + "'");
      rc.flags.policy = mode;
    }
  }
  try {
    rc.effective_schedule().validate(rc.model);
  } catch (const ScheduleError& e) {
    throw ScheduleError(std::string("schedule: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(std::string(bytes.begin(), bytes.end()));
}

std::string run_config_json(const RunConfig& rc) {
  json flags = {{"observe", rc.flags.observe}, {"viz", rc.flags.viz}};
  flags["policy"] = rc.flags.policy ? json(to_string(*rc.flags.policy)) : json(nullptr);
  const json j = {{"model", detail::model_config_to_json(rc.model)},
                  {"schedule", detail::schedule_to_json(rc.schedule)},
                  {"normalization", {{"mean", rc.normalization.mean}, {"std", rc.normalization.std}}},
                  {"seed", rc.seed},
                  {"flags", flags}};
  return j.dump(2) + "\n";
}

}  // namespace ppt
