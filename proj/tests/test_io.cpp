#include <gtest/gtest.h>

#include <cstring>
#include <json.hpp>

#include "ppt/error.hpp"
#include "ppt/forward.hpp"
#include "ppt/io.hpp"
#include "ppt/pipeline.hpp"

using namespace ppt;
using nlohmann::json;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.dim = 8;
  c.depth = 2;
  c.heads = 2;
  c.num_classes = 3;
  return c;
}

struct Split {
  json header;
  std::vector<std::uint8_t> payload;
};

Split split(const std::vector<std::uint8_t>& bytes) {
  std::uint32_t len = 0;
  for (int i = 3; i >= 0; --i) len = (len << 8) | bytes[4 + static_cast<std::size_t>(i)];
  return {json::parse(bytes.begin() + 8, bytes.begin() + 8 + len), {bytes.begin() + 8 + len, bytes.end()}};
}

std::vector<std::uint8_t> join(const Split& s) {
  const std::string text = s.header.dump();
  std::vector<std::uint8_t> out{'P', 'P', 'T', 'W'};
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), s.payload.begin(), s.payload.end());
  return out;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(WeightFile, RoundTripIsBitExact) {
  const auto c = tiny();
  ModelWeights w = synthetic_weights(c, 21);
  w.blocks[0].fc1.weight(0, 0) = -0.0f;
  w.blocks[1].proj.bias[2] = 1e-42f;
  const ModelWeights back = decode_weight_file(encode_weight_file(w, c), c);
  auto a = w.tensors();
  auto b = const_cast<ModelWeights&>(back).tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].name, b[i].name);
    ASSERT_EQ(a[i].values.size(), b[i].values.size());
    EXPECT_EQ(0, std::memcmp(a[i].values.data(), b[i].values.data(), a[i].values.size() * 4)) << a[i].name;
  }
}

TEST(WeightFile, HeaderLayout) {
  const auto c = tiny();
  const auto bytes = encode_weight_file(synthetic_weights(c, 1), c);
  EXPECT_EQ(0, std::memcmp(bytes.data(), "PPTW", 4));
  const Split s = split(bytes);
  EXPECT_EQ(s.header["version"], 1);
  EXPECT_EQ(s.header["tensors"][0]["name"], "patch_embed.proj.weight");
  EXPECT_EQ(s.header["tensors"][0]["dtype"], "f32");
  EXPECT_EQ(s.header["tensors"][0]["offset"], 0);
  EXPECT_EQ(s.header["tensors"].size(), tensor_layout(c).size());
}

TEST(WeightFile, Rejections) {
  const auto c = tiny();
  const auto good = encode_weight_file(synthetic_weights(c, 1), c);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_weight_file(bad_magic, c), WeightsError);

  auto truncated = good;
  truncated.resize(truncated.size() - 4);
  EXPECT_THROW(decode_weight_file(truncated, c), WeightsError);
  EXPECT_THROW(decode_weight_file(std::vector<std::uint8_t>(good.begin(), good.begin() + 6), c), WeightsError);

  auto mutate = [&](auto edit) {
    Split s = split(good);
    edit(s);
    return join(s);
  };
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"].erase(3); }), c), WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"].push_back(s.header["tensors"][0]); }), c),
               WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"][2]["shape"] = {1, 9}; }), c),
               WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"][2]["dtype"] = "f16"; }), c),
               WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"][1]["offset"] = 0; }), c), WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"][0]["name"] = "extra"; }), c),
               WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["tensors"][0]["offset"] = 1u << 30; }), c),
               WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header["version"] = 2; }), c), WeightsError);
  EXPECT_THROW(decode_weight_file(mutate([](Split& s) { s.header.erase("tensors"); }), c), WeightsError);

  ModelConfig other = c;
  other.num_classes = 4;
  EXPECT_THROW(decode_weight_file(good, other), WeightsError);
}

TEST(WeightFile, ValidateRejectsShapeMismatch) {
  const auto c = tiny();
  ModelWeights w = synthetic_weights(c, 1);
  w.pos_embed = Matrix(4, c.dim);
  EXPECT_THROW(validate_weights(w, c), WeightsError);
  EXPECT_THROW(encode_weight_file(w, c), WeightsError);
}

TEST(Ppm, RoundTripAndComments) {
  const RgbImage img = synthetic_image(16, 4);
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
  std::string text = "P6\n# a comment\n2 1\n# another\n255\n";
  text += std::string("\x01\x02\x03\xff\x00\x10", 6);
  const RgbImage p = decode_ppm(bytes_of(text));
  EXPECT_EQ(p.width, 2u);
  EXPECT_EQ(p.height, 1u);
  EXPECT_EQ(p.pixels, (std::vector<std::uint8_t>{1, 2, 3, 255, 0, 16}));
}

TEST(Ppm, Rejections) {
  EXPECT_THROW(decode_ppm(bytes_of("P3\n1 1\n255\n0 0 0\n")), ImageError);
  EXPECT_THROW(decode_ppm(bytes_of("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06")), ImageError);
  EXPECT_THROW(decode_ppm(bytes_of("P6\n2 2\n255\n\x01\x02\x03")), ImageError);
  EXPECT_THROW(decode_ppm(bytes_of("P6\n1 1\n255\n\x01\x02\x03\x04")), ImageError);
  EXPECT_THROW(decode_ppm(bytes_of("P6\n0 1\n255\n")), ImageError);
  EXPECT_THROW(decode_ppm(bytes_of("")), ImageError);
  EXPECT_THROW(read_ppm("/nonexistent/image.ppm"), ImageError);
}

TEST(Ppm, Normalization) {
  RgbImage img{1, 1, {255, 0, 128}};
  const Image x = normalize_image(img, Normalization{});
  EXPECT_NEAR(x.at(0, 0, 0), (1.0 - 0.485) / 0.229, 1e-6);
  EXPECT_NEAR(x.at(0, 0, 1), (0.0 - 0.456) / 0.224, 1e-6);
  EXPECT_NEAR(x.at(0, 0, 2), (128.0 / 255.0 - 0.406) / 0.225, 1e-6);
  EXPECT_THROW(normalize_image(img, Normalization{{0.5}, {0.5}}), ImageError);
}

TEST(RunConfig, DefaultsAndPreset) {
  const RunConfig rc = parse_run_config(R"({"model": "deit-ti", "seed": 9})");
  EXPECT_EQ(rc.model, ModelConfig::deit_tiny());
  EXPECT_TRUE(rc.schedule.stages.empty());
  EXPECT_EQ(rc.schedule.tau, 7e-5);
  EXPECT_EQ(rc.schedule.random_seed, 9u);
  EXPECT_FALSE(rc.flags.observe);
}

TEST(RunConfig, FullSchedule) {
  const RunConfig rc = parse_run_config(R"({
    "model": {"preset": "deit-s", "num_classes": 10},
    "schedule": {"stages": [{"layer": 4, "r": 50}, {"layer": 7, "r": 50}], "tau": "inf", "mode": "inverted",
                 "metric": "mean_similarity", "tau_similarity": 0.7, "scoring": "attention_only",
                 "pooling": "dpc", "merge": "plain_average", "cap_at_bipartite_limit": true, "random_seed": 3},
    "normalization": {"mean": [0.5, 0.5, 0.5], "std": [0.5, 0.5, 0.5]},
    "seed": 1,
    "flags": {"observe": true, "viz": false, "policy": "pool_only"}
  })");
  EXPECT_EQ(rc.model.num_classes, 10u);
  EXPECT_EQ(rc.model.dim, 384u);
  EXPECT_EQ(rc.schedule.stages.size(), 2u);
  EXPECT_TRUE(std::isinf(rc.schedule.tau));
  EXPECT_EQ(rc.schedule.mode, PolicyMode::inverted);
  EXPECT_EQ(rc.effective_schedule().mode, PolicyMode::pool_only);
  EXPECT_EQ(rc.schedule.pooling, PoolingMethod::dpc);
  EXPECT_EQ(rc.schedule.random_seed, 3u);
  EXPECT_TRUE(rc.schedule.cap_at_bipartite_limit);

  const RunConfig again = parse_run_config(run_config_json(rc));
  EXPECT_EQ(run_config_json(again), run_config_json(rc));
}

TEST(RunConfig, Rejections) {
  EXPECT_THROW(parse_run_config("{"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"modle": "deit-s"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": "vit-h"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"dim": 384, "depthh": 12}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"image_size": 225}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"stages": [{"layer": 4}]}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"stages": [{"layer": 4, "r": 1, "x": 0}]}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"stages": [{"layer": 4, "r": -1}]}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"mode": "sometimes"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"tau": "lots"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"flags": {"policy": "maybe"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"flags": {"verbose": true}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"normalization": {"mean": [0.5], "std": [0.5]}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"normalization": {"std": [0.5, 0.0, 0.5]}})"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST(RunConfig, ScheduleViolations) {
  EXPECT_THROW(parse_run_config(R"({"schedule": {"stages": [{"layer": 13, "r": 1}]}})"), ScheduleError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"stages": [{"layer": 4, "r": 196}]}})"), ScheduleError);
  EXPECT_THROW(parse_run_config(R"({"schedule": {"stages": [{"layer": 7, "r": 1}, {"layer": 4, "r": 1}]}})"),
               ScheduleError);
}

TEST(Reports, FlopsJsonShape) {
  CompressionSchedule s;
  s.stages = {{4, 50}, {7, 50}, {10, 50}};
  const std::string text = flops_report_json(model_flops(ModelConfig::deit_small(), s));
  ASSERT_EQ(text.back(), '\n');
  const json j = json::parse(text);
  EXPECT_EQ(j["total"], 2931247104ULL);
  EXPECT_EQ(j["baseline_total"], 4598882304ULL);
  EXPECT_EQ(j["layers"].size(), 12u);
  EXPECT_EQ(j["layers"][3]["token_count_msa"], 197);
  EXPECT_EQ(j["layers"][3]["token_count_ffn"], 147);
  EXPECT_EQ(text, j.dump(2) + "\n");
}

TEST(Reports, TraceJsonShapeAndSortedKeys) {
  RunConfig rc = parse_run_config(R"({
    "model": {"image_size": 8, "patch_size": 4, "dim": 8, "depth": 2, "heads": 2, "num_classes": 3},
    "schedule": {"stages": [{"layer": 1, "r": 1}]}, "flags": {"viz": true}})");
  const RunArtifacts out = run_pipeline(rc, synthetic_weights(rc.model, 2), synthetic_image(8, 2));
  const json j = json::parse(out.trace_json);
  EXPECT_EQ(out.trace_json, j.dump(2) + "\n");
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"flops", "layers", "logits", "merge_map", "model", "schedule", "top1"}));
  EXPECT_EQ(j["layers"].size(), 2u);
  EXPECT_EQ(j["layers"][0]["tokens_out"], 4);
  EXPECT_TRUE(j["layers"][0]["policy"].is_string());
  EXPECT_TRUE(j["layers"][1]["policy"].is_null());
  EXPECT_EQ(j["logits"].size(), 3u);
  ASSERT_TRUE(out.visualization.has_value());
  EXPECT_EQ(out.visualization->width, 8u);
}

TEST(Pipeline, RejectsWrongImage) {
  RunConfig rc = parse_run_config(R"({"model": {"image_size": 8, "patch_size": 4, "dim": 8, "depth": 2,
                                                "heads": 2, "num_classes": 3}})");
  EXPECT_THROW(run_pipeline(rc, synthetic_weights(rc.model, 2), synthetic_image(16, 2)), ImageError);
}
