#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ppt/cli.hpp"
#include "ppt/io.hpp"

using namespace ppt;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ppt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    write_file(path(name), text);
    return path(name);
  }

  std::string slurp(const std::string& name) const {
    const auto b = read_file(path(name));
    return {b.begin(), b.end()};
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  std::string tiny_config(const std::string& schedule = R"({"stages": [{"layer": 2, "r": 4}]})") const {
    return write("tiny.json", R"({"model": {"image_size": 16, "patch_size": 4, "dim": 16, "depth": 3, "heads": 2,
                                            "num_classes": 5}, "schedule": )" +
                                  schedule + "}");
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(Cli, RunWritesTraceAndSummary) {
  const auto cfg = tiny_config();
  ASSERT_EQ(run({"synth-image", "--size", "16", "--seed", "3", "--out", path("in.ppm")}), kExitOk);
  ASSERT_EQ(run({"run", "--config", cfg, "--synthetic", "1", "--image", path("in.ppm"), "--out", path("t.json"),
                 "--viz", path("v.ppm"), "--observe"}),
            kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("top1="), std::string::npos);
  EXPECT_NE(out_.str().find("L2:"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp("t.json"));
  EXPECT_EQ(j["layers"].size(), 3u);
  EXPECT_FALSE(j["layers"][0]["score_variance"].is_null());
  EXPECT_EQ(decode_ppm(read_file(path("v.ppm"))).width, 16u);
}

TEST_F(Cli, RepeatRunsAreByteIdentical) {
  const auto cfg = tiny_config(R"({"stages": [{"layer": 1, "r": 3}, {"layer": 2, "r": 3}], "mode": "random"})");
  ASSERT_EQ(run({"synth-image", "--size", "16", "--seed", "5", "--out", path("in.ppm")}), kExitOk);
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"run", "--config", cfg, "--synthetic", "4", "--image", path("in.ppm"), "--out",
                   path(std::string(name) + ".json"), "--viz", path(std::string(name) + ".ppm")}),
              kExitOk);
  }
  EXPECT_EQ(slurp("a.json"), slurp("b.json"));
  EXPECT_EQ(slurp("a.ppm"), slurp("b.ppm"));
}

TEST_F(Cli, GoldenFilesReproduce) {
  const std::string golden = PPT_GOLDEN_DIR;
  ASSERT_EQ(run({"run", "--config", golden + "/golden_config.json", "--synthetic", "7", "--image",
                 golden + "/golden_input.ppm", "--out", path("t.json"), "--viz", path("v.ppm")}),
            kExitOk)
      << err_.str();
  EXPECT_EQ(read_file(path("t.json")), read_file(golden + "/golden_trace.json"));
  EXPECT_EQ(read_file(path("v.ppm")), read_file(golden + "/golden_viz.ppm"));
}

TEST_F(Cli, WeightFileMatchesSyntheticFlag) {
  const auto cfg = tiny_config();
  ASSERT_EQ(run({"synth-weights", "--config", cfg, "--seed", "8", "--out", path("w.pptw")}), kExitOk);
  ASSERT_EQ(run({"synth-image", "--size", "16", "--out", path("in.ppm")}), kExitOk);
  ASSERT_EQ(run({"run", "--config", cfg, "--weights", path("w.pptw"), "--image", path("in.ppm"), "--out",
                 path("a.json")}),
            kExitOk);
  ASSERT_EQ(run({"run", "--config", cfg, "--synthetic", "8", "--image", path("in.ppm"), "--out", path("b.json")}),
            kExitOk);
  EXPECT_EQ(slurp("a.json"), slurp("b.json"));
}

TEST_F(Cli, ExitCodes) {
  const auto cfg = tiny_config();
  ASSERT_EQ(run({"synth-image", "--size", "16", "--out", path("in.ppm")}), kExitOk);
  ASSERT_EQ(run({"synth-image", "--size", "32", "--out", path("big.ppm")}), kExitOk);
  const std::vector<std::string> tail = {"--image", path("in.ppm"), "--out", path("t.json")};
  auto run_with = [&](std::vector<std::string> head) {
    head.insert(head.end(), tail.begin(), tail.end());
    return run(head);
  };

  const auto unknown = write("unknown.json", R"({"model": "deit-s", "colour": 1})");
  EXPECT_EQ(run_with({"run", "--config", unknown, "--synthetic", "1"}), kExitConfig);
  EXPECT_EQ(run_with({"run", "--config", path("missing.json"), "--synthetic", "1"}), kExitConfig);
  EXPECT_EQ(run_with({"run", "--config", write("broken.json", "{"), "--synthetic", "1"}), kExitConfig);

  write("junk.pptw", "not weights");
  EXPECT_EQ(run_with({"run", "--config", cfg, "--weights", path("junk.pptw")}), kExitWeights);
  EXPECT_EQ(run_with({"run", "--config", cfg, "--weights", path("missing.pptw")}), kExitWeights);
  const auto other = write("other.json", R"({"model": {"image_size": 16, "patch_size": 4, "dim": 16, "depth": 2,
                                                        "heads": 2, "num_classes": 5}})");
  ASSERT_EQ(run({"synth-weights", "--config", other, "--out", path("other.pptw")}), kExitOk);
  EXPECT_EQ(run_with({"run", "--config", cfg, "--weights", path("other.pptw")}), kExitWeights);
  EXPECT_EQ(run_with({"run", "--config", cfg}), kExitWeights);

  write("bad.ppm", "P6\n16 16\n255\nshort");
  EXPECT_EQ(run({"run", "--config", cfg, "--synthetic", "1", "--image", path("bad.ppm"), "--out", path("t.json")}),
            kExitImage);
  EXPECT_EQ(run({"run", "--config", cfg, "--synthetic", "1", "--image", path("big.ppm"), "--out", path("t.json")}),
            kExitImage);
  EXPECT_EQ(run({"run", "--config", cfg, "--synthetic", "1", "--image", path("none.ppm"), "--out", path("t.json")}),
            kExitImage);

  const auto over = write("over.json", R"({"model": {"image_size": 16, "patch_size": 4, "dim": 16, "depth": 3,
                                                       "heads": 2, "num_classes": 5},
                                            "schedule": {"stages": [{"layer": 1, "r": 10}, {"layer": 2, "r": 6}]}})");
  EXPECT_EQ(run_with({"run", "--config", over, "--synthetic", "1"}), kExitSchedule);
  EXPECT_EQ(run({"flops", "--config", cfg, "--r", "16"}), kExitSchedule);

  EXPECT_EQ(run({"bogus"}), kExitFailure);
  EXPECT_EQ(run({"run", "--config", cfg, "--synthetic", "1", "--weights", path("w"), "--image", "x", "--out", "y"}),
            kExitFailure);
}

TEST_F(Cli, FlopsCommand) {
  const auto s50 = write("s50.json", R"({"model": "deit-s", "schedule": {"stages": [{"layer": 4, "r": 50},
                                          {"layer": 7, "r": 50}, {"layer": 10, "r": 50}]}})");
  ASSERT_EQ(run({"flops", "--config", s50}), kExitOk);
  auto j = nlohmann::json::parse(out_.str());
  EXPECT_EQ(j["total"], 2931247104ULL);
  EXPECT_GE(j["reduction_percent"].get<double>(), 36.0);
  EXPECT_LE(j["reduction_percent"].get<double>(), 37.0);

  ASSERT_EQ(run({"flops", "--config", write("base.json", R"({"model": "deit-s"})")}), kExitOk);
  EXPECT_EQ(nlohmann::json::parse(out_.str())["reduction_percent"], 0.0);

  const auto b = write("b.json", R"({"model": "deit-b", "schedule": {"stages": [{"layer": 4, "r": 1},
                                      {"layer": 7, "r": 1}, {"layer": 10, "r": 1}]}})");
  ASSERT_EQ(run({"flops", "--config", b, "--r", "47"}), kExitOk);
  EXPECT_NEAR(nlohmann::json::parse(out_.str())["total"].get<double>() / 1e9, 11.60, 0.02 * 11.60);
}

TEST_F(Cli, SweepMonotoneAndBoundaries) {
  const auto cfg = tiny_config(R"({"stages": [{"layer": 1, "r": 1}, {"layer": 2, "r": 1}, {"layer": 3, "r": 1}]})");
  ASSERT_EQ(run({"sweep", "--config", cfg, "--synthetic", "2", "--r-list", "1,2,3,4,5", "--tau-list", "0,inf",
                 "--threads", "3", "--out", path("s.csv")}),
            kExitOk)
      << err_.str();
  std::istringstream csv(slurp("s.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "r,tau,flops,prune_count,pool_count");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][1] == "0") {
      EXPECT_EQ(rows[i][3], "3");
      EXPECT_EQ(rows[i][4], "0");
    } else {
      EXPECT_EQ(rows[i][1], "inf");
      EXPECT_EQ(rows[i][3], "0");
      EXPECT_EQ(rows[i][4], "3");
    }
    if (i >= 2) EXPECT_LT(std::stoull(rows[i][2]), std::stoull(rows[i - 2][2]));
  }

  ASSERT_EQ(run({"sweep", "--config", cfg, "--synthetic", "2", "--r-list", "2", "--tau-list", "7e-5", "--out",
                 path("one.csv")}),
            kExitOk);
  const std::string one = slurp("one.csv");
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 2);
  EXPECT_EQ(run({"sweep", "--config", cfg, "--synthetic", "2", "--r-list", "", "--tau-list", "0", "--out",
                 path("x.csv")}),
            kExitConfig);
  EXPECT_EQ(run({"sweep", "--config", cfg, "--synthetic", "2", "--r-list", "40", "--tau-list", "0", "--out",
                 path("x.csv")}),
            kExitSchedule);
}

TEST_F(Cli, SweepDeitSmallDefaultLayers) {
  const auto cfg = write("s.json", R"({"model": "deit-s"})");
  ASSERT_EQ(run({"sweep", "--config", cfg, "--synthetic", "0", "--r-list", "10,20,30,40,50,60", "--tau-list",
                 "7e-5", "--out", path("s.csv")}),
            kExitOk)
      << err_.str();
  std::istringstream csv(slurp("s.csv"));
  std::string line;
  std::getline(csv, line);
  std::uint64_t previous = UINT64_MAX;
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    const auto third = line.find(',', second + 1);
    const std::uint64_t flops = std::stoull(line.substr(second + 1, third - second - 1));
    EXPECT_LT(flops, previous);
    previous = flops;
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST_F(Cli, VarianceFromTracesAndImages) {
  const auto cfg = tiny_config();
  ASSERT_EQ(run({"synth-image", "--size", "16", "--seed", "1", "--out", path("a.ppm")}), kExitOk);
  ASSERT_EQ(run({"synth-image", "--size", "16", "--seed", "2", "--out", path("b.ppm")}), kExitOk);
  for (const char* n : {"a", "b"}) {
    ASSERT_EQ(run({"run", "--config", cfg, "--synthetic", "1", "--observe", "--image", path(std::string(n) + ".ppm"),
                   "--out", path(std::string(n) + ".json")}),
              kExitOk);
  }
  ASSERT_EQ(run({"variance", path("a.json"), path("b.json"), "--out", path("v.csv")}), kExitOk);
  const std::string from_traces = slurp("v.csv");
  EXPECT_EQ(from_traces.rfind("layer,mean_variance\n1,", 0), 0u);
  EXPECT_EQ(std::count(from_traces.begin(), from_traces.end(), '\n'), 4);

  ASSERT_EQ(run({"variance", "--config", cfg, "--synthetic", "1", "--images", path("a.ppm"), path("b.ppm")}), kExitOk);
  EXPECT_EQ(out_.str(), from_traces);
  EXPECT_EQ(run({"variance"}), kExitConfig);
}

TEST_F(Cli, Selftest) {
  EXPECT_EQ(run({"selftest"}), kExitOk) << out_.str();
  EXPECT_NE(out_.str().find("PASS bsm_oracle"), std::string::npos);
  EXPECT_NE(out_.str().find("PASS flops_regression"), std::string::npos);
}
