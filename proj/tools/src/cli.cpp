#include "ppt/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <thread>

#include "ppt/checks.hpp"
#include "ppt/error.hpp"
#include "ppt/flops.hpp"
#include "ppt/forward.hpp"
#include "ppt/io.hpp"
#include "ppt/pipeline.hpp"

namespace ppt {

namespace {

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  for (const auto& item : split(text)) {
    std::size_t pos = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < 0) throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError(std::string(what) + " must not be empty");
  return out;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text)) {
    if (item == "inf" || item == "infinity" || item == "+inf") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::size_t pos = 0;
    double v = std::nan("");
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || std::isnan(v)) throw ConfigError("bad tau-list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("tau-list must not be empty");
  return out;
}

std::string threshold_text(double v) { return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : format_double(v); }

struct WeightSource {
  std::string path;
  std::optional<std::uint64_t> synthetic;
};

ModelWeights load_weights(const WeightSource& src, const RunConfig& config) {
  if (src.synthetic) return synthetic_weights(config.model, *src.synthetic);
  if (src.path.empty()) throw WeightsError("either --weights or --synthetic is required");
  return read_weight_file(src.path, config.model);
}

int cmd_run(const std::string& config_path, const WeightSource& weights_src, const std::string& image_path,
            const std::string& out_path, const std::string& viz_path, bool observe, std::ostream& out) {
  RunConfig config = load_run_config(config_path);
  if (observe) config.flags.observe = true;
  if (!viz_path.empty()) config.flags.viz = true;
  if (config.flags.viz && viz_path.empty()) throw ConfigError("flags.viz is set but no --viz path was given");
  const ModelWeights weights = load_weights(weights_src, config);
  const RgbImage image = read_ppm(image_path);
  const RunArtifacts result = run_pipeline(config, weights, image);
  write_file(out_path, result.trace_json);
  if (result.visualization) write_ppm(viz_path, *result.visualization);
  out << summary_line(result.report) << "\n";
  return kExitOk;
}

int cmd_flops(const std::string& config_path, std::optional<std::size_t> r, std::ostream& out) {
  const RunConfig config = load_run_config(config_path);
  CompressionSchedule schedule = config.effective_schedule();
  if (r) {
    schedule = schedule.with_r(*r);
    schedule.validate(config.model);
  }
  out << flops_report_json(model_flops(config.model, schedule));
  return kExitOk;
}

struct SweepRow {
  std::size_t r = 0;
  double tau = 0.0;
  std::uint64_t flops = 0;
  std::size_t prune = 0;
  std::size_t pool = 0;
};

int cmd_sweep(const std::string& config_path, const WeightSource& weights_src, const std::string& image_path,
              const std::string& r_list, const std::string& tau_list, const std::string& layers_text,
              const std::string& out_path, unsigned threads, std::ostream& out) {
  const RunConfig config = load_run_config(config_path);
  const auto rs = parse_counts(r_list, "r-list");
  const auto taus = parse_thresholds(tau_list);
  CompressionSchedule base = config.effective_schedule();
  if (!layers_text.empty() || base.stages.empty()) {
    base.stages.clear();
    for (const auto layer : parse_counts(layers_text.empty() ? "4,7,10" : layers_text, "layers")) {
      base.stages.push_back({layer, 0});
    }
  }

  std::vector<SweepRow> rows;
  std::vector<CompressionSchedule> points;
  for (const auto r : rs) {
    for (const auto tau : taus) {
      CompressionSchedule s = base.with_r(r);
      s.tau = tau;
      s.validate(config.model);
      points.push_back(s);
      rows.push_back({r, tau, 0, 0, 0});
    }
  }

  const ModelWeights weights = load_weights(weights_src, config);
  const RgbImage rgb =
      image_path.empty() ? synthetic_image(config.model.image_size, config.seed) : read_ppm(image_path);
  if (config.model.channels != 3 || rgb.width != config.model.image_size || rgb.height != config.model.image_size) {
    throw ImageError("image does not match the model configuration");
  }
  const Image image = normalize_image(rgb, config.normalization);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(points.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        const TraceReport report = model_forward(image, weights, config.model, points[i]);
        rows[i].flops = report.flops.total;
        for (const LayerTrace& layer : report.layers) {
          if (!layer.policy) continue;
          (layer.policy->policy == Policy::prune ? rows[i].prune : rows[i].pool) += 1;
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::string csv = "r,tau,flops,prune_count,pool_count\n";
  for (const SweepRow& row : rows) {
    csv += std::to_string(row.r) + "," + threshold_text(row.tau) + "," + std::to_string(row.flops) + "," +
           std::to_string(row.prune) + "," + std::to_string(row.pool) + "\n";
  }
  write_file(out_path, csv);
  out << rows.size() << " grid points written to " << out_path << "\n";
  return kExitOk;
}

TraceReport trace_from_json(const std::string& path) {
  const auto bytes = read_file(path);
  TraceReport report;
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    for (const auto& layer : j.at("layers")) {
      LayerTrace t;
      t.layer = layer.at("layer").get<std::size_t>();
      if (layer.contains("score_variance") && !layer["score_variance"].is_null()) {
        t.score_variance = layer["score_variance"].get<double>();
      }
      report.layers.push_back(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + " is not a trace report: " + e.what());
  }
  return report;
}

int cmd_variance(const std::vector<std::string>& traces, const std::string& config_path,
                 const WeightSource& weights_src, const std::vector<std::string>& images, const std::string& out_path,
                 std::ostream& out) {
  std::vector<TraceReport> reports;
  for (const auto& path : traces) reports.push_back(trace_from_json(path));
  if (!images.empty()) {
    if (config_path.empty()) throw ConfigError("--images needs --config");
    RunConfig config = load_run_config(config_path);
    config.flags.observe = true;
    config.flags.viz = false;
    const ModelWeights weights = load_weights(weights_src, config);
    for (const auto& path : images) reports.push_back(run_pipeline(config, weights, read_ppm(path)).report);
  }
  if (reports.empty()) throw ConfigError("no traces or images given");
  const std::string csv = variance_series_csv(variance_series(reports));
  if (out_path.empty()) {
    out << csv;
  } else {
    write_file(out_path, csv);
  }
  return kExitOk;
}

int cmd_selftest(std::ostream& out) {
  bool ok = true;
  for (const check::Result& r : check::selftest()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  out << (ok ? "selftest passed" : "selftest FAILED") << "\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive prune-or-pool token compression for vision transformers"};
  app.require_subcommand(1);

  std::string config_path, image_path, out_path, viz_path, r_list, tau_list, layers, weights_path;
  std::optional<std::uint64_t> synthetic;
  std::optional<std::size_t> flops_r;
  std::vector<std::string> traces, images;
  bool observe = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::size_t size = 224;
  std::uint64_t seed = 0;

  auto add_weight_options = [&](CLI::App* cmd) {
    auto* w = cmd->add_option("--weights", weights_path, "Weight file (PPTW)");
    auto* s = cmd->add_option("--synthetic", synthetic, "Use seeded Gaussian weights instead of a file");
    w->excludes(s);
  };

  auto* run = app.add_subcommand("run", "Run one image through the model and write a trace");
  run->add_option("--config", config_path, "Run configuration JSON")->required();
  add_weight_options(run);
  run->add_option("--image", image_path, "Input image (binary PPM)")->required();
  run->add_option("--out", out_path, "Trace JSON output")->required();
  run->add_option("--viz", viz_path, "Write the provenance map (PPM)");
  run->add_flag("--observe", observe, "Record score variance at every layer");

  auto* flops = app.add_subcommand("flops", "Print the analytic FLOPs report");
  flops->add_option("--config", config_path, "Run configuration JSON")->required();
  flops->add_option("--r", flops_r, "Override r at every stage");

  auto* sweep = app.add_subcommand("sweep", "Grid over r and tau");
  sweep->add_option("--config", config_path, "Run configuration JSON")->required();
  add_weight_options(sweep);
  sweep->add_option("--image", image_path, "Input image (default: synthetic test card)");
  sweep->add_option("--r-list", r_list, "Comma-separated r values")->required();
  sweep->add_option("--tau-list", tau_list, "Comma-separated thresholds, 'inf' allowed")->required();
  sweep->add_option("--layers", layers, "Stage layers (default: config stages, else 4,7,10)");
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_path, "CSV output")->required();

  auto* variance = app.add_subcommand("variance", "Per-layer mean score variance over traces or images");
  variance->add_option("traces", traces, "Trace JSON files");
  variance->add_option("--config", config_path, "Run configuration JSON (with --images)");
  add_weight_options(variance);
  variance->add_option("--images", images, "PPM images to score with observation on");
  variance->add_option("--out", out_path, "CSV output (default: stdout)");

  auto* selftest = app.add_subcommand("selftest", "Run the oracle and regression checks");

  auto* synth_image = app.add_subcommand("synth-image", "Write a seeded test-card PPM");
  synth_image->add_option("--size", size, "Edge length in pixels")->check(CLI::PositiveNumber);
  synth_image->add_option("--seed", seed, "Seed");
  synth_image->add_option("--out", out_path, "PPM output")->required();

  auto* synth_weights = app.add_subcommand("synth-weights", "Write seeded Gaussian weights as a PPTW file");
  synth_weights->add_option("--config", config_path, "Run configuration JSON")->required();
  synth_weights->add_option("--seed", seed, "Seed");
  synth_weights->add_option("--out", out_path, "Weight file output")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitFailure;
  }

  const WeightSource weight_src{weights_path, synthetic};
  try {
    if (*run) return cmd_run(config_path, weight_src, image_path, out_path, viz_path, observe, out);
    if (*flops) return cmd_flops(config_path, flops_r, out);
    if (*sweep) return cmd_sweep(config_path, weight_src, image_path, r_list, tau_list, layers, out_path, threads, out);
    if (*variance) return cmd_variance(traces, config_path, weight_src, images, out_path, out);
    if (*selftest) return cmd_selftest(out);
    if (*synth_image) {
      write_ppm(out_path, synthetic_image(size, seed));
      return kExitOk;
    }
    if (*synth_weights) {
      const RunConfig config = load_run_config(config_path);
      write_weight_file(out_path, synthetic_weights(config.model, seed), config.model);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const WeightsError& e) {
    err << "weights error: " << e.what() << "\n";
    return kExitWeights;
  } catch (const ImageError& e) {
    err << "image error: " << e.what() << "\n";
    return kExitImage;
  } catch (const ScheduleError& e) {
    err << "schedule error: " << e.what() << "\n";
    return kExitSchedule;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace ppt
