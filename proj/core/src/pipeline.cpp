#include "ppt/pipeline.hpp"

#include <cstdio>

#include "ppt/error.hpp"

namespace ppt {

RunArtifacts run_pipeline(const RunConfig& config, const ModelWeights& weights, const RgbImage& image) {
  if (config.model.channels != 3) {
    throw ImageError("PPM input is RGB; the model must have 3 channels");
  }
  if (image.width != config.model.image_size || image.height != config.model.image_size) {
    throw ImageError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     ", model expects " + std::to_string(config.model.image_size) + "x" +
                     std::to_string(config.model.image_size));
  }
  const Image input = normalize_image(image, config.normalization);
  ForwardOptions options;
  options.observe = config.flags.observe;

  RunArtifacts out;
  out.report = model_forward(input, weights, config.model, config.effective_schedule(), options);
  out.trace_json = trace_report_json(out.report, config);
  if (config.flags.viz) {
    out.visualization = render_patch_map(image, out.report.merge_map, config.model);
  }
  return out;
}

std::string summary_line(const TraceReport& report) {
  std::string policies;
  for (const LayerTrace& layer : report.layers) {
    if (!layer.policy) continue;
    if (!policies.empty()) policies += ",";
    policies += "L" + std::to_string(layer.layer) + ":" + to_string(layer.policy->policy);
  }
  char flops[32];
  std::snprintf(flops, sizeof(flops), "%.3f", static_cast<double>(report.flops.total) / 1e9);
  return "top1=" + std::to_string(report.top1()) + " flops=" + flops + "G tokens=" +
         std::to_string(report.layers.empty() ? 0 : report.layers.back().tokens_out) +
         " policies=" + (policies.empty() ? "none" : policies);
}

}  // namespace ppt
