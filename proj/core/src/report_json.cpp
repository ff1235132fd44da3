#include <cmath>

#include "json_util.hpp"
#include "ppt/io.hpp"

namespace ppt {

using nlohmann::json;

namespace {

json number_or_null(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

json merge_map_json(const MergeMap& m) { return {{"groups", m.groups}, {"pruned", m.pruned}}; }

json flops_json(const FlopsReport& r) {
  json layers = json::array();
  for (const LayerFlops& l : r.layers) {
    layers.push_back({{"layer", l.layer},
                      {"msa_flops", l.msa},
                      {"ffn_flops", l.ffn},
                      {"token_count_msa", l.tokens_msa},
                      {"token_count_ffn", l.tokens_ffn}});
  }
  return {{"layers", layers},
          {"patch_embed_flops", r.patch_embed},
          {"head_flops", r.head},
          {"total", r.total},
          {"baseline_total", r.baseline_total},
          {"reduction_percent", r.reduction_percent}};
}

}  // namespace

std::string flops_report_json(const FlopsReport& report) { return flops_json(report).dump(2) + "\n"; }

std::string trace_report_json(const TraceReport& report, const RunConfig& config) {
  json layers = json::array();
  for (const LayerTrace& l : report.layers) {
    json entry = {{"layer", l.layer},
                  {"tokens_in", l.tokens_in},
                  {"tokens_out", l.tokens_out},
                  {"r", l.r},
                  {"score_variance", number_or_null(l.score_variance)},
                  {"dpc_cutoff", number_or_null(l.dpc_cutoff)}};
    entry["policy"] = l.policy ? json(to_string(l.policy->policy)) : json(nullptr);
    entry["statistic"] = l.policy ? number_or_null(l.policy->statistic) : json(nullptr);
    entry["merge_delta"] = l.merge_delta ? merge_map_json(*l.merge_delta) : json(nullptr);
    layers.push_back(std::move(entry));
  }
  json logits = json::array();
  for (const float v : report.logits) logits.push_back(static_cast<double>(v));
  const json j = {{"model", detail::model_config_to_json(config.model)},
                  {"schedule", detail::schedule_to_json(config.effective_schedule())},
                  {"layers", layers},
                  {"flops", flops_json(report.flops)},
                  {"merge_map", merge_map_json(report.merge_map)},
                  {"logits", logits},
                  {"top1", report.top1()}};
  return j.dump(2) + "\n";
}

}  // namespace ppt
