#include "ppt/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ppt/error.hpp"
#include "ppt/flops.hpp"
#include "ppt/forward.hpp"
#include "ppt/oracles.hpp"

namespace ppt::check {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng.next_u64() % n); }

CompressionSchedule deit_schedule(std::size_t r) {
  CompressionSchedule s;
  s.stages = {{4, r}, {7, r}, {10, r}};
  return s;
}

Image normalized_synthetic(const ModelConfig& config, std::uint64_t seed) {
  return normalize_image(synthetic_image(config.image_size, seed), Normalization{});
}

double max_abs(std::span<const float> v) {
  double m = 0.0;
  for (const float x : v) m = std::max(m, std::abs(static_cast<double>(x)));
  return m;
}

double relative_gap(std::span<const float> reference, std::span<const float> other) {
  double gap = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    gap = std::max(gap, std::abs(static_cast<double>(reference[i]) - static_cast<double>(other[i])));
  }
  return gap / std::max(max_abs(reference), 1e-30);
}

}  // namespace

Result flops_reference() {
  struct Item {
    const char* label;
    ModelConfig config;
    std::size_t r;
    double reference;
  };
  const std::vector<Item> items = {
      {"DeiT-S r=0", ModelConfig::deit_small(), 0, 4.6},   {"DeiT-S r=50", ModelConfig::deit_small(), 50, 2.94},
      {"DeiT-S r=60", ModelConfig::deit_small(), 60, 2.72}, {"DeiT-Ti r=0", ModelConfig::deit_tiny(), 0, 1.3},
      {"DeiT-Ti r=50", ModelConfig::deit_tiny(), 50, 0.80}, {"DeiT-B r=0", ModelConfig::deit_base(), 0, 17.6},
      {"DeiT-B r=47", ModelConfig::deit_base(), 47, 11.60},
  };
  Result res{"flops_reference", true, ""};
  for (const Item& item : items) {
    const double g = static_cast<double>(model_flops(item.config, deit_schedule(item.r)).total) / 1e9;
    const double err = (g - item.reference) / item.reference * 100.0;
    const bool ok = std::abs(err) <= 2.0;
    res.passed = res.passed && ok;
    res.detail += std::string(item.label) + " " + fixed(g, 4) + "G vs " + fixed(item.reference, 2) + "G (" +
                  (err >= 0 ? "+" : "") + fixed(err, 2) + "%" + (ok ? "" : " FAIL") + "); ";
  }
  CompressionSchedule capped = deit_schedule(60);
  capped.cap_at_bipartite_limit = true;
  res.detail += "[info: DeiT-S r=60 capped " +
                fixed(static_cast<double>(model_flops(ModelConfig::deit_small(), capped).total) / 1e9, 4) + "G] ";
  const double reduction = model_flops(ModelConfig::deit_small(), deit_schedule(50)).reduction_percent;
  const bool red_ok = reduction >= 35.0 && reduction <= 38.0;
  res.passed = res.passed && red_ok;
  res.detail += "DeiT-S r=50 reduction " + fixed(reduction, 2) + "%" + (red_ok ? "" : " FAIL");
  return res;
}

Result flops_regression() {
  struct Row {
    ModelConfig config;
    std::size_t r;
    std::uint64_t literal;
    std::uint64_t capped;
  };
  const auto ti = ModelConfig::deit_tiny();
  const auto s = ModelConfig::deit_small();
  const auto b = ModelConfig::deit_base();
  const std::vector<Row> rows = {
      {ti, 0, 1253683200ULL, 1253683200ULL},     {ti, 10, 1157053440ULL, 1157053440ULL},
      {ti, 20, 1062958080ULL, 1062958080ULL},    {ti, 30, 971397120ULL, 971397120ULL},
      {ti, 40, 882370560ULL, 882370560ULL},      {ti, 45, 838807680ULL, 838807680ULL},
      {ti, 50, 795878400ULL, 798385152ULL},      {ti, 60, 711920640ULL, 738819072ULL},
      {s, 0, 4598882304ULL, 4598882304ULL},      {s, 10, 4255217664ULL, 4255217664ULL},
      {s, 20, 3916621824ULL, 3916621824ULL},     {s, 30, 3583094784ULL, 3583094784ULL},
      {s, 40, 3254636544ULL, 3254636544ULL},     {s, 50, 2931247104ULL, 2940979200ULL},
      {s, 60, 2612926464ULL, 2718627840ULL},     {b, 0, 17563828224ULL, 17563828224ULL},
      {b, 40, 12468854784ULL, 12468854784ULL},   {b, 47, 11593910784ULL, 11593910784ULL},
      {b, 50, 11220455424ULL, 11258793984ULL},
  };
  Result res{"flops_regression", true, ""};
  std::size_t bad = 0;
  for (const Row& row : rows) {
    CompressionSchedule sched = deit_schedule(row.r);
    const auto literal = model_flops(row.config, sched).total;
    sched.cap_at_bipartite_limit = true;
    const auto capped = model_flops(row.config, sched).total;
    if (literal != row.literal || capped != row.capped) {
      ++bad;
      res.detail += "dim=" + std::to_string(row.config.dim) + " r=" + std::to_string(row.r) + " got " +
                    std::to_string(literal) + "/" + std::to_string(capped) + "; ";
    }
  }
  res.passed = bad == 0;
  res.detail += std::to_string(rows.size() - bad) + "/" + std::to_string(rows.size()) + " exact totals";
  return res;
}

Result token_trajectory(std::uint64_t seed) {
  const ModelConfig config = ModelConfig::deit_small();
  const ModelWeights weights = synthetic_weights(config, seed);
  const Image image = normalized_synthetic(config, seed);
  const std::vector<std::size_t> expected = {197, 197, 197, 147, 147, 147, 97, 97, 97, 47, 47, 47};

  Result res{"token_trajectory", true, ""};
  std::vector<std::size_t> analytic;
  for (const auto& [msa, ffn] : ppt::token_trajectory(config, deit_schedule(50))) analytic.push_back(ffn);
  if (analytic != expected) {
    res.passed = false;
    res.detail += "analytic trajectory differs; ";
  }
  for (const PolicyMode mode : {PolicyMode::prune_only, PolicyMode::pool_only, PolicyMode::adaptive}) {
    CompressionSchedule sched = deit_schedule(50);
    sched.mode = mode;
    const TraceReport report = model_forward(image, weights, config, sched);
    std::vector<std::size_t> counts;
    std::string policies;
    for (const LayerTrace& layer : report.layers) {
      counts.push_back(layer.tokens_out);
      if (layer.policy) policies += std::string(policies.empty() ? "" : ",") + to_string(layer.policy->policy);
    }
    const bool ok = counts == expected;
    res.passed = res.passed && ok;
    std::string joined;
    for (const auto c : counts) joined += (joined.empty() ? "" : "/") + std::to_string(c);
    res.detail += to_string(mode) + " [" + policies + "] " + joined + (ok ? "; " : " FAIL; ");
  }
  return res;
}

Result bsm_oracle(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t map_mismatch = 0;
  std::size_t feature_mismatch = 0;
  std::size_t tied = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t n = 3 + below(rng, 8);
    const std::size_t d = 1 + below(rng, 8);
    const std::size_t heads = 1 + below(rng, 3);
    const std::size_t kd = 1 + below(rng, 4);
    const bool coarse = rng.coin();
    tied += coarse ? 1 : 0;

    TokenBatch batch;
    batch.tokens = Matrix(n, d);
    for (float& v : batch.tokens.data()) v = static_cast<float>(rng.normal());
    batch.sizes.assign(n, 1.0f);
    for (std::size_t i = 1; i < n; ++i) batch.sizes[i] = static_cast<float>(1 + below(rng, 3));
    std::vector<Matrix> keys(heads, Matrix(n, kd));
    for (Matrix& k : keys) {
      for (float& v : k.data()) {
        v = coarse ? static_cast<float>(static_cast<int>(below(rng, 3)) - 1) : static_cast<float>(rng.normal());
      }
    }
    const std::size_t r = below(rng, (n - 1) / 2 + 1);

    const CompressResult got = bsm_merge(batch, keys, r);
    const oracle::MergeOutcome want = oracle::brute_force_bsm(batch, keys, r);
    if (!(got.delta == want.delta) || got.batch.sizes != want.sizes) {
      ++map_mismatch;
      continue;
    }
    double gap = 0.0;
    for (std::size_t i = 0; i < want.tokens.size(); ++i) {
      const double a = want.tokens.data()[i];
      const double b = got.batch.tokens.data()[i];
      gap = std::max(gap, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    worst = std::max(worst, gap);
    if (gap > 1e-6) ++feature_mismatch;
  }
  Result res{"bsm_oracle", map_mismatch == 0 && feature_mismatch == 0, ""};
  res.detail = std::to_string(instances) + " instances (" + std::to_string(tied) +
               " with tied keys), merge-map mismatches " + std::to_string(map_mismatch) + ", feature mismatches " +
               std::to_string(feature_mismatch) + ", max gap " + fixed(worst, 9);
  return res;
}

Result topk_oracle(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t mismatches = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t len = 2 + below(rng, 40);
    const std::size_t levels = rng.coin() ? 3 : 0;
    ScoreVector scores(len);
    for (double& s : scores) s = levels ? static_cast<double>(below(rng, levels)) : rng.uniform();
    const std::size_t r = below(rng, len);

    TokenBatch batch;
    batch.tokens = Matrix(len + 1, 2);
    for (std::size_t i = 0; i <= len; ++i) {
      batch.tokens(i, 0) = static_cast<float>(i);
      batch.tokens(i, 1) = static_cast<float>(rng.normal());
    }
    batch.sizes.assign(len + 1, 1.0f);

    const CompressResult got = prune_topk(batch, scores, r);
    const auto kept = oracle::topk_kept(scores, r);
    std::vector<std::uint32_t> got_kept;
    bool rows_ok = got.batch.count() == kept.size() + 1 && got.batch.tokens(0, 0) == 0.0f;
    for (std::size_t g = 0; g < got.delta.groups.size(); ++g) {
      if (got.delta.groups[g].size() != 1) rows_ok = false;
      got_kept.push_back(got.delta.groups[g].front());
    }
    for (std::size_t k = 0; rows_ok && k < kept.size(); ++k) {
      rows_ok = got.batch.tokens(k + 1, 0) == static_cast<float>(kept[k] + 1) &&
                got.batch.tokens(k + 1, 1) == batch.tokens(kept[k] + 1, 1);
    }
    std::vector<std::uint32_t> all = got_kept;
    all.insert(all.end(), got.delta.pruned.begin(), got.delta.pruned.end());
    std::sort(all.begin(), all.end());
    bool partition = all.size() == len;
    for (std::size_t i = 0; partition && i < len; ++i) partition = all[i] == i;
    if (got_kept != kept || !rows_ok || !partition) ++mismatches;
  }
  return {"topk_oracle", mismatches == 0,
          std::to_string(instances) + " score vectors, mismatches " + std::to_string(mismatches)};
}

Result marginalization(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  std::size_t failures = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t n = 2 + below(rng, 6);
    const std::size_t heads = 1 + below(rng, 3);
    const std::size_t dim = heads * (1 + below(rng, 4));
    const BlockWeights block = oracle::random_block(dim, 4 * dim, 0.5, rng);
    Matrix x(n, dim);
    for (float& v : x.data()) v = static_cast<float>(rng.normal());
    SizeVector sizes(n, 1.0f);
    for (std::size_t i = 0; i < n; ++i) sizes[i] = static_cast<float>(1 + below(rng, 4));

    const Matrix merged = attention_forward(x, sizes, block, heads).output;
    const oracle::Expanded e = oracle::expand_by_size(x, sizes);
    const Matrix expanded = attention_forward(e.tokens, e.sizes, block, heads).output;

    const double scale = std::max(max_abs(merged.data()), 1e-30);
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto copies = static_cast<std::size_t>(sizes[i]);
      for (std::size_t c = 0; c < copies; ++c) {
        const auto row = expanded.row(e.first_copy[i] + c);
        for (std::size_t k = 0; k < dim; ++k) {
          gap = std::max(gap, std::abs(static_cast<double>(merged(i, k)) - row[k]) / scale);
        }
      }
    }
    worst = std::max(worst, gap);
    if (!(gap < 1e-5)) ++failures;
  }
  return {"marginalization", failures == 0,
          std::to_string(instances) + " instances, max relative gap " + fixed(worst, 9) + ", failures " +
              std::to_string(failures)};
}

Result duplicate_merge(std::uint64_t seed) {
  ModelConfig config;
  config.image_size = 8;
  config.patch_size = 2;
  config.dim = 16;
  config.depth = 4;
  config.heads = 2;
  config.num_classes = 10;
  const std::size_t g = config.grid();
  const std::size_t p = config.patch_size;

  ModelWeights weights = synthetic_weights(config, seed);
  // Sharper attention so the size bias actually matters.
  for (BlockWeights& b : weights.blocks) {
    for (float& v : b.qkv.weight.data()) v *= 10.0f;
  }
  for (std::size_t k = 0; k < config.num_patches() / 2; ++k) {
    auto src = weights.pos_embed.row(1 + 2 * k);
    std::copy(src.begin(), src.end(), weights.pos_embed.row(2 + 2 * k).begin());
  }

  Rng rng(seed ^ 0xD0D0ULL);
  Image image{config.image_size, config.image_size, 3, std::vector<float>(config.image_size * config.image_size * 3)};
  for (std::size_t py = 0; py < g; ++py) {
    for (std::size_t qx = 0; qx < g; qx += 2) {
      for (std::size_t dy = 0; dy < p; ++dy) {
        for (std::size_t dx = 0; dx < p; ++dx) {
          for (std::size_t c = 0; c < 3; ++c) {
            const float v = static_cast<float>(rng.normal());
            const std::size_t y = py * p + dy;
            image.data[(y * image.width + qx * p + dx) * 3 + c] = v;
            image.data[(y * image.width + (qx + 1) * p + dx) * 3 + c] = v;
          }
        }
      }
    }
  }

  const TraceReport full = model_forward(image, weights, config, CompressionSchedule{});

  CompressionSchedule pool;
  pool.mode = PolicyMode::pool_only;
  pool.stages = {{1, config.num_patches() / 2}};
  const TraceReport pooled = model_forward(image, weights, config, pool);

  // Deduplicated input: one token per twin pair carrying size 2.
  const TokenBatch embedded = patch_embed(image, weights, config);
  TokenBatch dedup;
  dedup.tokens = Matrix(1 + config.num_patches() / 2, config.dim);
  dedup.sizes.assign(dedup.tokens.rows(), 2.0f);
  dedup.sizes[0] = 1.0f;
  std::copy(embedded.tokens.row(0).begin(), embedded.tokens.row(0).end(), dedup.tokens.row(0).begin());
  for (std::size_t k = 0; k < config.num_patches() / 2; ++k) {
    auto src = embedded.tokens.row(1 + 2 * k);
    std::copy(src.begin(), src.end(), dedup.tokens.row(1 + k).begin());
  }
  for (std::size_t layer = 1; layer <= config.depth; ++layer) {
    dedup = block_forward(std::move(dedup), weights.blocks[layer - 1], config, layer).batch;
  }
  const std::vector<float> dedup_logits = classify(dedup, weights);

  MergeMap twins;
  for (std::uint32_t k = 0; k < config.num_patches() / 2; ++k) twins.groups.push_back({2 * k, 2 * k + 1});
  const bool pairs_ok = pooled.merge_map == twins;
  const double gap_pooled = relative_gap(full.logits, pooled.logits);
  const double gap_dedup = relative_gap(full.logits, dedup_logits);
  const bool ok = pairs_ok && gap_pooled < 1e-4 && gap_dedup < 1e-4;
  return {"duplicate_merge", ok,
          std::string("twins merged pairwise: ") + (pairs_ok ? "yes" : "no") + ", pooled vs full " +
              fixed(gap_pooled, 9) + ", deduplicated vs full " + fixed(gap_dedup, 9)};
}

Result policy_boundaries(std::uint64_t seed) {
  ModelConfig config;
  config.image_size = 16;
  config.patch_size = 2;
  config.dim = 16;
  config.depth = 4;
  config.heads = 2;
  config.num_classes = 10;
  const ModelWeights weights = synthetic_weights(config, seed);
  const Image image = normalized_synthetic(config, seed);
  CompressionSchedule base;
  base.stages = {{1, 8}, {2, 8}, {3, 8}};
  base.random_seed = seed;

  Result res{"policy_boundaries", true, ""};
  auto fail = [&](const std::string& why) {
    res.passed = false;
    res.detail += why + "; ";
  };
  auto policies = [&](const CompressionSchedule& s) {
    std::vector<PolicyDecision> out;
    for (const LayerTrace& layer : model_forward(image, weights, config, s).layers) {
      if (layer.policy) out.push_back(*layer.policy);
    }
    return out;
  };
  auto all_are = [](const std::vector<PolicyDecision>& ds, Policy p) {
    return std::all_of(ds.begin(), ds.end(), [p](const PolicyDecision& d) { return d.policy == p; });
  };

  CompressionSchedule zero = base;
  zero.tau = 0.0;
  const auto at_zero = policies(zero);
  const bool spread = std::all_of(at_zero.begin(), at_zero.end(), [](const auto& d) { return d.statistic > 0.0; });
  if (!spread) fail("scores unexpectedly constant");
  if (!all_are(at_zero, Policy::prune)) fail("tau=0 did not prune everywhere");

  CompressionSchedule huge = base;
  huge.tau = 1e9;
  if (!all_are(policies(huge), Policy::pool)) fail("tau=1e9 did not pool everywhere");

  // Inverted vs adaptive on random score vectors, thresholds placed on,
  // below and above the statistic.
  Rng rng(seed ^ 0x1A7EULL);
  std::size_t negation_failures = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    const std::size_t len = 2 + below(rng, 60);
    ScoreVector scores(len);
    double total = 0.0;
    for (double& s : scores) total += (s = t % 10 == 0 ? 1.0 : rng.uniform());
    for (double& s : scores) s /= total;
    const double var = population_variance(std::span<const double>(scores));
    CompressionSchedule s = base;
    switch (t % 4) {
      case 0: s.tau = var; break;
      case 1: s.tau = var * rng.uniform(); break;
      case 2: s.tau = var * (1.0 + rng.uniform()); break;
      default: s.tau = 1e-4 * rng.uniform(); break;
    }
    Rng unused(0);
    const PolicyDecision adaptive = select_policy(scores, s, 0, unused);
    s.mode = PolicyMode::inverted;
    const PolicyDecision inverted = select_policy(scores, s, 0, unused);
    if (adaptive.policy == inverted.policy || adaptive.statistic != inverted.statistic) ++negation_failures;
  }
  if (negation_failures) fail("inverted matched adaptive " + std::to_string(negation_failures) + " times");
  {
    CompressionSchedule inv = base;
    // Later stages see different token sets, so only the first is comparable.
    for (const double scale : {0.5, 1.0, 2.0}) {
      inv.tau = at_zero.front().statistic * scale;
      inv.mode = PolicyMode::adaptive;
      const auto a = policies(inv);
      inv.mode = PolicyMode::inverted;
      const auto b = policies(inv);
      if (a.front().policy == b.front().policy) fail("forward-level inversion broke");
    }
  }

  // Every mechanism runs and removes exactly r tokens per stage.
  std::size_t variants = 0;
  auto run_variant = [&](const std::string& label, const CompressionSchedule& s,
                         const std::function<bool(const std::vector<PolicyDecision>&)>& expect) {
    ++variants;
    try {
      const TraceReport rep = model_forward(image, weights, config, s);
      std::vector<PolicyDecision> ds;
      std::size_t expected_tokens = config.num_tokens();
      for (const LayerTrace& layer : rep.layers) {
        if (const auto st = s.stage_at(layer.layer)) expected_tokens -= s.stages[*st].r;
        if (layer.tokens_out != expected_tokens) fail(label + " token count");
        if (layer.policy) ds.push_back(*layer.policy);
      }
      if (!rep.merge_map.is_partition()) fail(label + " provenance is not a partition");
      if (expect && !expect(ds)) fail(label + " policies");
    } catch (const std::exception& e) {
      fail(label + " threw: " + e.what());
    }
  };
  for (const PolicyMode m : {PolicyMode::adaptive, PolicyMode::inverted, PolicyMode::random}) {
    CompressionSchedule s = base;
    s.mode = m;
    run_variant(to_string(m), s, nullptr);
  }
  {
    CompressionSchedule s = base;
    s.mode = PolicyMode::prune_only;
    run_variant("prune_only", s, [&](const auto& ds) { return all_are(ds, Policy::prune); });
    s.mode = PolicyMode::pool_only;
    run_variant("pool_only", s, [&](const auto& ds) { return all_are(ds, Policy::pool); });
    s.mode = PolicyMode::rule_based;
    run_variant("rule_based", s, [](const auto& ds) {
      return ds.size() == 3 && ds[0].policy == Policy::pool && ds[1].policy == Policy::pool &&
             ds[2].policy == Policy::prune;
    });
  }
  {
    CompressionSchedule s = base;
    s.metric = RedundancyMetric::mean_similarity;
    run_variant("mean_similarity", s, nullptr);
    s = base;
    s.scoring = ScoringVariant::attention_only;
    run_variant("attention_only", s, nullptr);
    s = base;
    s.mode = PolicyMode::pool_only;
    s.pooling = PoolingMethod::dpc;
    run_variant("dpc", s, nullptr);
    s = base;
    s.mode = PolicyMode::pool_only;
    s.reduction = MergeReduction::plain_average;
    run_variant("plain_average", s, nullptr);
    s = base;
    s.mode = PolicyMode::pool_only;
    AttentionOptions plain;
    plain.size_bias = false;
    ++variants;
    ForwardOptions opts;
    opts.attention = plain;
    if (model_forward(image, weights, config, s, opts).layers.back().tokens_out != config.num_tokens() - 24) {
      fail("no_size_bias token count");
    }
  }
  {
    CompressionSchedule s = base;
    s.mode = PolicyMode::random;
    if (!(policies(s) == policies(s))) fail("random mode not reproducible");
  }
  res.detail += "tau=0 prune x" + std::to_string(at_zero.size()) + ", tau=1e9 pool, 100 inverted negations, " +
                std::to_string(variants) + " mechanism variants executed";
  return res;
}

RunConfig golden_config() {
  return parse_run_config(R"({
  "model": {"image_size": 32, "patch_size": 4, "channels": 3, "dim": 32, "depth": 4,
            "heads": 4, "mlp_ratio": 4.0, "num_classes": 10},
  "schedule": {"stages": [{"layer": 2, "r": 12}, {"layer": 3, "r": 12}], "tau": 1e-5},
  "seed": 7,
  "flags": {"observe": true, "viz": true}
})");
}

RunArtifacts golden_run() {
  const RunConfig config = golden_config();
  const ModelWeights weights = synthetic_weights(config.model, config.seed);
  return run_pipeline(config, weights, synthetic_image(config.model.image_size, 11));
}

Result determinism(const std::optional<std::filesystem::path>& golden_dir) {
  const RunArtifacts a = golden_run();
  const RunArtifacts b = golden_run();
  const auto ppm_a = encode_ppm(*a.visualization);
  const auto ppm_b = encode_ppm(*b.visualization);
  Result res{"determinism", a.trace_json == b.trace_json && ppm_a == ppm_b, ""};
  res.detail = std::string("repeat run ") + (res.passed ? "byte-identical" : "DIFFERS");
  if (golden_dir) {
    try {
      const auto trace = read_file(*golden_dir / "golden_trace.json");
      const auto ppm = read_file(*golden_dir / "golden_viz.ppm");
      const bool same_trace = std::string(trace.begin(), trace.end()) == a.trace_json;
      const bool same_ppm = ppm == ppm_a;
      res.passed = res.passed && same_trace && same_ppm;
      res.detail += std::string(", golden trace ") + (same_trace ? "match" : "MISMATCH") + ", golden ppm " +
                    (same_ppm ? "match" : "MISMATCH");
    } catch (const std::exception& e) {
      res.passed = false;
      res.detail += std::string(", golden files unreadable: ") + e.what();
    }
  }
  return res;
}

Result speedup(std::uint64_t seed) {
  const ModelConfig config = ModelConfig::deit_small();
  const ModelWeights weights = synthetic_weights(config, seed);
  const Image image = normalized_synthetic(config, seed);
  auto best_of = [&](const CompressionSchedule& s) {
    double best = 1e300;
    for (int i = 0; i < 2; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)model_forward(image, weights, config, s);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  const double empty = best_of(CompressionSchedule{});
  const double r50 = best_of(deit_schedule(50));
  const double cut = (1.0 - r50 / empty) * 100.0;
  return {"speedup", cut >= 20.0,
          "empty " + fixed(empty * 1e3, 1) + " ms, r=50 " + fixed(r50 * 1e3, 1) + " ms, reduction " + fixed(cut, 1) +
              "%"};
}

std::vector<Result> selftest() {
  return {flops_regression(),       bsm_oracle(500, 1),   topk_oracle(500, 2), marginalization(200, 3),
          duplicate_merge(4),       policy_boundaries(5), determinism(std::nullopt)};
}

}  // namespace ppt::check
