#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppt/numeric.hpp"
#include "ppt/types.hpp"

namespace ppt {

enum class PolicyMode { adaptive, prune_only, pool_only, rule_based, random, inverted };
enum class RedundancyMetric { score_variance, mean_similarity };
enum class ScoringVariant { attention_times_vnorm, attention_only };
enum class PoolingMethod { bsm, dpc };
enum class MergeReduction { size_weighted, plain_average };

std::string to_string(PolicyMode m);
std::string to_string(RedundancyMetric m);
std::string to_string(ScoringVariant v);
std::string to_string(PoolingMethod p);
std::string to_string(MergeReduction r);
// Inverse of to_string; nullopt for unknown names.
std::optional<PolicyMode> parse_policy_mode(const std::string& s);
std::optional<RedundancyMetric> parse_metric(const std::string& s);
std::optional<ScoringVariant> parse_scoring(const std::string& s);
std::optional<PoolingMethod> parse_pooling(const std::string& s);
std::optional<MergeReduction> parse_reduction(const std::string& s);

struct Stage {
  std::size_t layer = 0;  // 1-based block index
  std::size_t r = 0;      // tokens removed

  bool operator==(const Stage&) const = default;
};

struct CompressionSchedule {
  std::vector<Stage> stages;
  double tau = 7e-5;
  PolicyMode mode = PolicyMode::adaptive;
  std::uint64_t random_seed = 0;
  RedundancyMetric metric = RedundancyMetric::score_variance;
  double tau_similarity = 0.5;
  ScoringVariant scoring = ScoringVariant::attention_times_vnorm;
  PoolingMethod pooling = PoolingMethod::bsm;
  MergeReduction reduction = MergeReduction::size_weighted;
  /// Remove min(r, floor((N-1)/2)) tokens per stage regardless of policy,
  /// i.e. never more than one bipartite round can merge.
  bool cap_at_bipartite_limit = false;

  /// Stage index installed at `layer`, if any.
  std::optional<std::size_t> stage_at(std::size_t layer) const;

  /// Tokens actually removed by stage `index` when it sees `tokens` tokens.
  std::size_t removal(std::size_t index, std::size_t tokens) const;

  /// Layers inside [1, depth], strictly increasing, and the token budget
  /// leaves CLS plus at least one image token. Throws ScheduleError.
  void validate(const ModelConfig& config) const;

  /// Copy with every stage's r replaced.
  CompressionSchedule with_r(std::size_t r) const;
};

/// Normalized significance of image tokens (CLS excluded), sums to 1.
using ScoreVector = std::vector<double>;

ScoreVector significance_scores(const AttentionByproducts& byproducts, ScoringVariant variant);

/// Mean cosine similarity over all pairs of image rows (rows 1..N-1).
double mean_pairwise_similarity(const Matrix& keys);

/// Redundancy statistic for the configured metric.
double redundancy_statistic(const ScoreVector& scores, const CompressionSchedule& schedule, const Matrix* keys);

/// Policy for one stage. `keys` (head-averaged, CLS row included) is
/// required for the mean-similarity metric. The random mode draws exactly
/// one coin from `rng` per call.
PolicyDecision select_policy(const ScoreVector& scores, const CompressionSchedule& schedule, std::size_t stage_index,
                             Rng& rng, const Matrix* keys = nullptr);

struct CompressResult {
  TokenBatch batch;
  MergeMap delta;
  /// Keys reduced alongside the features (merges only), CLS row included.
  Matrix keys;
  std::optional<double> dpc_cutoff;
};

/// Keep CLS and the N-1-r best-scoring image tokens in their original order.
/// Ties keep the lower index.
CompressResult prune_topk(const TokenBatch& batch, const ScoreVector& scores, std::size_t r);

/// Bipartite soft matching on image tokens: odd image positions are sources,
/// even positions destinations; the r most similar source->best-destination
/// edges are merged. `keys` is N x c with the CLS row ignored.
CompressResult bsm_merge(const TokenBatch& batch, const Matrix& keys, std::size_t r,
                         MergeReduction reduction = MergeReduction::size_weighted);
CompressResult bsm_merge(const TokenBatch& batch, const std::vector<Matrix>& head_keys, std::size_t r,
                         MergeReduction reduction = MergeReduction::size_weighted);

/// Density-peaks clustering into N-1-r clusters using cosine distance.
CompressResult dpc_merge(const TokenBatch& batch, const Matrix& features, std::size_t r,
                         MergeReduction reduction = MergeReduction::size_weighted);

/// `second` applied after `first`: second's indices address first's outputs.
MergeMap compose(const MergeMap& first, const MergeMap& second);

/// Score, decide and compress for one scheduled stage; fills the policy,
/// statistic and provenance fields of `trace`.
TokenBatch compress_stage(const TokenBatch& batch, const AttentionByproducts& byproducts,
                          const CompressionSchedule& schedule, std::size_t stage_index, Rng& rng, LayerTrace& trace);

}  // namespace ppt
