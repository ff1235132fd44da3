#include "ppt/compress.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "ppt/error.hpp"

namespace ppt {

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, const char*>, N>;

constexpr NameTable<PolicyMode, 6> kModes{{{PolicyMode::adaptive, "adaptive"},
                                           {PolicyMode::prune_only, "prune_only"},
                                           {PolicyMode::pool_only, "pool_only"},
                                           {PolicyMode::rule_based, "rule_based"},
                                           {PolicyMode::random, "random"},
                                           {PolicyMode::inverted, "inverted"}}};
constexpr NameTable<RedundancyMetric, 2> kMetrics{
    {{RedundancyMetric::score_variance, "score_variance"}, {RedundancyMetric::mean_similarity, "mean_similarity"}}};
constexpr NameTable<ScoringVariant, 2> kScoring{{{ScoringVariant::attention_times_vnorm, "attention_times_vnorm"},
                                                 {ScoringVariant::attention_only, "attention_only"}}};
constexpr NameTable<PoolingMethod, 2> kPooling{{{PoolingMethod::bsm, "bsm"}, {PoolingMethod::dpc, "dpc"}}};
constexpr NameTable<MergeReduction, 2> kReductions{
    {{MergeReduction::size_weighted, "size_weighted"}, {MergeReduction::plain_average, "plain_average"}}};

template <typename E, std::size_t N>
std::string name_of(const NameTable<E, N>& table, E value) {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
std::optional<E> parse_name(const NameTable<E, N>& table, const std::string& s) {
  for (const auto& [e, name] : table) {
    if (s == name) return e;
  }
  return std::nullopt;
}

// Reduce the rows listed in `members` (token indices) into one row.
void reduce_rows(const Matrix& src, std::span<const float> sizes, const std::vector<std::size_t>& members,
                 MergeReduction reduction, std::span<float> dst) {
  std::vector<double> acc(src.cols(), 0.0);
  double weight_total = 0.0;
  for (const std::size_t m : members) {
    const double w = reduction == MergeReduction::size_weighted ? static_cast<double>(sizes[m]) : 1.0;
    weight_total += w;
    const auto row = src.row(m);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += w * static_cast<double>(row[c]);
  }
  for (std::size_t c = 0; c < acc.size(); ++c) dst[c] = static_cast<float>(acc[c] / weight_total);
}

// Builds the output of a merge from groups of image-token positions
// (0-based, CLS excluded), in output order.
CompressResult assemble_merge(const TokenBatch& batch, const Matrix* keys,
                              const std::vector<std::vector<std::uint32_t>>& groups, MergeReduction reduction) {
  const std::size_t out_n = groups.size() + 1;
  CompressResult res;
  res.batch.tokens = Matrix(out_n, batch.tokens.cols());
  res.batch.sizes.assign(out_n, 1.0f);
  std::copy(batch.tokens.row(0).begin(), batch.tokens.row(0).end(), res.batch.tokens.row(0).begin());
  res.batch.sizes[0] = batch.sizes[0];
  if (keys != nullptr) {
    res.keys = Matrix(out_n, keys->cols());
    std::copy(keys->row(0).begin(), keys->row(0).end(), res.keys.row(0).begin());
  }
  std::vector<std::size_t> members;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    members.clear();
    double size = 0.0;
    for (const auto j : groups[k]) {
      members.push_back(j + 1);
      size += batch.sizes[j + 1];
    }
    reduce_rows(batch.tokens, batch.sizes, members, reduction, res.batch.tokens.row(k + 1));
    if (keys != nullptr) reduce_rows(*keys, batch.sizes, members, reduction, res.keys.row(k + 1));
    res.batch.sizes[k + 1] = static_cast<float>(size);
  }
  res.delta.groups = groups;
  return res;
}

void require_keys(const TokenBatch& batch, const Matrix& keys, const char* who) {
  if (keys.rows() != batch.count()) {
    throw std::invalid_argument(std::string(who) + ": keys rows differ from token count");
  }
}

}  // namespace

std::string to_string(PolicyMode m) { return name_of(kModes, m); }
std::string to_string(RedundancyMetric m) { return name_of(kMetrics, m); }
std::string to_string(ScoringVariant v) { return name_of(kScoring, v); }
std::string to_string(PoolingMethod p) { return name_of(kPooling, p); }
std::string to_string(MergeReduction r) { return name_of(kReductions, r); }
std::optional<PolicyMode> parse_policy_mode(const std::string& s) { return parse_name(kModes, s); }
std::optional<RedundancyMetric> parse_metric(const std::string& s) { return parse_name(kMetrics, s); }
std::optional<ScoringVariant> parse_scoring(const std::string& s) { return parse_name(kScoring, s); }
std::optional<PoolingMethod> parse_pooling(const std::string& s) { return parse_name(kPooling, s); }
std::optional<MergeReduction> parse_reduction(const std::string& s) { return parse_name(kReductions, s); }

std::optional<std::size_t> CompressionSchedule::stage_at(std::size_t layer) const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].layer == layer) return i;
  }
  return std::nullopt;
}

std::size_t CompressionSchedule::removal(std::size_t index, std::size_t tokens) const {
  const std::size_t r = stages.at(index).r;
  if (cap_at_bipartite_limit) {
    return std::min(r, tokens == 0 ? 0 : (tokens - 1) / 2);
  }
  return r;
}

void CompressionSchedule::validate(const ModelConfig& config) const {
  std::size_t previous = 0;
  std::size_t tokens = config.num_tokens();
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Stage& s = stages[i];
    if (s.layer < 1 || s.layer > config.depth) {
      throw ScheduleError("stage layer " + std::to_string(s.layer) + " outside [1, " + std::to_string(config.depth) +
                          "]");
    }
    if (s.layer <= previous) {
      throw ScheduleError("stage layers must be strictly increasing");
    }
    previous = s.layer;
    const std::size_t r = removal(i, tokens);
    if (r + 2 > tokens) {
      throw ScheduleError("stage at layer " + std::to_string(s.layer) + " removes " + std::to_string(r) + " of " +
                          std::to_string(tokens) + " tokens; CLS plus one image token must survive");
    }
    tokens -= r;
  }
  if (!std::isfinite(tau) && !(tau > 0)) {
    throw ScheduleError("tau must be a number or +inf");
  }
}

CompressionSchedule CompressionSchedule::with_r(std::size_t r) const {
  CompressionSchedule copy = *this;
  for (Stage& s : copy.stages) s.r = r;
  return copy;
}

ScoreVector significance_scores(const AttentionByproducts& byproducts, ScoringVariant variant) {
  const std::size_t heads = byproducts.cls_attention.size();
  if (heads == 0 || byproducts.value_norms.size() != heads) {
    throw std::invalid_argument("significance_scores: byproducts have no heads or inconsistent heads");
  }
  const std::size_t n = byproducts.cls_attention.front().size();
  if (n < 2) {
    throw std::invalid_argument("significance_scores: need CLS plus at least one image token");
  }
  ScoreVector scores(n - 1, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto& attn = byproducts.cls_attention[h];
    const auto& norms = byproducts.value_norms[h];
    if (attn.size() != n || norms.size() != n) {
      throw std::invalid_argument("significance_scores: head rows differ in length");
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double a = attn[i];
      scores[i - 1] += variant == ScoringVariant::attention_times_vnorm ? a * static_cast<double>(norms[i]) : a;
    }
  }
  double total = 0.0;
  for (double& s : scores) {
    s /= static_cast<double>(heads);
    total += s;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("significance_scores: all scores are zero");
  }
  for (double& s : scores) s /= total;
  return scores;
}

double mean_pairwise_similarity(const Matrix& keys) {
  const std::size_t n = keys.rows();
  if (n < 3) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += cosine_similarity(keys.row(i), keys.row(j));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double redundancy_statistic(const ScoreVector& scores, const CompressionSchedule& schedule, const Matrix* keys) {
  if (schedule.metric == RedundancyMetric::score_variance) {
    return population_variance(std::span<const double>(scores));
  }
  if (keys == nullptr) {
    throw std::invalid_argument("select_policy: mean_similarity metric needs token keys");
  }
  return mean_pairwise_similarity(*keys);
}

PolicyDecision select_policy(const ScoreVector& scores, const CompressionSchedule& schedule, std::size_t stage_index,
                             Rng& rng, const Matrix* keys) {
  if (scores.empty()) {
    throw std::invalid_argument("select_policy: empty score vector");
  }
  PolicyDecision d;
  d.statistic = redundancy_statistic(scores, schedule, keys);
  const bool adaptive_prune = schedule.metric == RedundancyMetric::score_variance ? d.statistic > schedule.tau
                                                                                  : !(d.statistic > schedule.tau_similarity);
  switch (schedule.mode) {
    case PolicyMode::adaptive:
      d.policy = adaptive_prune ? Policy::prune : Policy::pool;
      break;
    case PolicyMode::inverted:
      d.policy = adaptive_prune ? Policy::pool : Policy::prune;
      break;
    case PolicyMode::prune_only:
      d.policy = Policy::prune;
      break;
    case PolicyMode::pool_only:
      d.policy = Policy::pool;
      break;
    case PolicyMode::rule_based: {
      const std::size_t pooled = (schedule.stages.size() + 1) / 2;
      d.policy = stage_index < pooled ? Policy::pool : Policy::prune;
      break;
    }
    case PolicyMode::random:
      d.policy = rng.coin() ? Policy::prune : Policy::pool;
      break;
  }
  return d;
}

CompressResult prune_topk(const TokenBatch& batch, const ScoreVector& scores, std::size_t r) {
  const std::size_t n = batch.count();
  if (scores.size() + 1 != n) {
    throw std::invalid_argument("prune_topk: score vector length must be N-1");
  }
  if (r + 2 > n) {
    throw std::out_of_range("prune_topk: r=" + std::to_string(r) + " out of range for N=" + std::to_string(n));
  }
  const std::size_t n_img = n - 1;
  std::vector<std::uint32_t> order(n_img);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  std::vector<bool> keep(n_img, false);
  for (std::size_t i = 0; i < n_img - r; ++i) keep[order[i]] = true;

  CompressResult res;
  const std::size_t out_n = n - r;
  res.batch.tokens = Matrix(out_n, batch.tokens.cols());
  res.batch.sizes.reserve(out_n);
  std::copy(batch.tokens.row(0).begin(), batch.tokens.row(0).end(), res.batch.tokens.row(0).begin());
  res.batch.sizes.push_back(batch.sizes[0]);
  std::size_t k = 1;
  for (std::uint32_t j = 0; j < n_img; ++j) {
    if (keep[j]) {
      std::copy(batch.tokens.row(j + 1).begin(), batch.tokens.row(j + 1).end(), res.batch.tokens.row(k).begin());
      res.batch.sizes.push_back(batch.sizes[j + 1]);
      res.delta.groups.push_back({j});
      ++k;
    } else {
      res.delta.pruned.push_back(j);
    }
  }
  return res;
}

CompressResult bsm_merge(const TokenBatch& batch, const Matrix& keys, std::size_t r, MergeReduction reduction) {
  require_keys(batch, keys, "bsm_merge");
  const std::size_t n_img = batch.count() - 1;
  const std::size_t n_src = n_img / 2;
  if (r > n_src) {
    throw std::out_of_range("bsm_merge: r=" + std::to_string(r) + " exceeds the source set size " +
                            std::to_string(n_src));
  }
  struct Edge {
    double similarity;
    std::uint32_t src;
    std::uint32_t dst;
  };
  std::vector<Edge> edges;
  edges.reserve(n_src);
  for (std::uint32_t s = 1; s < n_img; s += 2) {
    Edge best{-std::numeric_limits<double>::infinity(), s, 0};
    for (std::uint32_t d = 0; d < n_img; d += 2) {
      const double sim = cosine_similarity(keys.row(s + 1), keys.row(d + 1));
      if (sim > best.similarity) {
        best.similarity = sim;
        best.dst = d;
      }
    }
    edges.push_back(best);
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.similarity > b.similarity; });

  constexpr std::uint32_t kUnmerged = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> target(n_img, kUnmerged);
  for (std::size_t e = 0; e < r; ++e) target[edges[e].src] = edges[e].dst;

  std::vector<std::vector<std::uint32_t>> groups;
  std::vector<std::size_t> slot(n_img, 0);
  for (std::uint32_t j = 0; j < n_img; ++j) {
    if (target[j] != kUnmerged) continue;
    slot[j] = groups.size();
    groups.push_back({j});
  }
  for (std::uint32_t j = 0; j < n_img; ++j) {
    if (target[j] != kUnmerged) groups[slot[target[j]]].push_back(j);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return assemble_merge(batch, &keys, groups, reduction);
}

CompressResult bsm_merge(const TokenBatch& batch, const std::vector<Matrix>& head_keys, std::size_t r,
                         MergeReduction reduction) {
  AttentionByproducts tmp;
  tmp.keys = head_keys;
  return bsm_merge(batch, tmp.mean_keys(), r, reduction);
}

CompressResult dpc_merge(const TokenBatch& batch, const Matrix& features, std::size_t r, MergeReduction reduction) {
  require_keys(batch, features, "dpc_merge");
  const std::size_t n_img = batch.count() - 1;
  if (r + 1 > n_img) {
    throw std::out_of_range("dpc_merge: r=" + std::to_string(r) + " out of range for N=" +
                            std::to_string(batch.count()));
  }
  // Pairwise cosine distances between image tokens.
  std::vector<double> dist(n_img * n_img, 0.0);
  std::vector<double> flat;
  flat.reserve(n_img * (n_img - 1) / 2);
  for (std::size_t i = 0; i < n_img; ++i) {
    for (std::size_t j = i + 1; j < n_img; ++j) {
      const double v = 1.0 - cosine_similarity(features.row(i + 1), features.row(j + 1));
      dist[i * n_img + j] = v;
      dist[j * n_img + i] = v;
      flat.push_back(v);
    }
  }
  double cutoff = 0.0;
  if (!flat.empty()) {
    std::sort(flat.begin(), flat.end());
    cutoff = flat[static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(flat.size() - 1)))];
  }
  auto d = [&](std::size_t i, std::size_t j) { return dist[i * n_img + j]; };

  std::vector<double> rho(n_img, 0.0);
  for (std::size_t i = 0; i < n_img; ++i) {
    for (std::size_t j = 0; j < n_img; ++j) {
      if (i != j && d(i, j) <= cutoff) rho[i] += 1.0;
    }
  }
  std::vector<std::uint32_t> order(n_img);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return rho[a] > rho[b]; });

  // delta: distance to the nearest token earlier in density order.
  std::vector<double> delta(n_img, 0.0);
  std::vector<std::uint32_t> parent(n_img, 0);
  const std::uint32_t top = order.front();
  for (std::size_t j = 0; j < n_img; ++j) delta[top] = std::max(delta[top], d(top, j));
  parent[top] = top;
  for (std::size_t pos = 1; pos < n_img; ++pos) {
    const std::uint32_t t = order[pos];
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_idx = 0;
    for (std::size_t q = 0; q < pos; ++q) {
      const std::uint32_t u = order[q];
      const double v = d(t, u);
      if (v < best || (v == best && u < best_idx)) {
        best = v;
        best_idx = u;
      }
    }
    delta[t] = best;
    parent[t] = best_idx;
  }

  const std::size_t clusters = n_img - r;
  std::vector<std::uint32_t> candidates(order.begin() + 1, order.end());
  std::sort(candidates.begin(), candidates.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double ga = rho[a] * delta[a];
    const double gb = rho[b] * delta[b];
    return ga > gb || (ga == gb && a < b);
  });
  std::vector<bool> is_peak(n_img, false);
  is_peak[top] = true;
  for (std::size_t i = 0; i + 1 < clusters; ++i) is_peak[candidates[i]] = true;

  std::vector<std::uint32_t> cluster_of(n_img, 0);
  for (const std::uint32_t t : order) {
    cluster_of[t] = is_peak[t] ? t : cluster_of[parent[t]];
  }
  std::vector<std::vector<std::uint32_t>> groups;
  std::vector<std::size_t> slot(n_img, 0);
  for (std::uint32_t j = 0; j < n_img; ++j) {
    if (is_peak[j]) {
      slot[j] = groups.size();
      groups.emplace_back();
    }
  }
  for (std::uint32_t j = 0; j < n_img; ++j) groups[slot[cluster_of[j]]].push_back(j);

  CompressResult res = assemble_merge(batch, &features, groups, reduction);
  res.dpc_cutoff = cutoff;
  return res;
}

MergeMap compose(const MergeMap& first, const MergeMap& second) {
  if (second.inputs() != first.groups.size() || !second.is_partition()) {
    throw std::logic_error("compose: stage delta is not a partition of the previous stage's tokens");
  }
  MergeMap out;
  out.pruned = first.pruned;
  for (const auto j : second.pruned) {
    out.pruned.insert(out.pruned.end(), first.groups[j].begin(), first.groups[j].end());
  }
  std::sort(out.pruned.begin(), out.pruned.end());
  out.groups.reserve(second.groups.size());
  for (const auto& g : second.groups) {
    std::vector<std::uint32_t> merged;
    for (const auto j : g) merged.insert(merged.end(), first.groups[j].begin(), first.groups[j].end());
    std::sort(merged.begin(), merged.end());
    out.groups.push_back(std::move(merged));
  }
  return out;
}

TokenBatch compress_stage(const TokenBatch& batch, const AttentionByproducts& byproducts,
                          const CompressionSchedule& schedule, std::size_t stage_index, Rng& rng, LayerTrace& trace) {
  if (stage_index >= schedule.stages.size()) {
    throw std::out_of_range("compress_stage: no stage " + std::to_string(stage_index));
  }
  const std::size_t n = batch.count();
  if (byproducts.tokens() != n) {
    throw std::invalid_argument("compress_stage: byproducts do not match the batch");
  }
  const ScoreVector scores = significance_scores(byproducts, schedule.scoring);
  const Matrix keys = byproducts.mean_keys();
  const PolicyDecision decision = select_policy(scores, schedule, stage_index, rng, &keys);
  const std::size_t r = schedule.removal(stage_index, n);
  if (r + 2 > n) {
    throw ScheduleError("stage " + std::to_string(stage_index) + " removes " + std::to_string(r) + " of " +
                        std::to_string(n) + " tokens");
  }
  trace.policy = decision;
  trace.score_variance = population_variance(std::span<const double>(scores));

  CompressResult res;
  if (decision.policy == Policy::prune) {
    res = prune_topk(batch, scores, r);
  } else if (schedule.pooling == PoolingMethod::dpc) {
    res = dpc_merge(batch, keys, r, schedule.reduction);
  } else {
    // One bipartite round merges at most floor((N-1)/2); run further rounds
    // on the merged set until r tokens are gone.
    res.batch = batch;
    res.keys = keys;
    res.delta = MergeMap::identity(n - 1);
    std::size_t remaining = r;
    while (remaining > 0) {
      const std::size_t k = std::min(remaining, (res.batch.count() - 1) / 2);
      CompressResult round = bsm_merge(res.batch, res.keys, k, schedule.reduction);
      res.delta = compose(res.delta, round.delta);
      res.batch = std::move(round.batch);
      res.keys = std::move(round.keys);
      remaining -= k;
    }
  }
  trace.merge_delta = std::move(res.delta);
  trace.dpc_cutoff = res.dpc_cutoff;
  return std::move(res.batch);
}

}  // namespace ppt
