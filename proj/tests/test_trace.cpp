#include <gtest/gtest.h>

#include <set>
#include <stdexcept>

#include "ppt/compress.hpp"
#include "ppt/error.hpp"
#include "ppt/forward.hpp"
#include "ppt/io.hpp"
#include "ppt/trace.hpp"

using namespace ppt;

namespace {

using Groups = std::vector<std::vector<std::uint32_t>>;

MergeMap map_of(Groups groups, std::vector<std::uint32_t> pruned = {}) {
  MergeMap m;
  m.groups = std::move(groups);
  m.pruned = std::move(pruned);
  return m;
}

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

RgbImage gray(std::size_t size, std::uint8_t v) {
  return RgbImage{size, size, std::vector<std::uint8_t>(size * size * 3, v)};
}

}  // namespace

TEST(Flatten, NoStagesIsIdentity) { EXPECT_EQ(flatten_provenance(5, {}), MergeMap::identity(5)); }

TEST(Flatten, PruningAMergedTokenPrunesAllItsPatches) {
  const MergeMap m = flatten_provenance(4, {map_of({{0}, {1, 2}, {3}}), map_of({{0}, {2}}, {1})});
  EXPECT_EQ(m.pruned, (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(m.groups, (Groups{{0}, {3}}));
}

TEST(Flatten, MergesUnionAcrossStages) {
  const MergeMap m = flatten_provenance(4, {map_of({{0}, {1, 2}, {3}}), map_of({{0}, {1, 2}})});
  EXPECT_EQ(m.groups, (Groups{{0}, {1, 2, 3}}));
}

TEST(Flatten, RejectsNonPartition) {
  EXPECT_THROW(flatten_provenance(3, {map_of({{0}, {0, 1}})}), std::logic_error);
  EXPECT_THROW(flatten_provenance(3, {map_of({{0}, {1}})}), std::logic_error);
}

TEST(Flatten, RandomChainsStayPartitions) {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const std::size_t patches = 4 + rng.next_u64() % 40;
    TokenBatch b;
    b.tokens = Matrix(patches + 1, 3);
    for (float& v : b.tokens.data()) v = static_cast<float>(rng.normal());
    b.sizes.assign(patches + 1, 1.0f);
    std::vector<MergeMap> deltas;
    while (b.count() > 3 && deltas.size() < 4) {
      const std::size_t img = b.count() - 1;
      CompressResult res;
      if (rng.coin()) {
        ScoreVector s(img);
        for (double& x : s) x = rng.uniform();
        res = prune_topk(b, s, rng.next_u64() % (img - 1));
      } else {
        res = bsm_merge(b, b.tokens, rng.next_u64() % (img / 2 + 1));
      }
      deltas.push_back(res.delta);
      b = res.batch;
    }
    const MergeMap m = flatten_provenance(patches, deltas);
    ASSERT_TRUE(m.is_partition());
    ASSERT_EQ(m.inputs(), patches);
    ASSERT_EQ(m.groups.size(), b.count() - 1);
    for (std::size_t g = 0; g < m.groups.size(); ++g) {
      ASSERT_EQ(static_cast<float>(m.groups[g].size()), b.sizes[g + 1]);
    }
  }
}

TEST(Render, IdentityMapLeavesImageUntouched) {
  const auto c = tiny();
  const RgbImage img = synthetic_image(8, 3);
  EXPECT_EQ(render_patch_map(img, MergeMap::identity(4), c), img);
}

TEST(Render, PrunedPatchesDarkened) {
  const auto c = tiny();
  const RgbImage img = gray(8, 201);
  const RgbImage out = render_patch_map(img, map_of({{2}}, {0, 1, 3}), c);
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      const bool kept = y >= 4 && x < 4;
      EXPECT_EQ(out.pixels[(y * 8 + x) * 3], kept ? 201 : 50) << y << "," << x;
    }
  }
}

TEST(Render, GroupsGetDistinctStableColours) {
  ModelConfig c = tiny();
  c.image_size = 12;
  const RgbImage img = gray(12, 100);
  // 3x3 grid: group A = patches {0, 1}, group B = {4, 8}.
  const MergeMap m = map_of({{0, 1}, {2}, {3}, {4, 8}, {5}, {6}, {7}});
  const RgbImage a = render_patch_map(img, m, c);
  EXPECT_EQ(a, render_patch_map(img, m, c));
  const auto& pal = group_palette();
  auto px = [&](std::size_t y, std::size_t x) {
    const auto* p = &a.pixels[(y * 12 + x) * 3];
    return std::array<std::uint8_t, 3>{p[0], p[1], p[2]};
  };
  EXPECT_EQ(px(0, 0), pal[0]);
  EXPECT_EQ(px(4, 4), pal[1]);
  EXPECT_NE(pal[0], pal[1]);
  // Shared edge between patches 0 and 1 is not outlined; the interior is tinted.
  EXPECT_EQ(px(1, 3)[0], static_cast<std::uint8_t>((100 + pal[0][0]) / 2));
  EXPECT_EQ(px(1, 4)[0], static_cast<std::uint8_t>((100 + pal[0][0]) / 2));
  // Untouched singleton.
  EXPECT_EQ(px(1, 9)[0], 100);
}

TEST(Render, RejectsMismatch) {
  const auto c = tiny();
  EXPECT_THROW(render_patch_map(gray(16, 0), MergeMap::identity(4), c), ImageError);
  EXPECT_THROW(render_patch_map(gray(8, 0), MergeMap::identity(5), c), std::invalid_argument);
}

TEST(Palette, ThirtyTwoDistinctColours) {
  const auto& pal = group_palette();
  ASSERT_EQ(pal.size(), 32u);
  const std::set<std::array<std::uint8_t, 3>> distinct(pal.begin(), pal.end());
  EXPECT_EQ(distinct.size(), 32u);
}

TEST(VarianceSeries, SingleAndMean) {
  TraceReport a, b;
  for (std::size_t l = 1; l <= 3; ++l) {
    LayerTrace t;
    t.layer = l;
    t.score_variance = 0.1 * static_cast<double>(l);
    a.layers.push_back(t);
    t.score_variance = 0.3 * static_cast<double>(l);
    b.layers.push_back(t);
  }
  b.layers[1].score_variance.reset();
  const auto one = variance_series({a});
  ASSERT_EQ(one.size(), 3u);
  EXPECT_DOUBLE_EQ(one[2].second, 0.1 * 3);
  const auto two = variance_series({a, b});
  EXPECT_DOUBLE_EQ(two[0].second, (0.1 + 0.3) / 2);
  EXPECT_DOUBLE_EQ(two[1].second, 0.2);
  EXPECT_THROW(variance_series({}), std::invalid_argument);
}

TEST(VarianceSeries, ConstantScoresGiveZeros) {
  const auto c = tiny();
  ModelWeights w = ModelWeights::zeros(c);
  for (auto& blk : w.blocks) {
    std::fill(blk.norm1.gamma.begin(), blk.norm1.gamma.end(), 1.0f);
    std::fill(blk.norm2.gamma.begin(), blk.norm2.gamma.end(), 1.0f);
    for (std::size_t i = 2 * c.dim; i < 3 * c.dim; ++i) blk.qkv.bias[i] = 1.0f;
  }
  std::fill(w.norm.gamma.begin(), w.norm.gamma.end(), 1.0f);
  ForwardOptions opts;
  opts.observe = true;
  const auto img = normalize_image(synthetic_image(8, 1), Normalization{});
  const auto series = variance_series({model_forward(img, w, c, {}, opts)});
  ASSERT_EQ(series.size(), 2u);
  for (const auto& [layer, v] : series) EXPECT_NEAR(v, 0.0, 1e-20);
}

TEST(VarianceSeries, Csv) {
  EXPECT_EQ(variance_series_csv({{1, 0.5}, {2, 1e-5}}), "layer,mean_variance\n1,0.5\n2,1e-05\n");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(7e-5), "7e-05");
}
