#include "ppt/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace ppt::oracle {

MergeOutcome brute_force_bsm(const TokenBatch& batch, const std::vector<Matrix>& head_keys, std::size_t r) {
  const std::size_t n = batch.count();
  const std::size_t img = n - 1;
  const std::size_t dims = head_keys.front().cols();

  // Head-averaged keys of the image tokens.
  std::vector<std::vector<float>> key(img, std::vector<float>(dims));
  for (std::size_t i = 0; i < img; ++i) {
    for (std::size_t c = 0; c < dims; ++c) {
      double s = 0.0;
      for (const Matrix& k : head_keys) s += k(i + 1, c);
      key[i][c] = static_cast<float>(s / static_cast<double>(head_keys.size()));
    }
  }

  // Every (similarity, source, destination) triple.
  using Triple = std::tuple<double, std::size_t, std::size_t>;
  std::map<std::size_t, std::vector<Triple>> per_source;
  for (std::size_t s = 0; s < img; ++s) {
    if (s % 2 == 0) continue;
    for (std::size_t d = 0; d < img; ++d) {
      if (d % 2 == 1) continue;
      per_source[s].emplace_back(cosine_similarity(key[s], key[d]), s, d);
    }
  }
  std::vector<Triple> best;
  for (auto& [s, cands] : per_source) {
    std::sort(cands.begin(), cands.end(), [](const Triple& a, const Triple& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      return std::get<2>(a) < std::get<2>(b);
    });
    best.push_back(cands.front());
  }
  std::sort(best.begin(), best.end(), [](const Triple& a, const Triple& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  });

  std::map<std::size_t, std::vector<std::uint32_t>> absorbed;
  std::vector<bool> gone(img, false);
  for (std::size_t e = 0; e < r; ++e) {
    const auto [sim, s, d] = best[e];
    gone[s] = true;
    absorbed[d].push_back(static_cast<std::uint32_t>(s));
  }

  MergeOutcome out;
  std::vector<std::vector<float>> rows;
  rows.emplace_back(batch.tokens.row(0).begin(), batch.tokens.row(0).end());
  out.sizes.push_back(batch.sizes[0]);
  for (std::size_t t = 0; t < img; ++t) {
    if (gone[t]) continue;
    std::vector<std::uint32_t> members{static_cast<std::uint32_t>(t)};
    for (const auto s : absorbed[t]) members.push_back(s);
    std::sort(members.begin(), members.end());
    double weight = 0.0;
    std::vector<double> sum(batch.tokens.cols(), 0.0);
    for (const auto m : members) {
      const double w = batch.sizes[m + 1];
      weight += w;
      for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += w * batch.tokens(m + 1, c);
    }
    std::vector<float> row(sum.size());
    for (std::size_t c = 0; c < sum.size(); ++c) row[c] = static_cast<float>(sum[c] / weight);
    rows.push_back(std::move(row));
    out.sizes.push_back(static_cast<float>(weight));
    out.delta.groups.push_back(std::move(members));
  }
  out.tokens = Matrix(rows.size(), batch.tokens.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), out.tokens.row(i).begin());
  return out;
}

std::vector<std::uint32_t> topk_kept(const std::vector<double>& scores, std::size_t r) {
  std::vector<std::pair<double, std::uint32_t>> ranked;
  for (std::uint32_t i = 0; i < scores.size(); ++i) ranked.emplace_back(scores[i], i);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::uint32_t> kept;
  for (std::size_t i = 0; i + r < scores.size(); ++i) kept.push_back(ranked[i].second);
  std::sort(kept.begin(), kept.end());
  return kept;
}

Expanded expand_by_size(const Matrix& tokens, const SizeVector& sizes) {
  Expanded e;
  std::size_t total = 0;
  for (const float s : sizes) total += static_cast<std::size_t>(s);
  e.tokens = Matrix(total, tokens.cols());
  e.sizes.assign(total, 1.0f);
  std::size_t k = 0;
  for (std::size_t i = 0; i < tokens.rows(); ++i) {
    e.first_copy.push_back(k);
    for (std::size_t copy = 0; copy < static_cast<std::size_t>(sizes[i]); ++copy, ++k) {
      std::copy(tokens.row(i).begin(), tokens.row(i).end(), e.tokens.row(k).begin());
    }
  }
  return e;
}

Matrix reference_attention(const Matrix& x, const SizeVector& sizes, const BlockWeights& w, std::size_t heads) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t dh = d / heads;
  std::vector<std::vector<double>> qkv(n, std::vector<double>(3 * d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < 3 * d; ++o) {
      double s = w.qkv.bias[o];
      for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(x(i, c)) * w.qkv.weight(c, o);
      qkv[i][o] = s;
    }
  }
  std::vector<std::vector<double>> mixed(n, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logit(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qkv[i][h * dh + c] * qkv[j][d + h * dh + c];
        logit[j] = s / std::sqrt(static_cast<double>(dh)) + std::log(static_cast<double>(sizes[j]));
      }
      const double m = *std::max_element(logit.begin(), logit.end());
      double z = 0.0;
      for (double& l : logit) z += (l = std::exp(l - m));
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < dh; ++c) mixed[i][h * dh + c] += logit[j] / z * qkv[j][2 * d + h * dh + c];
      }
    }
  }
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < d; ++o) {
      double s = w.proj.bias[o];
      for (std::size_t c = 0; c < d; ++c) s += mixed[i][c] * w.proj.weight(c, o);
      out(i, o) = static_cast<float>(s);
    }
  }
  return out;
}

BlockWeights random_block(std::size_t dim, std::size_t hidden, double stddev, Rng& rng) {
  auto fill = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (float& v : m.data()) v = static_cast<float>(stddev * rng.normal());
    return m;
  };
  auto vec = [&](std::size_t len) {
    std::vector<float> v(len);
    for (float& x : v) x = static_cast<float>(stddev * rng.normal());
    return v;
  };
  BlockWeights b;
  b.norm1 = {std::vector<float>(dim, 1.0f), std::vector<float>(dim, 0.0f)};
  b.qkv = {fill(dim, 3 * dim), vec(3 * dim)};
  b.proj = {fill(dim, dim), vec(dim)};
  b.norm2 = {std::vector<float>(dim, 1.0f), std::vector<float>(dim, 0.0f)};
  b.fc1 = {fill(dim, hidden), vec(hidden)};
  b.fc2 = {fill(hidden, dim), vec(dim)};
  return b;
}

}  // namespace ppt::oracle
