#pragma once

// Reference implementations used only to check the production kernels.
// They are written for clarity, share no selection or merge logic with
// core/, and may be arbitrarily slow.

#include <cstdint>
#include <string>
#include <vector>

#include "ppt/numeric.hpp"
#include "ppt/types.hpp"
#include "ppt/vit.hpp"

namespace ppt::oracle {

struct MergeOutcome {
  MergeMap delta;
  Matrix tokens;
  SizeVector sizes;
};

/// Enumerate every source->destination similarity, pick each source's best
/// destination, sort all edges globally and replay the r strongest merges.
MergeOutcome brute_force_bsm(const TokenBatch& batch, const std::vector<Matrix>& head_keys, std::size_t r);

/// Image-token indices (0-based, ascending) a sort-based Top-K keeps.
std::vector<std::uint32_t> topk_kept(const std::vector<double>& scores, std::size_t r);

/// Replace every token of size m by m size-1 copies.
struct Expanded {
  Matrix tokens;
  SizeVector sizes;
  std::vector<std::size_t> first_copy;  // expanded row of each original row
};
Expanded expand_by_size(const Matrix& tokens, const SizeVector& sizes);

/// Plain scalar MSA in double, straight from the definition
/// softmax(QK^T/sqrt(dh) + log s) V, then the output projection.
Matrix reference_attention(const Matrix& x, const SizeVector& sizes, const BlockWeights& weights, std::size_t heads);

/// Random block weights with the given spread (QKV, projection only).
BlockWeights random_block(std::size_t dim, std::size_t hidden, double stddev, Rng& rng);

}  // namespace ppt::oracle
