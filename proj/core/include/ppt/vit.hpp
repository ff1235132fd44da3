#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ppt/numeric.hpp"
#include "ppt/types.hpp"

namespace ppt {

/// y = x W + b with W stored (in x out).
struct Linear {
  Matrix weight;
  std::vector<float> bias;
};

struct LayerNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
};

struct BlockWeights {
  LayerNormParams norm1;
  Linear qkv;   // d x 3d, output columns [q | k | v], heads contiguous inside each
  Linear proj;  // d x d
  LayerNormParams norm2;
  Linear fc1;   // d x hidden
  Linear fc2;   // hidden x d
};

/// View of one named tensor inside ModelWeights.
struct TensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<float> values;
};

struct ModelWeights {
  Linear patch_embed;  // (C*P*P) x d, input ordered (channel, dy, dx)
  Matrix cls_token;    // 1 x d
  Matrix pos_embed;    // N0 x d
  std::vector<BlockWeights> blocks;
  LayerNormParams norm;
  Linear head;  // d x num_classes

  /// Canonical tensor list (names, shapes and storage) in file order.
  std::vector<TensorRef> tensors();

  /// Zero-filled weights with every shape derived from `config`.
  static ModelWeights zeros(const ModelConfig& config);
};

/// Names and shapes every weight set for `config` must contain, in order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> tensor_layout(const ModelConfig& config);

/// Throws WeightsError if any tensor shape disagrees with `config`.
void validate_weights(const ModelWeights& weights, const ModelConfig& config);

/// Gaussian(0, 0.02) matrices, unit LayerNorm gains, zero biases. Tensors are
/// drawn in tensor_layout() order from a single Rng(seed).
ModelWeights synthetic_weights(const ModelConfig& config, std::uint64_t seed);

/// Patchify, project, prepend CLS and add positional embeddings. Sizes are 1.
TokenBatch patch_embed(const Image& image, const ModelWeights& weights, const ModelConfig& config);

struct AttentionOptions {
  /// Add log(size) to every logit. With all sizes 1 this is a no-op.
  bool size_bias = true;
};

struct AttentionResult {
  Matrix output;  // projected MSA output, no residual
  AttentionByproducts byproducts;
};

/// Multi-head self-attention on already-normalized input `x`.
AttentionResult attention_forward(const Matrix& x, std::span<const float> sizes, const BlockWeights& weights,
                                  std::size_t heads, const AttentionOptions& options = {});

/// Compression hook run between the MSA residual and the FFN. Receives the
/// post-residual batch and the byproducts of the same MSA evaluation; fills
/// the compression fields of the trace.
using Compressor = std::function<TokenBatch(const TokenBatch&, const AttentionByproducts&, LayerTrace&)>;

struct BlockResult {
  TokenBatch batch;
  LayerTrace trace;
};

/// x += MSA(LN1(x)); [compress]; x += FFN(LN2(x)).
BlockResult block_forward(TokenBatch batch, const BlockWeights& weights, const ModelConfig& config,
                          std::size_t layer, const Compressor* compressor = nullptr,
                          const AttentionOptions& options = {});

/// Final LayerNorm and head applied to the CLS row.
std::vector<float> classify(const TokenBatch& batch, const ModelWeights& weights);

}  // namespace ppt
