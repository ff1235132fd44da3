#include "ppt/vit.hpp"

#include <cmath>
#include <stdexcept>

#include "ppt/error.hpp"

namespace ppt {

namespace {

using Shape = std::vector<std::size_t>;

std::string block_prefix(std::size_t i) { return "blocks." + std::to_string(i) + "."; }

TensorRef ref(std::string name, Matrix& m) {
  return {std::move(name), {m.rows(), m.cols()}, m.data()};
}

TensorRef ref(std::string name, std::vector<float>& v) {
  return {std::move(name), {v.size()}, v};
}

Linear zero_linear(std::size_t in, std::size_t out) { return {Matrix(in, out), std::vector<float>(out, 0.0f)}; }

LayerNormParams zero_norm(std::size_t d) { return {std::vector<float>(d, 0.0f), std::vector<float>(d, 0.0f)}; }

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void add_inplace(Matrix& x, const Matrix& delta) {
  auto xs = x.data();
  const auto ds = delta.data();
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += ds[i];
}

}  // namespace

std::vector<TensorRef> ModelWeights::tensors() {
  std::vector<TensorRef> out;
  out.push_back(ref("patch_embed.proj.weight", patch_embed.weight));
  out.push_back(ref("patch_embed.proj.bias", patch_embed.bias));
  out.push_back(ref("cls_token", cls_token));
  out.push_back(ref("pos_embed", pos_embed));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = block_prefix(i);
    BlockWeights& b = blocks[i];
    out.push_back(ref(p + "norm1.weight", b.norm1.gamma));
    out.push_back(ref(p + "norm1.bias", b.norm1.beta));
    out.push_back(ref(p + "attn.qkv.weight", b.qkv.weight));
    out.push_back(ref(p + "attn.qkv.bias", b.qkv.bias));
    out.push_back(ref(p + "attn.proj.weight", b.proj.weight));
    out.push_back(ref(p + "attn.proj.bias", b.proj.bias));
    out.push_back(ref(p + "norm2.weight", b.norm2.gamma));
    out.push_back(ref(p + "norm2.bias", b.norm2.beta));
    out.push_back(ref(p + "mlp.fc1.weight", b.fc1.weight));
    out.push_back(ref(p + "mlp.fc1.bias", b.fc1.bias));
    out.push_back(ref(p + "mlp.fc2.weight", b.fc2.weight));
    out.push_back(ref(p + "mlp.fc2.bias", b.fc2.bias));
  }
  out.push_back(ref("norm.weight", norm.gamma));
  out.push_back(ref("norm.bias", norm.beta));
  out.push_back(ref("head.weight", head.weight));
  out.push_back(ref("head.bias", head.bias));
  return out;
}

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  ModelWeights w;
  w.patch_embed = zero_linear(config.patch_vector(), d);
  w.cls_token = Matrix(1, d);
  w.pos_embed = Matrix(config.num_tokens(), d);
  w.blocks.resize(config.depth);
  for (BlockWeights& b : w.blocks) {
    b.norm1 = zero_norm(d);
    b.qkv = zero_linear(d, 3 * d);
    b.proj = zero_linear(d, d);
    b.norm2 = zero_norm(d);
    b.fc1 = zero_linear(d, config.hidden_dim());
    b.fc2 = zero_linear(config.hidden_dim(), d);
  }
  w.norm = zero_norm(d);
  w.head = zero_linear(d, config.num_classes);
  return w;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> tensor_layout(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  const std::size_t hid = config.hidden_dim();
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("patch_embed.proj.weight", Shape{config.patch_vector(), d});
  out.emplace_back("patch_embed.proj.bias", Shape{d});
  out.emplace_back("cls_token", Shape{1, d});
  out.emplace_back("pos_embed", Shape{config.num_tokens(), d});
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string p = block_prefix(i);
    out.emplace_back(p + "norm1.weight", Shape{d});
    out.emplace_back(p + "norm1.bias", Shape{d});
    out.emplace_back(p + "attn.qkv.weight", Shape{d, 3 * d});
    out.emplace_back(p + "attn.qkv.bias", Shape{3 * d});
    out.emplace_back(p + "attn.proj.weight", Shape{d, d});
    out.emplace_back(p + "attn.proj.bias", Shape{d});
    out.emplace_back(p + "norm2.weight", Shape{d});
    out.emplace_back(p + "norm2.bias", Shape{d});
    out.emplace_back(p + "mlp.fc1.weight", Shape{d, hid});
    out.emplace_back(p + "mlp.fc1.bias", Shape{hid});
    out.emplace_back(p + "mlp.fc2.weight", Shape{hid, d});
    out.emplace_back(p + "mlp.fc2.bias", Shape{d});
  }
  out.emplace_back("norm.weight", Shape{d});
  out.emplace_back("norm.bias", Shape{d});
  out.emplace_back("head.weight", Shape{d, config.num_classes});
  out.emplace_back("head.bias", Shape{config.num_classes});
  return out;
}

void validate_weights(const ModelWeights& weights, const ModelConfig& config) {
  const auto expected = tensor_layout(config);
  // tensors() only hands out views; the const_cast never writes.
  auto actual = const_cast<ModelWeights&>(weights).tensors();
  if (actual.size() != expected.size()) {
    throw WeightsError("weights have " + std::to_string(weights.blocks.size()) + " blocks, config depth is " +
                       std::to_string(config.depth));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, shape] = expected[i];
    std::size_t count = 1;
    for (const auto s : shape) count *= s;
    if (actual[i].shape != shape || actual[i].values.size() != count) {
      throw WeightsError("tensor '" + name + "' has the wrong shape for this config");
    }
  }
}

ModelWeights synthetic_weights(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w = ModelWeights::zeros(config);
  Rng rng(seed);
  for (TensorRef& t : w.tensors()) {
    const bool is_norm_gain = ends_with(t.name, "norm1.weight") || ends_with(t.name, "norm2.weight") ||
                              t.name == "norm.weight";
    if (is_norm_gain) {
      std::fill(t.values.begin(), t.values.end(), 1.0f);
    } else if (ends_with(t.name, ".bias")) {
      continue;
    } else {
      for (float& v : t.values) v = static_cast<float>(0.02 * rng.normal());
    }
  }
  return w;
}

TokenBatch patch_embed(const Image& image, const ModelWeights& weights, const ModelConfig& config) {
  if (image.height != config.image_size || image.width != config.image_size || image.channels != config.channels) {
    throw ImageError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) + "x" +
                     std::to_string(image.channels) + ", model expects " + std::to_string(config.image_size) + "x" +
                     std::to_string(config.image_size) + "x" + std::to_string(config.channels));
  }
  if (image.data.size() != image.height * image.width * image.channels) {
    throw ImageError("image buffer size does not match its dimensions");
  }
  config.validate();
  const std::size_t p = config.patch_size;
  const std::size_t g = config.grid();
  Matrix patches(config.num_patches(), config.patch_vector());
  for (std::size_t py = 0; py < g; ++py) {
    for (std::size_t px = 0; px < g; ++px) {
      auto row = patches.row(py * g + px);
      std::size_t k = 0;
      for (std::size_t c = 0; c < config.channels; ++c) {
        for (std::size_t dy = 0; dy < p; ++dy) {
          for (std::size_t dx = 0; dx < p; ++dx) {
            row[k++] = image.at(py * p + dy, px * p + dx, c);
          }
        }
      }
    }
  }
  const Matrix projected = affine(patches, weights.patch_embed.weight, weights.patch_embed.bias);
  TokenBatch batch{Matrix(config.num_tokens(), config.dim), SizeVector(config.num_tokens(), 1.0f)};
  for (std::size_t c = 0; c < config.dim; ++c) {
    batch.tokens(0, c) = weights.cls_token(0, c) + weights.pos_embed(0, c);
  }
  for (std::size_t i = 0; i < config.num_patches(); ++i) {
    for (std::size_t c = 0; c < config.dim; ++c) {
      batch.tokens(i + 1, c) = projected(i, c) + weights.pos_embed(i + 1, c);
    }
  }
  return batch;
}

AttentionResult attention_forward(const Matrix& x, std::span<const float> sizes, const BlockWeights& weights,
                                  std::size_t heads, const AttentionOptions& options) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (sizes.size() != n) {
    throw std::invalid_argument("attention_forward: sizes length differs from token count");
  }
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("attention_forward: dim not divisible by heads");
  }
  const std::size_t dh = d / heads;
  const Matrix qkv = affine(x, weights.qkv.weight, weights.qkv.bias);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionResult result;
  result.byproducts.cls_attention.resize(heads);
  result.byproducts.value_norms.resize(heads);
  result.byproducts.keys.reserve(heads);
  Matrix mixed(n, d);
  Matrix q(n, dh), k(n, dh), v(n, dh);
  std::vector<float> logits(n);
  std::vector<double> acc(dh);

  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = qkv.row(i);
      for (std::size_t c = 0; c < dh; ++c) {
        q(i, c) = row[h * dh + c];
        k(i, c) = row[d + h * dh + c];
        v(i, c) = row[2 * d + h * dh + c];
      }
    }
    auto& norms = result.byproducts.value_norms[h];
    norms.resize(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = static_cast<float>(l2_norm(v.row(j)));

    for (std::size_t i = 0; i < n; ++i) {
      const auto qi = q.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto kj = k.row(j);
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += static_cast<double>(qi[c]) * static_cast<double>(kj[c]);
        logits[j] = static_cast<float>(dot * scale);
      }
      const auto probs = options.size_bias ? softmax_size_biased(logits, sizes) : row_softmax(logits);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const double pj = probs[j];
        const auto vj = v.row(j);
        for (std::size_t c = 0; c < dh; ++c) acc[c] += pj * static_cast<double>(vj[c]);
      }
      for (std::size_t c = 0; c < dh; ++c) mixed(i, h * dh + c) = static_cast<float>(acc[c]);
      if (i == 0) result.byproducts.cls_attention[h] = probs;
    }
    result.byproducts.keys.push_back(k);
  }
  result.output = affine(mixed, weights.proj.weight, weights.proj.bias);
  if (!all_finite(result.output.data())) {
    throw NumericError("attention_forward: non-finite activation (corrupt weights?)");
  }
  return result;
}

BlockResult block_forward(TokenBatch batch, const BlockWeights& weights, const ModelConfig& config,
                          std::size_t layer, const Compressor* compressor, const AttentionOptions& options) {
  batch.check();
  BlockResult out;
  out.trace.layer = layer;
  out.trace.tokens_in = batch.count();

  const Matrix normed = layernorm(batch.tokens, weights.norm1.gamma, weights.norm1.beta);
  AttentionResult attn = attention_forward(normed, batch.sizes, weights, config.heads, options);
  add_inplace(batch.tokens, attn.output);

  if (compressor != nullptr && *compressor) {
    batch = (*compressor)(batch, attn.byproducts, out.trace);
    batch.check();
  }
  out.trace.tokens_out = batch.count();
  out.trace.r = out.trace.tokens_in - out.trace.tokens_out;

  Matrix hidden = affine(layernorm(batch.tokens, weights.norm2.gamma, weights.norm2.beta), weights.fc1.weight,
                         weights.fc1.bias);
  gelu_inplace(hidden);
  const Matrix ffn = affine(hidden, weights.fc2.weight, weights.fc2.bias);
  add_inplace(batch.tokens, ffn);
  if (!all_finite(batch.tokens.data())) {
    throw NumericError("block_forward: non-finite activation at layer " + std::to_string(layer));
  }
  out.batch = std::move(batch);
  return out;
}

std::vector<float> classify(const TokenBatch& batch, const ModelWeights& weights) {
  Matrix cls(1, batch.tokens.cols());
  std::copy(batch.tokens.row(0).begin(), batch.tokens.row(0).end(), cls.row(0).begin());
  const Matrix normed = layernorm(cls, weights.norm.gamma, weights.norm.beta);
  const Matrix logits = affine(normed, weights.head.weight, weights.head.bias);
  return {logits.data().begin(), logits.data().end()};
}

}  // namespace ppt
