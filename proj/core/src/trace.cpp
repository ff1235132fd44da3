#include "ppt/trace.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <stdexcept>

#include "ppt/compress.hpp"
#include "ppt/error.hpp"

namespace ppt {

std::size_t TraceReport::top1() const {
  if (logits.empty()) return 0;
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

MergeMap flatten_provenance(std::size_t num_patches, const std::vector<MergeMap>& deltas) {
  MergeMap map = MergeMap::identity(num_patches);
  for (const MergeMap& delta : deltas) map = compose(map, delta);
  return map;
}

const std::vector<std::array<std::uint8_t, 3>>& group_palette() {
  static const std::vector<std::array<std::uint8_t, 3>> palette = {
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},   {245, 130, 48},  {145, 30, 180},
      {70, 240, 240},  {240, 50, 230},  {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195}, {128, 128, 0},   {255, 215, 180},
      {0, 0, 128},     {128, 128, 128}, {255, 255, 255}, {0, 0, 0},       {255, 99, 71},   {46, 139, 87},
      {65, 105, 225},  {218, 165, 32},  {199, 21, 133},  {0, 191, 255},   {154, 205, 50},  {255, 140, 0},
      {106, 90, 205},  {64, 224, 208}};
  return palette;
}

RgbImage render_patch_map(const RgbImage& image, const MergeMap& map, const ModelConfig& config) {
  if (image.width != config.image_size || image.height != config.image_size ||
      image.pixels.size() != image.width * image.height * 3) {
    throw ImageError("render_patch_map: image does not match the model configuration");
  }
  const std::size_t g = config.grid();
  const std::size_t p = config.patch_size;
  const std::size_t patches = config.num_patches();
  if (map.inputs() != patches || !map.is_partition()) {
    throw std::invalid_argument("render_patch_map: merge map is not a partition of the patch grid");
  }
  RgbImage out = image;
  auto px = [&](std::size_t y, std::size_t x) { return out.pixels.data() + (y * image.width + x) * 3; };

  for (const auto patch : map.pruned) {
    const std::size_t py = patch / g;
    const std::size_t qx = patch % g;
    for (std::size_t y = py * p; y < (py + 1) * p; ++y) {
      for (std::size_t x = qx * p; x < (qx + 1) * p; ++x) {
        std::uint8_t* v = px(y, x);
        for (int c = 0; c < 3; ++c) v[c] = static_cast<std::uint8_t>(v[c] / 4);
      }
    }
  }

  std::vector<const std::vector<std::uint32_t>*> merged;
  for (const auto& grp : map.groups) {
    if (grp.size() >= 2) merged.push_back(&grp);
  }
  std::sort(merged.begin(), merged.end(), [](const auto* a, const auto* b) {
    return *std::min_element(a->begin(), a->end()) < *std::min_element(b->begin(), b->end());
  });
  std::vector<std::ptrdiff_t> owner(patches, -1);
  for (std::size_t k = 0; k < merged.size(); ++k) {
    for (const auto patch : *merged[k]) owner[patch] = static_cast<std::ptrdiff_t>(k);
  }
  const auto& palette = group_palette();
  for (std::size_t patch = 0; patch < patches; ++patch) {
    if (owner[patch] < 0) continue;
    const auto& color = palette[static_cast<std::size_t>(owner[patch]) % palette.size()];
    const std::size_t py = patch / g;
    const std::size_t qx = patch % g;
    auto same = [&](std::ptrdiff_t ny, std::ptrdiff_t nx) {
      if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(g) || nx >= static_cast<std::ptrdiff_t>(g)) {
        return false;
      }
      return owner[static_cast<std::size_t>(ny) * g + static_cast<std::size_t>(nx)] == owner[patch];
    };
    const auto iy = static_cast<std::ptrdiff_t>(py);
    const auto ix = static_cast<std::ptrdiff_t>(qx);
    const bool open_top = same(iy - 1, ix);
    const bool open_bottom = same(iy + 1, ix);
    const bool open_left = same(iy, ix - 1);
    const bool open_right = same(iy, ix + 1);
    for (std::size_t dy = 0; dy < p; ++dy) {
      for (std::size_t dx = 0; dx < p; ++dx) {
        const bool border = (dy == 0 && !open_top) || (dy + 1 == p && !open_bottom) || (dx == 0 && !open_left) ||
                            (dx + 1 == p && !open_right);
        std::uint8_t* v = px(py * p + dy, qx * p + dx);
        for (int c = 0; c < 3; ++c) {
          v[c] = border ? color[c] : static_cast<std::uint8_t>((v[c] + color[c]) / 2);
        }
      }
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> variance_series(const std::vector<TraceReport>& reports) {
  if (reports.empty()) {
    throw std::invalid_argument("variance_series: empty corpus");
  }
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const TraceReport& report : reports) {
    for (const LayerTrace& layer : report.layers) {
      if (!layer.score_variance) continue;
      auto& [sum, count] = acc[layer.layer];
      sum += *layer.score_variance;
      ++count;
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& [layer, sc] : acc) {
    out.emplace_back(layer, sc.first / static_cast<double>(sc.second));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

std::string variance_series_csv(const std::vector<std::pair<std::size_t, double>>& series) {
  std::string out = "layer,mean_variance\n";
  for (const auto& [layer, value] : series) {
    out += std::to_string(layer) + "," + format_double(value) + "\n";
  }
  return out;
}

}  // namespace ppt
