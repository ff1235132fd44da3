#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

#include "ppt/error.hpp"
#include "ppt/io.hpp"

namespace ppt {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) throw ImageError("truncated PPM header");
    return out;
  }

  std::size_t number() {
    const std::string t = token();
    if (t.size() > 9 || t.find_first_not_of("0123456789") != std::string::npos) {
      throw ImageError("invalid number '" + t + "' in PPM header");
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ImageError("PPM header not terminated by whitespace");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  if (reader.token() != "P6") {
    throw ImageError("not a binary PPM (P6) file");
  }
  RgbImage img;
  img.width = reader.number();
  img.height = reader.number();
  const std::size_t maxval = reader.number();
  if (img.width == 0 || img.height == 0) {
    throw ImageError("PPM has zero width or height");
  }
  if (maxval != 255) {
    throw ImageError("only 8-bit PPM (maxval 255) is supported");
  }
  const std::size_t start = reader.raster_start();
  const std::size_t expected = img.width * img.height * 3;
  if (bytes.size() - start != expected) {
    throw ImageError("PPM raster has " + std::to_string(bytes.size() - start) + " bytes, expected " +
                     std::to_string(expected));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  if (image.pixels.size() != image.width * image.height * 3) {
    throw ImageError("encode_ppm: pixel buffer does not match dimensions");
  }
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ImageError(e.what());
  }
  return decode_ppm(bytes);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) { write_file(path, encode_ppm(image)); }

RgbImage synthetic_image(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img{size, size, std::vector<std::uint8_t>(size * size * 3)};
  constexpr std::size_t cell = 8;
  const std::size_t cells = (size + cell - 1) / cell;
  std::vector<std::uint8_t> colors(cells * cells * 3);
  for (auto& c : colors) c = static_cast<std::uint8_t>(rng.next_u64() >> 56);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const std::uint8_t* base = &colors[((y / cell) * cells + x / cell) * 3];
      for (std::size_t c = 0; c < 3; ++c) {
        const int noise = static_cast<int>(rng.next_u64() >> 60) - 8;
        img.pixels[(y * size + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(base[c] + noise, 0, 255));
      }
    }
  }
  return img;
}

Image normalize_image(const RgbImage& image, const Normalization& norm) {
  if (norm.mean.size() != 3 || norm.std.size() != 3) {
    throw ImageError("PPM images have 3 channels; normalization must list 3 means and 3 stds");
  }
  Image out{image.height, image.width, 3, std::vector<float>(image.pixels.size())};
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const std::size_t c = i % 3;
    out.data[i] = static_cast<float>((static_cast<double>(image.pixels[i]) / 255.0 - norm.mean[c]) / norm.std[c]);
  }
  return out;
}

}  // namespace ppt
