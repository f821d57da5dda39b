#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "noisymix/errors.hpp"
#include "noisymix/tensor.hpp"

namespace noisymix {

/// Raster image with pixel values in [0,1], stored as channel planes
/// (index = c*h*w + y*w + x).
struct RasterImage {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<double> pixels;

  RasterImage() = default;
  RasterImage(std::size_t h, std::size_t w, std::size_t c)
      : height(h), width(w), channels(c), pixels(h * w * c, 0.0) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[c * height * width + y * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[c * height * width + y * width + x];
  }

  std::size_t plane() const { return height * width; }

  void clamp() {
    for (auto& v : pixels) v = std::min(1.0, std::max(0.0, v));
  }

  bool same_shape(const RasterImage& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Flatten to a (1, h*w*c) tensor row (plane order preserved).
inline Tensor to_row(const RasterImage& img) {
  return Tensor({1, img.pixels.size()}, img.pixels);
}

inline RasterImage from_row(const Tensor& row, std::size_t h, std::size_t w,
                            std::size_t c) {
  if (row.numel() != h * w * c)
    throw dimension_error("from_row: size does not match h*w*c");
  RasterImage img(h, w, c);
  img.pixels.assign(row.data.begin(), row.data.end());
  return img;
}

// ---------------------------------------------------------------------------
// PPM (P6, 8-bit). Grayscale images are replicated to RGB on write; reads
// always yield 3 channels.
// ---------------------------------------------------------------------------

inline void save_ppm(const RasterImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw format_error("save_ppm: cannot open " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = img.channels == 3 ? c : 0;
        const double v = std::min(1.0, std::max(0.0, img.at(src, y, x)));
        const auto byte = static_cast<unsigned char>(v * 255.0 + 0.5);
        f.put(static_cast<char>(byte));
      }
  if (!f) throw format_error("save_ppm: write failed for " + path);
}

inline RasterImage load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("load_ppm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw format_error("load_ppm: not a P6 file: " + path);
  auto next_int = [&]() {
    // skip whitespace and '#' comments
    int v = -1;
    while (f) {
      f >> std::ws;
      if (f.peek() == '#') {
        std::string line;
        std::getline(f, line);
        continue;
      }
      f >> v;
      break;
    }
    if (!f || v < 0) throw format_error("load_ppm: bad header in " + path);
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw format_error("load_ppm: only maxval 255 supported");
  f.get();  // single whitespace after maxval
  RasterImage img(static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3);
  std::vector<char> buf(static_cast<std::size_t>(w) * h * 3);
  f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw format_error("load_ppm: truncated pixel data in " + path);
  std::size_t k = 0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<unsigned char>(buf[k++]) / 255.0;
  return img;
}

// ---------------------------------------------------------------------------
// NMIX raw format: 16-byte header (magic "NMIX", u32 h, u32 w, u32 c, all
// little-endian), then c planes of h*w f64 values, little-endian.
// ---------------------------------------------------------------------------

inline void put_u32_le(std::ofstream& f, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) f.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(std::ifstream& f) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = f.get();
    if (c == EOF) throw format_error("nmix: truncated header");
    v |= static_cast<std::uint32_t>(c & 0xff) << (8 * i);
  }
  return v;
}

inline void save_nmix(const RasterImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw format_error("save_nmix: cannot open " + path);
  f.write("NMIX", 4);
  put_u32_le(f, static_cast<std::uint32_t>(img.height));
  put_u32_le(f, static_cast<std::uint32_t>(img.width));
  put_u32_le(f, static_cast<std::uint32_t>(img.channels));
  for (double v : img.pixels) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) f.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  if (!f) throw format_error("save_nmix: write failed for " + path);
}

inline RasterImage load_nmix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("load_nmix: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, "NMIX", 4) != 0)
    throw format_error("load_nmix: bad magic in " + path);
  const std::uint32_t h = get_u32_le(f), w = get_u32_le(f), c = get_u32_le(f);
  RasterImage img(h, w, c);
  for (auto& v : img.pixels) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      const int byte = f.get();
      if (byte == EOF) throw format_error("load_nmix: truncated data in " + path);
      bits |= static_cast<std::uint64_t>(byte & 0xff) << (8 * i);
    }
    std::memcpy(&v, &bits, 8);
  }
  return img;
}

}  // namespace noisymix
