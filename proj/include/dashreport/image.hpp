#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dashreport {

// 8-bit interleaved RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t* row(int y) { return pixels.data() + std::size_t(y) * width * 3; }
  const std::uint8_t* row(int y) const {
    return pixels.data() + std::size_t(y) * width * 3;
  }

  bool operator==(const Image&) const = default;
};

// Bilinear resampling with pixel-centre alignment. Returns a copy when the
// size already matches.
Image resize_bilinear(const Image& src, int width, int height);

// `top` above `bottom`; widths must agree.
Image stack_vertical(const Image& top, const Image& bottom);

// Any PNG colour type / bit depth, converted to RGB8.
Image decode_png(std::span<const std::uint8_t> bytes);
Image read_png_file(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Image& image);

// Binary PPM (P6, maxval 255). `offset` advances past the consumed image.
Image read_ppm(std::span<const std::uint8_t> bytes, std::size_t& offset);
std::vector<std::uint8_t> encode_ppm(const Image& image);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace dashreport
