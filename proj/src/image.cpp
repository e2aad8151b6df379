#include "dashreport/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

#include "dashreport/error.hpp"

namespace dashreport {

Image resize_bilinear(const Image& src, int width, int height) {
  if (src.empty() || width <= 0 || height <= 0) {
    throw InvalidInputError("resize: zero-dimension image");
  }
  if (src.width == width && src.height == height) return src;

  Image dst(width, height);
  const double sx = double(src.width) / width;
  const double sy = double(src.height) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    const auto* r0 = src.row(y0);
    const auto* r1 = src.row(y1);
    auto* out = dst.row(y);
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = r0[x0 * 3 + c] * (1 - wx) + r0[x1 * 3 + c] * wx;
        double bot = r1[x0 * 3 + c] * (1 - wx) + r1[x1 * 3 + c] * wx;
        double v = top * (1 - wy) + bot * wy;
        out[x * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return dst;
}

Image stack_vertical(const Image& top, const Image& bottom) {
  if (top.width != bottom.width) {
    throw InvalidInputError("stack_vertical: widths differ (" +
                            std::to_string(top.width) + " vs " +
                            std::to_string(bottom.width) + ")");
  }
  Image out(top.width, top.height + bottom.height);
  std::copy(top.pixels.begin(), top.pixels.end(), out.pixels.begin());
  std::copy(bottom.pixels.begin(), bottom.pixels.end(),
            out.pixels.begin() + static_cast<std::ptrdiff_t>(top.pixels.size()));
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw IoError(std::string("png decode: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("png decode: " + msg);
  }
  return out;
}

Image read_png_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.empty()) throw InvalidInputError("png encode: empty image");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(),
                                 0, nullptr)) {
    throw IoError(std::string("png encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0,
                                 image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

namespace {

void skip_ppm_space(std::span<const std::uint8_t> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
}

long read_ppm_int(std::span<const std::uint8_t> b, std::size_t& pos) {
  skip_ppm_space(b, pos);
  long v = 0;
  std::size_t start = pos;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (1L << 30)) throw IoError("ppm: header value too large");
    ++pos;
  }
  if (pos == start) throw IoError("ppm: malformed header");
  return v;
}

}  // namespace

Image read_ppm(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  std::size_t pos = offset;
  if (pos + 2 > bytes.size() || bytes[pos] != 'P' || bytes[pos + 1] != '6') {
    throw IoError("ppm: missing P6 magic at offset " + std::to_string(offset));
  }
  pos += 2;
  long w = read_ppm_int(bytes, pos);
  long h = read_ppm_int(bytes, pos);
  long maxval = read_ppm_int(bytes, pos);
  if (maxval != 255) throw IoError("ppm: only maxval 255 supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw IoError("ppm: malformed header");
  }
  ++pos;
  Image img(static_cast<int>(w), static_cast<int>(h));
  if (pos + img.pixels.size() > bytes.size()) {
    throw IoError("ppm: truncated pixel data");
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
              img.pixels.size(), img.pixels.begin());
  offset = pos + img.pixels.size();
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  std::string header = "P6\n" + std::to_string(image.width) + " " +
                       std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i + 1 == bytes.size()) {
    std::uint32_t n = bytes[i] << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

}  // namespace dashreport
