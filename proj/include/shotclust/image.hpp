#pragma once

// Image decoding (binary/ASCII Netpbm always, PNG when built with libpng)
// and grayscale preprocessing.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#ifdef SHOTCLUST_WITH_PNG
#include <png.h>
#endif

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

// Interleaved samples, `channels` per pixel (1 gray, 2 gray+alpha, 3 RGB,
// 4 RGBA), each in [0, max_value].
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::uint32_t max_value = 255;
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int y, int x, int c) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

struct GrayImage {
  Matrix pixels;  // luminance in [0, 1]

  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index width() const { return pixels.cols(); }
};

namespace detail {

inline bool is_png(const std::vector<unsigned char>& bytes) {
  static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

class PnmReader {
 public:
  explicit PnmReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  RawImage read() {
    require(bytes_.size() >= 2 && bytes_[0] == 'P', ErrorCode::parse_error,
            "not a Netpbm image");
    const char kind = static_cast<char>(bytes_[1]);
    pos_ = 2;
    RawImage img;
    switch (kind) {
      case '2': case '5': img.channels = 1; break;
      case '3': case '6': img.channels = 3; break;
      default: fail(ErrorCode::parse_error, std::string("unsupported Netpbm kind P") + kind);
    }
    img.width = static_cast<int>(number());
    img.height = static_cast<int>(number());
    img.max_value = static_cast<std::uint32_t>(number());
    require(img.width > 0 && img.height > 0, ErrorCode::invalid_argument,
            "image has zero dimension");
    require(img.max_value >= 1 && img.max_value <= 65535, ErrorCode::parse_error,
            "bad Netpbm maxval");
    const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.samples.resize(count);
    if (kind == '2' || kind == '3') {
      for (auto& s : img.samples) s = checked(number(), img.max_value);
    } else {
      ++pos_;  // single whitespace after maxval
      const std::size_t bytes_per = img.max_value > 255 ? 2 : 1;
      require(bytes_.size() >= pos_ + count * bytes_per, ErrorCode::parse_error,
              "truncated Netpbm raster");
      for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t v = bytes_[pos_++];
        if (bytes_per == 2) v = (v << 8) | bytes_[pos_++];
        img.samples[i] = checked(v, img.max_value);
      }
    }
    return img;
  }

 private:
  static std::uint16_t checked(std::uint64_t v, std::uint32_t max_value) {
    require(v <= max_value, ErrorCode::parse_error, "Netpbm sample exceeds maxval");
    return static_cast<std::uint16_t>(v);
  }

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

  std::uint64_t number() {
    skip_space_and_comments();
    require(pos_ < bytes_.size() && std::isdigit(bytes_[pos_]), ErrorCode::parse_error,
            "malformed Netpbm header");
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      require(v < (1ULL << 32), ErrorCode::parse_error, "Netpbm number overflow");
    }
    return v;
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

#ifdef SHOTCLUST_WITH_PNG
inline RawImage decode_png(const std::vector<unsigned char>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorCode::parse_error, std::string("undecodable PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RawImage img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.channels = 3;
  if (img.width <= 0 || img.height <= 0) {
    png_image_free(&image);
    fail(ErrorCode::invalid_argument, "image has zero dimension");
  }
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    fail(ErrorCode::parse_error, "undecodable PNG: " + message);
  }
  img.samples.assign(buffer.begin(), buffer.end());
  return img;
}
#endif

}  // namespace detail

inline RawImage decode_image(const std::vector<unsigned char>& bytes) {
  require(!bytes.empty(), ErrorCode::parse_error, "empty image data");
  if (detail::is_png(bytes)) {
#ifdef SHOTCLUST_WITH_PNG
    return detail::decode_png(bytes);
#else
    fail(ErrorCode::parse_error, "PNG support not compiled in");
#endif
  }
  return detail::PnmReader(bytes).read();
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RawImage load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// Binary PGM (1 channel) or PPM (3 channels) writer, 8-bit samples.
inline void save_pnm(const std::filesystem::path& path, const RawImage& img) {
  require(img.channels == 1 || img.channels == 3, ErrorCode::invalid_argument,
          "PNM writer needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << '\n'
      << img.width << ' ' << img.height << '\n'
      << 255 << '\n';
  for (auto s : img.samples) {
    const auto v = img.max_value == 255 ? s : (s * 255u + img.max_value / 2) / img.max_value;
    out.put(static_cast<char>(v));
  }
}

// Luminance 0.299R + 0.587G + 0.114B, computed in integer arithmetic so
// extreme inputs map exactly to 0 and 1. Alpha is ignored.
inline GrayImage to_gray(const RawImage& img) {
  require(img.width > 0 && img.height > 0, ErrorCode::invalid_argument,
          "image has zero dimension");
  require(img.channels >= 1 && img.channels <= 4, ErrorCode::invalid_argument,
          "unsupported channel count");
  GrayImage gray;
  gray.pixels.resize(img.height, img.width);
  const double scale = 1.0 / (1000.0 * img.max_value);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::uint64_t weighted;
      if (img.channels >= 3) {
        weighted = 299u * img.at(y, x, 0) + 587u * img.at(y, x, 1) + 114u * img.at(y, x, 2);
      } else {
        weighted = 1000u * img.at(y, x, 0);
      }
      gray.pixels(y, x) = std::clamp(static_cast<double>(weighted) * scale, 0.0, 1.0);
    }
  }
  return gray;
}

// Bilinear resampling with pixel-centre alignment and edge clamping.
inline GrayImage resize_bilinear(const GrayImage& src, Eigen::Index out_h, Eigen::Index out_w) {
  require(out_h > 0 && out_w > 0, ErrorCode::invalid_argument, "target size must be positive");
  const auto in_h = src.height();
  const auto in_w = src.width();
  GrayImage dst;
  dst.pixels.resize(out_h, out_w);
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);

  struct Tap {
    Eigen::Index lo, hi;
    double t;
  };
  auto taps = [](Eigen::Index n_out, Eigen::Index n_in, double scale) {
    std::vector<Tap> out(static_cast<std::size_t>(n_out));
    for (Eigen::Index i = 0; i < n_out; ++i) {
      double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
      pos = std::clamp(pos, 0.0, static_cast<double>(n_in - 1));
      const auto lo = static_cast<Eigen::Index>(std::floor(pos));
      const auto hi = std::min(lo + 1, n_in - 1);
      out[static_cast<std::size_t>(i)] = {lo, hi, pos - static_cast<double>(lo)};
    }
    return out;
  };
  const auto ty = taps(out_h, in_h, sy);
  const auto tx = taps(out_w, in_w, sx);

  for (Eigen::Index y = 0; y < out_h; ++y) {
    const auto& a = ty[static_cast<std::size_t>(y)];
    for (Eigen::Index x = 0; x < out_w; ++x) {
      const auto& b = tx[static_cast<std::size_t>(x)];
      const double p00 = src.pixels(a.lo, b.lo), p01 = src.pixels(a.lo, b.hi);
      const double p10 = src.pixels(a.hi, b.lo), p11 = src.pixels(a.hi, b.hi);
      // v0 + t*(v1 - v0) keeps constant regions exactly constant.
      const double top = p00 + b.t * (p01 - p00);
      const double bottom = p10 + b.t * (p11 - p10);
      dst.pixels(y, x) = std::clamp(top + a.t * (bottom - top), 0.0, 1.0);
    }
  }
  return dst;
}

struct PreprocessConfig {
  Eigen::Index normalized_width = 1280;
  Eigen::Index normalized_height = 720;
  Eigen::Index output_side = 256;
};

// Grayscale, normalise every screenshot to a common canvas, then shrink to
// the square working resolution.
inline GrayImage preprocess_image(const RawImage& raw, const PreprocessConfig& cfg = {}) {
  const GrayImage gray = to_gray(raw);
  const GrayImage canvas = resize_bilinear(gray, cfg.normalized_height, cfg.normalized_width);
  return resize_bilinear(canvas, cfg.output_side, cfg.output_side);
}

}  // namespace shotclust
