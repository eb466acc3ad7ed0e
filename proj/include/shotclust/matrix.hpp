#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "shotclust/error.hpp"

namespace shotclust {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Where in the pipeline a matrix came from. Stored in file headers.
enum class Stage : std::uint32_t {
  raw = 0,
  hog = 1,
  text = 2,
  joint = 3,
  reduced = 4,
  augmented = 5,
  standardized = 6,
};

inline std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::raw: return "raw";
    case Stage::hog: return "hog";
    case Stage::text: return "text";
    case Stage::joint: return "joint";
    case Stage::reduced: return "reduced";
    case Stage::augmented: return "augmented";
    case Stage::standardized: return "standardized";
  }
  return "unknown";
}

// Per-item feature rows, row-major, tagged with their provenance.
struct FeatureMatrix {
  Matrix values;
  Stage stage = Stage::raw;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

namespace io {

inline constexpr std::array<char, 4> kMatrixMagic = {'S', 'C', 'F', 'M'};
inline constexpr std::array<char, 4> kBundleMagic = {'S', 'C', 'P', 'C'};
inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    fail(ErrorCode::parse_error, "truncated matrix file");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void expect_magic(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  if (!in.read(got.data(), 4) || got != magic) {
    fail(ErrorCode::parse_error, "bad magic: expected " + std::string(magic.data(), 4));
  }
}

}  // namespace detail

// Matrix block: magic, version, stage, reserved, rows (u64), cols (u64),
// then rows*cols little-endian float32 values in row-major order.
inline void write_matrix(std::ostream& out, const Matrix& m, Stage stage) {
  out.write(kMatrixMagic.data(), 4);
  detail::write_le<std::uint32_t>(out, kFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(stage));
  detail::write_le<std::uint32_t>(out, 0);
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      detail::write_le<float>(out, static_cast<float>(m(r, c)));
    }
  }
}

inline FeatureMatrix read_matrix(std::istream& in) {
  detail::expect_magic(in, kMatrixMagic);
  const auto version = detail::read_le<std::uint32_t>(in);
  require(version == kFormatVersion, ErrorCode::parse_error,
          "unsupported matrix format version " + std::to_string(version));
  const auto stage = detail::read_le<std::uint32_t>(in);
  require(stage <= static_cast<std::uint32_t>(Stage::standardized), ErrorCode::parse_error,
          "unknown stage tag " + std::to_string(stage));
  (void)detail::read_le<std::uint32_t>(in);
  const auto rows = detail::read_le<std::uint64_t>(in);
  const auto cols = detail::read_le<std::uint64_t>(in);
  FeatureMatrix fm;
  fm.stage = static_cast<Stage>(stage);
  fm.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < fm.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < fm.values.cols(); ++c) {
      fm.values(r, c) = detail::read_le<float>(in);
    }
  }
  return fm;
}

inline void save_matrix(const std::filesystem::path& path, const FeatureMatrix& fm) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  write_matrix(out, fm.values, fm.stage);
  require(static_cast<bool>(out), ErrorCode::io_error, "write failed: " + path.string());
}

inline FeatureMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  return read_matrix(in);
}

// A named sequence of matrix blocks (used for PCA models).
struct Section {
  std::string name;
  Matrix values;
  Stage stage = Stage::raw;
};

inline void write_bundle(std::ostream& out, const std::vector<Section>& sections) {
  out.write(kBundleMagic.data(), 4);
  detail::write_le<std::uint32_t>(out, kFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    write_matrix(out, s.values, s.stage);
  }
}

inline std::vector<Section> read_bundle(std::istream& in) {
  detail::expect_magic(in, kBundleMagic);
  const auto version = detail::read_le<std::uint32_t>(in);
  require(version == kFormatVersion, ErrorCode::parse_error, "unsupported bundle version");
  const auto count = detail::read_le<std::uint32_t>(in);
  std::vector<Section> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_le<std::uint32_t>(in);
    require(len < 4096, ErrorCode::parse_error, "section name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) fail(ErrorCode::parse_error, "truncated section name");
    auto fm = read_matrix(in);
    sections.push_back({std::move(name), std::move(fm.values), fm.stage});
  }
  return sections;
}

}  // namespace io
}  // namespace shotclust
