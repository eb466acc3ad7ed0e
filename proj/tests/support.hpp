#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "shotclust/corpus.hpp"
#include "shotclust/image.hpp"
#include "shotclust/matrix.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using shotclust::Matrix;

inline fs::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("SHOTCLUST_TEST_TMP");
  fs::path dir = fs::path(root && *root ? root : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = nd(gen);
  }
  return m;
}

struct Blobs {
  Matrix points;
  std::vector<std::size_t> labels;
};

// `per` points around each centre with isotropic sigma.
inline Blobs gaussian_blobs(std::mt19937_64& gen, const Matrix& centres, std::size_t per,
                            double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  Blobs b;
  b.points.resize(centres.rows() * static_cast<Eigen::Index>(per), centres.cols());
  Eigen::Index r = 0;
  for (Eigen::Index c = 0; c < centres.rows(); ++c) {
    for (std::size_t i = 0; i < per; ++i, ++r) {
      for (Eigen::Index d = 0; d < centres.cols(); ++d) b.points(r, d) = centres(c, d) + nd(gen);
      b.labels.push_back(static_cast<std::size_t>(c));
    }
  }
  return b;
}

// Adjusted Rand index from the contingency table.
inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ra) sa += c2(v);
  for (const auto& [_, v] : rb) sb += c2(v);
  const double total = c2(static_cast<double>(a.size()));
  const double expected = sa * sb / total;
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

inline shotclust::RawImage gray_image(int w, int h, std::uint16_t value) {
  shotclust::RawImage img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.max_value = 255;
  img.samples.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), value);
  return img;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
}

}  // namespace testing_support
