#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "shotclust/hog.hpp"
#include "support.hpp"

using namespace shotclust;

namespace {

// Straight-from-the-definition HOG: per-pixel votes by circular distance
// to each bin centre in degrees, histograms rebuilt for every block.
Vector reference_hog(const Matrix& img, int cell, int bins, int block, int stride, double eps) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  auto pix = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return img(y, x);
  };
  const double width_deg = 180.0 / bins;
  auto cell_hist = [&](int cy, int cx) {
    std::vector<double> hist(bins, 0.0);
    for (int y = cy * cell; y < (cy + 1) * cell; ++y) {
      for (int x = cx * cell; x < (cx + 1) * cell; ++x) {
        const double gx = pix(y, x + 1) - pix(y, x - 1);
        const double gy = pix(y + 1, x) - pix(y - 1, x);
        const double mag = std::sqrt(gx * gx + gy * gy);
        if (mag == 0) continue;
        double deg = std::atan2(gy, gx) * 180.0 / M_PI;
        deg = std::fmod(deg + 360.0, 180.0);
        for (int b = 0; b < bins; ++b) {
          double d = std::abs(deg - b * width_deg);
          d = std::min(d, 180.0 - d);
          const double wgt = 1.0 - d / width_deg;
          if (wgt > 0) hist[b] += wgt * mag;
        }
      }
    }
    return hist;
  };
  const int cy_n = h / cell, cx_n = w / cell;
  std::vector<double> out;
  for (int by = 0; by + block <= cy_n; by += stride) {
    for (int bx = 0; bx + block <= cx_n; bx += stride) {
      std::vector<double> v;
      for (int i = 0; i < block; ++i)
        for (int j = 0; j < block; ++j) {
          auto hc = cell_hist(by + i, bx + j);
          v.insert(v.end(), hc.begin(), hc.end());
        }
      double ss = 0;
      for (double x : v) ss += x * x;
      for (double& x : v) x /= std::sqrt(ss + eps * eps);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

GrayImage noise(std::mt19937_64& gen, int h, int w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GrayImage g;
  g.pixels.resize(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g.pixels(y, x) = u(gen);
  return g;
}

GrayImage step_edge(int side, int column) {
  GrayImage g;
  g.pixels = Matrix::Zero(side, side);
  g.pixels.rightCols(side - column).setOnes();
  return g;
}

}  // namespace

TEST(Hog, DefaultLengthIs34596) {
  GrayImage g;
  g.pixels = Matrix::Zero(256, 256);
  const auto start = std::chrono::steady_clock::now();
  const auto v = hog(g);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(v.size(), 34596);
  EXPECT_EQ(v.size(), 31 * 31 * 2 * 2 * 9);
  EXPECT_LT(secs, 1.0);
}

TEST(Hog, ConstantImageIsZero) {
  GrayImage g;
  g.pixels = Matrix::Constant(256, 256, 0.37);
  const auto v = hog(g);
  EXPECT_TRUE(v.allFinite());
  EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Hog, StepEdgeEnergyInHorizontalGradientBin) {
  const auto v = hog(step_edge(256, 128));
  double in_bin0 = 0, total = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    total += v[i] * v[i];
    if (i % 9 == 0) in_bin0 += v[i] * v[i];
  }
  EXPECT_GT(total, 0.0);
  EXPECT_GT(in_bin0 / total, 0.95);
}

TEST(Hog, MatchesReferenceImplementation) {
  std::mt19937_64 gen(5);
  const auto img = noise(gen, 64, 48);
  const auto got = hog(img, {8, 9, 2, 1, 1e-6});
  const auto want = reference_hog(img.pixels, 8, 9, 2, 1, 1e-6);
  ASSERT_EQ(got.size(), want.size());
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-9);

  const auto edge = step_edge(256, 128);
  EXPECT_LT((hog(edge) - reference_hog(edge.pixels, 8, 9, 2, 1, 1e-6)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Hog, ReferenceAgreementOverRandomConfigs) {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> pick(0, 1000);
  for (int trial = 0; trial < 25; ++trial) {
    HogConfig cfg;
    cfg.cell = 2 + pick(gen) % 5;
    cfg.bins = 2 + pick(gen) % 11;
    cfg.block = 1 + pick(gen) % 3;
    cfg.block_stride = 1 + pick(gen) % 2;
    cfg.epsilon = 1e-3;
    const int cy = cfg.block + pick(gen) % 4, cx = cfg.block + pick(gen) % 4;
    const auto img = noise(gen, cy * cfg.cell, cx * cfg.cell);
    const auto got = hog(img, cfg);
    const auto layout = hog_layout(img.height(), img.width(), cfg);
    EXPECT_EQ(got.size(), layout.blocks_y * layout.blocks_x * cfg.block * cfg.block * cfg.bins);
    const auto want = reference_hog(img.pixels, cfg.cell, cfg.bins, cfg.block, cfg.block_stride, cfg.epsilon);
    ASSERT_EQ(got.size(), want.size());
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
  }
}

TEST(Hog, InvariantToConstantOffset) {
  std::mt19937_64 gen(9);
  auto img = noise(gen, 64, 64, 0.0, 0.5);
  const auto base = hog(img);
  img.pixels.array() += 0.25;
  EXPECT_LT((hog(img) - base).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Hog, BlockNormsAtMostOne) {
  std::mt19937_64 gen(3);
  const auto v = hog(noise(gen, 256, 256));
  for (Eigen::Index b = 0; b < v.size() / 36; ++b) EXPECT_LE(v.segment(b * 36, 36).norm(), 1.0 + 1e-12);
}

TEST(Hog, ConfigInvariantsEnforced) {
  GrayImage g;
  g.pixels = Matrix::Zero(30, 32);
  EXPECT_THROW(hog(g), Error);  // 30 not divisible by 8
  g.pixels = Matrix::Zero(32, 32);
  HogConfig one_bin;
  one_bin.bins = 1;
  EXPECT_THROW(hog(g, one_bin), Error);
  HogConfig big_block;
  big_block.block = 5;
  EXPECT_THROW(hog(g, big_block), Error);
}
