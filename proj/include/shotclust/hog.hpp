#pragma once

// Histogram of oriented gradients over a grayscale image.
//
// Gradients use centred differences with edge replication, so a constant
// offset on every pixel leaves the descriptor unchanged. Orientations are
// unsigned ([0, pi)); bin k is centred on k*pi/bins and each pixel splits
// its magnitude linearly between the two nearest bin centres. Cells are
// grouped into overlapping blocks that are L2-normalised with an epsilon
// guard, and blocks are emitted in row-major order.

#include <cmath>
#include <numbers>
#include <string>

#include "shotclust/error.hpp"
#include "shotclust/image.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

struct HogConfig {
  int cell = 8;
  int bins = 9;
  int block = 2;
  int block_stride = 1;
  double epsilon = 1e-6;
};

struct HogLayout {
  Eigen::Index cells_y = 0, cells_x = 0;
  Eigen::Index blocks_y = 0, blocks_x = 0;
  Eigen::Index block_length = 0;

  Eigen::Index length() const { return blocks_y * blocks_x * block_length; }
};

inline HogLayout hog_layout(Eigen::Index height, Eigen::Index width, const HogConfig& cfg) {
  require(cfg.cell >= 1, ErrorCode::invalid_argument, "HOG cell size must be >= 1");
  require(cfg.bins >= 2, ErrorCode::invalid_argument, "HOG needs at least 2 bins");
  require(cfg.block >= 1 && cfg.block_stride >= 1, ErrorCode::invalid_argument,
          "HOG block and stride must be >= 1");
  require(cfg.epsilon > 0.0, ErrorCode::invalid_argument, "HOG epsilon must be positive");
  require(height > 0 && width > 0 && height % cfg.cell == 0 && width % cfg.cell == 0,
          ErrorCode::invalid_argument,
          "image sides " + std::to_string(height) + "x" + std::to_string(width) +
              " not divisible by cell " + std::to_string(cfg.cell));
  HogLayout layout;
  layout.cells_y = height / cfg.cell;
  layout.cells_x = width / cfg.cell;
  require(layout.cells_y >= cfg.block && layout.cells_x >= cfg.block,
          ErrorCode::invalid_argument, "HOG block larger than the cell grid");
  layout.blocks_y = (layout.cells_y - cfg.block) / cfg.block_stride + 1;
  layout.blocks_x = (layout.cells_x - cfg.block) / cfg.block_stride + 1;
  layout.block_length = static_cast<Eigen::Index>(cfg.block) * cfg.block * cfg.bins;
  return layout;
}

inline Vector hog(const GrayImage& img, const HogConfig& cfg = {}) {
  const auto h = img.height();
  const auto w = img.width();
  const HogLayout layout = hog_layout(h, w, cfg);
  const auto& px = img.pixels;

  // cell histograms, laid out [cell_y][cell_x][bin]
  Vector cells = Vector::Zero(layout.cells_y * layout.cells_x * cfg.bins);
  const double bin_width = std::numbers::pi / cfg.bins;
  for (Eigen::Index y = 0; y < h; ++y) {
    const auto up = y > 0 ? y - 1 : y;
    const auto down = y + 1 < h ? y + 1 : y;
    for (Eigen::Index x = 0; x < w; ++x) {
      const auto left = x > 0 ? x - 1 : x;
      const auto right = x + 1 < w ? x + 1 : x;
      const double gx = px(y, right) - px(y, left);
      const double gy = px(down, x) - px(up, x);
      const double magnitude = std::hypot(gx, gy);
      if (magnitude == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += std::numbers::pi;
      if (angle >= std::numbers::pi) angle -= std::numbers::pi;
      const double pos = angle / bin_width;
      const double floor_pos = std::floor(pos);
      const double frac = pos - floor_pos;
      const auto lo = static_cast<Eigen::Index>(floor_pos) % cfg.bins;
      const auto hi = (lo + 1) % cfg.bins;
      const auto base = ((y / cfg.cell) * layout.cells_x + (x / cfg.cell)) * cfg.bins;
      cells[base + lo] += (1.0 - frac) * magnitude;
      cells[base + hi] += frac * magnitude;
    }
  }

  Vector out(layout.length());
  Eigen::Index cursor = 0;
  const double eps2 = cfg.epsilon * cfg.epsilon;
  for (Eigen::Index by = 0; by < layout.blocks_y; ++by) {
    for (Eigen::Index bx = 0; bx < layout.blocks_x; ++bx) {
      const auto start = cursor;
      for (int cy = 0; cy < cfg.block; ++cy) {
        for (int cx = 0; cx < cfg.block; ++cx) {
          const auto cell_y = by * cfg.block_stride + cy;
          const auto cell_x = bx * cfg.block_stride + cx;
          out.segment(cursor, cfg.bins) =
              cells.segment((cell_y * layout.cells_x + cell_x) * cfg.bins, cfg.bins);
          cursor += cfg.bins;
        }
      }
      auto block = out.segment(start, layout.block_length);
      block /= std::sqrt(block.squaredNorm() + eps2);
    }
  }
  return out;
}

}  // namespace shotclust
