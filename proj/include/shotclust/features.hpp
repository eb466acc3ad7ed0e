#pragma once

// Column standardisation and modality fusion.

#include <cmath>
#include <string>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

// Per-column statistics retained so later rows map into the same space.
struct Standardizer {
  Vector means;
  Vector stds;  // sample standard deviation (n - 1); 0 marks a constant column

  Matrix apply(const Matrix& m) const {
    require(m.cols() == means.size(), ErrorCode::invalid_argument,
            "standardizer expects " + std::to_string(means.size()) + " columns, got " +
                std::to_string(m.cols()));
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (stds[c] > 0.0) {
        out.col(c) = (m.col(c).array() - means[c]) / stds[c];
      } else {
        out.col(c).setZero();
      }
    }
    return out;
  }
};

inline Standardizer fit_standardizer(const Matrix& m) {
  require(m.rows() >= 2, ErrorCode::invalid_argument, "standardize needs at least 2 rows");
  const auto n = static_cast<double>(m.rows());
  Standardizer s;
  s.means = Vector::Zero(m.cols());
  s.stds = Vector::Zero(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) sum += m(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    bool constant = true;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double d = m(r, c) - mean;
      ss += d * d;
      constant = constant && m(r, c) == m(0, c);
    }
    s.means[c] = mean;
    s.stds[c] = constant ? 0.0 : std::sqrt(ss / (n - 1.0));
  }
  return s;
}

struct Standardized {
  FeatureMatrix matrix;
  Standardizer stats;
};

inline Standardized standardize(const FeatureMatrix& m) {
  Standardized out;
  out.stats = fit_standardizer(m.values);
  out.matrix.values = out.stats.apply(m.values);
  out.matrix.stage = Stage::standardized;
  return out;
}

// Visual block first, then text. Expected sizes are checked when given.
inline Vector fuse(const Vector& visual, const Vector& textual, Eigen::Index visual_dim = -1,
                   Eigen::Index text_dim = -1) {
  require(visual_dim < 0 || visual.size() == visual_dim, ErrorCode::invalid_argument,
          "visual vector has " + std::to_string(visual.size()) + " dims, expected " +
              std::to_string(visual_dim));
  require(text_dim < 0 || textual.size() == text_dim, ErrorCode::invalid_argument,
          "text vector has " + std::to_string(textual.size()) + " dims, expected " +
              std::to_string(text_dim));
  Vector out(visual.size() + textual.size());
  out << visual, textual;
  return out;
}

inline std::pair<Vector, Vector> split(const Vector& joint, Eigen::Index visual_dim) {
  require(visual_dim >= 0 && visual_dim <= joint.size(), ErrorCode::invalid_argument,
          "split point outside the joint vector");
  return {joint.head(visual_dim), joint.tail(joint.size() - visual_dim)};
}

}  // namespace shotclust
