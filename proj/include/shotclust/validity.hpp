#pragma once

// Internal cluster validity: Silhouette, Dunn and Davies-Bouldin, all on
// Euclidean distances.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

struct ValidityReport {
  double silhouette_mean = 0.0;
  double dunn = 0.0;
  double davies_bouldin = 0.0;
  std::vector<double> per_point_silhouette;
};

namespace detail {

inline std::size_t checked_cluster_count(const Matrix& points,
                                         const std::vector<std::size_t>& assignments) {
  require(assignments.size() == static_cast<std::size_t>(points.rows()),
          ErrorCode::invalid_argument, "assignment count does not match the points");
  std::size_t k = 0;
  for (auto a : assignments) k = std::max(k, a + 1);
  require(k >= 2, ErrorCode::invalid_argument, "validity indices need K >= 2");
  std::vector<bool> present(k, false);
  for (auto a : assignments) present[a] = true;
  for (std::size_t c = 0; c < k; ++c) {
    require(present[c], ErrorCode::invalid_argument,
            "cluster " + std::to_string(c) + " is empty");
  }
  return k;
}

inline double distance(const Matrix& p, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < p.cols(); ++d) {
    const double diff = p(i, d) - p(j, d);
    s += diff * diff;
  }
  return std::sqrt(s);
}

inline double silhouette_value(double a, double b) {
  if (a < b) return 1.0 - a / b;
  if (a > b) return b / a - 1.0;
  return 0.0;
}

struct PairwiseSummary {
  std::vector<double> silhouette;
  double max_diameter = 0.0;
  double min_separation = std::numeric_limits<double>::infinity();
};

// One O(n^2) sweep feeding both Silhouette and Dunn.
inline PairwiseSummary pairwise_summary(const Matrix& points,
                                        const std::vector<std::size_t>& assignments,
                                        std::size_t k) {
  const auto n = assignments.size();
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assignments) ++sizes[a];

  PairwiseSummary out;
  out.silhouette.assign(n, 0.0);
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    const auto own = assignments[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = distance(points, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      sums[assignments[j]] += d;
      if (j > i) {
        if (assignments[j] == own) {
          out.max_diameter = std::max(out.max_diameter, d);
        } else {
          out.min_separation = std::min(out.min_separation, d);
        }
      }
    }
    if (sizes[own] < 2) continue;  // singleton clusters score 0
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    out.silhouette[i] = silhouette_value(a, b);
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double dunn_from(const PairwiseSummary& s) {
  require(s.max_diameter > 0.0, ErrorCode::degenerate,
          "Dunn index undefined: every cluster is a singleton");
  return s.min_separation / s.max_diameter;
}

}  // namespace detail

struct SilhouetteResult {
  double mean = 0.0;
  std::vector<double> per_point;
};

inline SilhouetteResult silhouette(const Matrix& points, const std::vector<std::size_t>& assignments) {
  const auto k = detail::checked_cluster_count(points, assignments);
  auto summary = detail::pairwise_summary(points, assignments, k);
  SilhouetteResult r;
  r.mean = detail::mean_of(summary.silhouette);
  r.per_point = std::move(summary.silhouette);
  return r;
}

// min closest-pair distance between clusters over max cluster diameter
inline double dunn(const Matrix& points, const std::vector<std::size_t>& assignments) {
  const auto k = detail::checked_cluster_count(points, assignments);
  return detail::dunn_from(detail::pairwise_summary(points, assignments, k));
}

inline double davies_bouldin(const Matrix& points, const std::vector<std::size_t>& assignments) {
  const auto k = detail::checked_cluster_count(points, assignments);
  const auto n = assignments.size();
  Matrix centroids = Matrix::Zero(static_cast<Eigen::Index>(k), points.cols());
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    centroids.row(static_cast<Eigen::Index>(assignments[i])) += points.row(static_cast<Eigen::Index>(i));
    ++sizes[assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);

  std::vector<double> scatter(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(assignments[i]);
    scatter[assignments[i]] += (points.row(static_cast<Eigen::Index>(i)) - centroids.row(c)).norm();
  }
  for (std::size_t c = 0; c < k; ++c) scatter[c] /= static_cast<double>(sizes[c]);

  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double separation =
          (centroids.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(j))).norm();
      require(separation > 0.0, ErrorCode::degenerate,
              "Davies-Bouldin undefined: clusters " + std::to_string(i) + " and " +
                  std::to_string(j) + " share a centroid");
      worst = std::max(worst, (scatter[i] + scatter[j]) / separation);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

inline ValidityReport evaluate_validity(const Matrix& points,
                                        const std::vector<std::size_t>& assignments) {
  const auto k = detail::checked_cluster_count(points, assignments);
  auto summary = detail::pairwise_summary(points, assignments, k);
  ValidityReport r;
  r.silhouette_mean = detail::mean_of(summary.silhouette);
  r.dunn = detail::dunn_from(summary);
  r.davies_bouldin = davies_bouldin(points, assignments);
  r.per_point_silhouette = std::move(summary.silhouette);
  return r;
}

// Renumbers cluster ids to 0..m-1 in order of first use, dropping empty ids.
inline std::vector<std::size_t> compact_labels(const std::vector<std::size_t>& assignments) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> map;
  std::vector<std::size_t> out(assignments.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto a = assignments[i];
    if (a >= map.size()) map.resize(a + 1, unset);
    if (map[a] == unset) map[a] = next++;
    out[i] = map[a];
  }
  return out;
}

}  // namespace shotclust
