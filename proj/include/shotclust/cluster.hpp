#pragma once

// K-Means++ seeding, Lloyd iterations, averaged SSE and elbow-based K
// selection.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"
#include "shotclust/random.hpp"

namespace shotclust {

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double diff = a(i, d) - b(j, d);
    s += diff * diff;
  }
  return s;
}

inline std::size_t count_distinct_rows(const Matrix& points) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      if (points(a, d) != points(b, d)) return points(a, d) < points(b, d);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

// First centre uniform over the points, each following one drawn with
// probability proportional to the squared distance to the nearest centre
// chosen so far.
inline Matrix kmeanspp_seed(const Matrix& points, std::size_t k, std::uint64_t rng_seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(k >= 1, ErrorCode::invalid_argument, "K must be >= 1");
  const std::size_t distinct = count_distinct_rows(points);
  require(k <= distinct, ErrorCode::invalid_argument,
          "K = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
              " distinct points");

  Rng rng(rng_seed);
  Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
  auto first = static_cast<Eigen::Index>(rng.below(n));
  centroids.row(0) = points.row(first);

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) {
    nearest[i] = squared_distance(points, static_cast<Eigen::Index>(i), centroids, 0);
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : nearest) total += d;
    const double target = rng.uniform() * total;
    std::size_t pick = n;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      cumulative += nearest[i];
      pick = i;
      if (cumulative > target) break;
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points, static_cast<Eigen::Index>(i),
                                                         centroids, static_cast<Eigen::Index>(c)));
    }
  }
  return centroids;
}

struct Clustering {
  Matrix centroids;
  std::vector<std::size_t> assignments;
  std::vector<std::size_t> sizes;
  std::size_t iterations = 0;
  bool converged = false;
  // total within-cluster squared error after every assignment step
  std::vector<double> objective_history;

  std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
};

struct LloydOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

// Nearest centroid per point; ties go to the lowest index.
inline std::vector<std::size_t> assign_nearest(const Matrix& points, const Matrix& centroids,
                                               std::vector<double>* distances = nullptr) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::size_t> out(n);
  if (distances) distances->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(points, static_cast<Eigen::Index>(i), centroids, c);
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(c);
      }
    }
    out[i] = arg;
    if (distances) (*distances)[i] = best;
  }
  return out;
}

inline double within_cluster_error(const Matrix& points, const Matrix& centroids,
                                   const std::vector<std::size_t>& assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    total += squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                              static_cast<Eigen::Index>(assignments[i]));
  }
  return total;
}

inline std::vector<std::size_t> cluster_sizes(const std::vector<std::size_t>& assignments,
                                              std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assignments) ++sizes[a];
  return sizes;
}

inline Clustering lloyd(const Matrix& points, const Matrix& init_centroids,
                        const LloydOptions& opt = {}) {
  require(init_centroids.rows() >= 1, ErrorCode::invalid_argument, "need at least one centroid");
  require(init_centroids.cols() == points.cols(), ErrorCode::invalid_argument,
          "centroid dimension does not match the points");
  require(points.rows() >= 1, ErrorCode::invalid_argument, "no points to cluster");
  const auto k = static_cast<std::size_t>(init_centroids.rows());
  const auto n = static_cast<std::size_t>(points.rows());

  Clustering c;
  c.centroids = init_centroids;
  c.assignments = assign_nearest(points, c.centroids);
  c.objective_history.push_back(within_cluster_error(points, c.centroids, c.assignments));

  for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
    Matrix next = Matrix::Zero(c.centroids.rows(), c.centroids.cols());
    const auto sizes = cluster_sizes(c.assignments, k);
    for (std::size_t i = 0; i < n; ++i) {
      next.row(static_cast<Eigen::Index>(c.assignments[i])) += points.row(static_cast<Eigen::Index>(i));
    }
    std::vector<bool> used(n, false);
    for (std::size_t j = 0; j < k; ++j) {
      const auto row = static_cast<Eigen::Index>(j);
      if (sizes[j] > 0) {
        next.row(row) /= static_cast<double>(sizes[j]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centre.
      double worst = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        const double d = squared_distance(points, static_cast<Eigen::Index>(i), c.centroids,
                                          static_cast<Eigen::Index>(c.assignments[i]));
        if (d > worst) {
          worst = d;
          arg = i;
        }
      }
      used[arg] = true;
      next.row(row) = points.row(static_cast<Eigen::Index>(arg));
    }
    double shift = 0.0;
    for (Eigen::Index j = 0; j < next.rows(); ++j) {
      shift = std::max(shift, (next.row(j) - c.centroids.row(j)).norm());
    }
    c.centroids = std::move(next);
    auto reassigned = assign_nearest(points, c.centroids);
    const bool changed = reassigned != c.assignments;
    c.assignments = std::move(reassigned);
    c.objective_history.push_back(within_cluster_error(points, c.centroids, c.assignments));
    c.iterations = iter + 1;
    if (!changed || shift < opt.tol) {
      c.converged = true;
      break;
    }
  }
  if (opt.max_iter == 0) c.converged = false;
  c.sizes = cluster_sizes(c.assignments, k);
  return c;
}

inline Clustering kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                         const LloydOptions& opt = {}) {
  return lloyd(points, kmeanspp_seed(points, k, seed), opt);
}

struct SseReport {
  double average = 0.0;  // mean over the K clusters of each one's SSE
  std::vector<double> per_cluster;
  std::vector<std::size_t> empty_clusters;
};

inline SseReport sse(const Clustering& c, const Matrix& points) {
  require(c.assignments.size() == static_cast<std::size_t>(points.rows()),
          ErrorCode::invalid_argument, "assignment count does not match the points");
  SseReport r;
  r.per_cluster.assign(c.k(), 0.0);
  std::vector<std::size_t> sizes(c.k(), 0);
  for (std::size_t i = 0; i < c.assignments.size(); ++i) {
    const auto a = c.assignments[i];
    require(a < c.k(), ErrorCode::out_of_range, "assignment outside [0, K)");
    ++sizes[a];
    r.per_cluster[a] += squared_distance(points, static_cast<Eigen::Index>(i), c.centroids,
                                         static_cast<Eigen::Index>(a));
  }
  double total = 0.0;
  for (std::size_t j = 0; j < c.k(); ++j) {
    if (sizes[j] == 0) r.empty_clusters.push_back(j);
    total += r.per_cluster[j];
  }
  r.average = c.k() == 0 ? 0.0 : total / static_cast<double>(c.k());
  return r;
}

struct SseCurve {
  std::vector<std::size_t> ks;
  std::vector<double> sse;
  std::vector<std::string> warnings;
};

struct ElbowOptions {
  std::size_t k_min = 10;
  std::size_t k_max = 1000;
  std::size_t step = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  LloydOptions lloyd;
};

// For every K on the grid keep the lowest averaged SSE across the seeds.
inline SseCurve elbow_scan(const Matrix& points, const ElbowOptions& opt) {
  require(opt.k_min >= 1, ErrorCode::invalid_argument, "k_min must be >= 1");
  require(opt.step >= 1, ErrorCode::invalid_argument, "step must be >= 1");
  require(!opt.seeds.empty(), ErrorCode::invalid_argument, "elbow scan needs at least one seed");
  require(opt.k_max >= opt.k_min, ErrorCode::invalid_argument, "k_max below k_min");
  SseCurve curve;
  std::size_t k_max = opt.k_max;
  const std::size_t distinct = count_distinct_rows(points);
  if (k_max > distinct) {
    curve.warnings.push_back("k_max " + std::to_string(k_max) + " clamped to " +
                             std::to_string(distinct) + " distinct points");
    k_max = distinct;
  }
  for (std::size_t k = opt.k_min; k <= k_max; k += opt.step) {
    double best = std::numeric_limits<double>::infinity();
    for (auto seed : opt.seeds) {
      const Clustering c = kmeans(points, k, seed, opt.lloyd);
      best = std::min(best, sse(c, points).average);
    }
    curve.ks.push_back(k);
    curve.sse.push_back(best);
  }
  return curve;
}

// Smallest scanned K whose cumulative SSE drop reaches `fraction` of the
// total drop across the curve.
inline std::size_t pick_k_at_break(const SseCurve& curve, double fraction = 0.8) {
  require(curve.ks.size() == curve.sse.size(), ErrorCode::invalid_argument,
          "SSE curve columns differ in length");
  require(curve.ks.size() >= 2, ErrorCode::degenerate, "SSE curve needs at least two points");
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::invalid_argument,
          "break fraction must be in (0, 1]");
  const double drop = curve.sse.front() - curve.sse.back();
  require(drop > 0.0, ErrorCode::degenerate, "SSE curve is flat; no elbow exists");
  for (std::size_t i = 0; i < curve.ks.size(); ++i) {
    if (curve.sse.front() - curve.sse[i] >= fraction * drop) return curve.ks[i];
  }
  return curve.ks.back();
}

inline void write_curve_csv(std::ostream& out, const SseCurve& curve) {
  out << "k,sse\n";
  out.precision(17);
  for (std::size_t i = 0; i < curve.ks.size(); ++i) out << curve.ks[i] << ',' << curve.sse[i] << '\n';
}

}  // namespace shotclust
