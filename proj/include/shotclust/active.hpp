#pragma once

// Margin-based informativeness with a diversity constraint that keeps the
// batch's cluster composition close to the unlabeled pool's.

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

struct MarginReport {
  std::size_t point = 0;
  double margin = 0.0;
  std::size_t first = 0;   // centroid realising the smaller distance of the pair
  std::size_t second = 0;  // the other centroid of the pair
};

enum class MarginReading {
  nearest,  // second-nearest minus nearest distance (uncertainty margin)
  largest,  // largest minus second-largest distance, the literal alternative
};

// Sorted ascending by margin; equal margins keep point order.
inline std::vector<MarginReport> margins(const Matrix& points, const Matrix& centroids,
                                         MarginReading reading = MarginReading::nearest) {
  require(centroids.rows() >= 2, ErrorCode::invalid_argument, "margins need K >= 2");
  require(centroids.cols() == points.cols(), ErrorCode::invalid_argument,
          "centroid dimension does not match the points");
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<MarginReport> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = points.row(static_cast<Eigen::Index>(i));
    // two smallest and two largest distances with their centroid indices
    double lo1 = std::numeric_limits<double>::infinity(), lo2 = lo1;
    double hi1 = -1.0, hi2 = -1.0;
    std::size_t lo1_at = 0, lo2_at = 0, hi1_at = 0, hi2_at = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (row - centroids.row(c)).norm();
      const auto at = static_cast<std::size_t>(c);
      if (d < lo1) {
        lo2 = lo1;
        lo2_at = lo1_at;
        lo1 = d;
        lo1_at = at;
      } else if (d < lo2) {
        lo2 = d;
        lo2_at = at;
      }
      if (d > hi1) {
        hi2 = hi1;
        hi2_at = hi1_at;
        hi1 = d;
        hi1_at = at;
      } else if (d > hi2) {
        hi2 = d;
        hi2_at = at;
      }
    }
    if (reading == MarginReading::nearest) {
      out[i] = {i, lo2 - lo1, lo1_at, lo2_at};
    } else {
      out[i] = {i, hi1 - hi2, hi2_at, hi1_at};
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MarginReport& a, const MarginReport& b) { return a.margin < b.margin; });
  return out;
}

struct BatchSpec {
  std::size_t batch_size = 200;
  std::size_t slack = 1;
};

struct BatchSelection {
  std::vector<std::size_t> points;   // in admission order
  std::vector<std::size_t> quotas;   // per cluster
  std::size_t filled_without_quota = 0;
};

// Largest-remainder apportionment of `total` seats by integer weights.
// Equal remainders favour the lower index.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights) {
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> seats(weights.size(), 0);
  if (sum == 0) return seats;
  std::vector<std::size_t> remainder(weights.size());
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto scaled = static_cast<unsigned __int128>(total) * weights[i];
    seats[i] = static_cast<std::size_t>(scaled / sum);
    remainder[i] = static_cast<std::size_t>(scaled % sum);
    given += seats[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; given < total && i < order.size(); ++i, ++given) ++seats[order[i]];
  return seats;
}

// Greedy ascending-margin walk that admits a point only while its cluster
// is under quota + slack and the open slots still cover every other
// cluster's floor of quota - slack, followed by a quota-free pass if the
// walk ends short. Excluded points are never selected.
inline BatchSelection select_batch(const std::vector<MarginReport>& reports,
                                   const std::vector<std::size_t>& assignments,
                                   const BatchSpec& spec,
                                   const std::unordered_set<std::size_t>& exclude) {
  require(spec.batch_size >= 1, ErrorCode::invalid_argument, "batch size must be >= 1");
  std::size_t k = 0;
  for (auto a : assignments) k = std::max(k, a + 1);
  std::vector<std::size_t> unlabeled(k, 0);
  std::size_t pool = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (exclude.count(i)) continue;
    ++unlabeled[assignments[i]];
    ++pool;
  }
  require(pool >= spec.batch_size, ErrorCode::conflict,
          "unlabeled pool of " + std::to_string(pool) + " cannot fill a batch of " +
              std::to_string(spec.batch_size));

  BatchSelection out;
  out.quotas = apportion(spec.batch_size, unlabeled);
  std::vector<std::size_t> admitted(k, 0);
  std::vector<bool> taken(assignments.size(), false);

  // slots still owed to clusters below their floor
  std::size_t owed = 0;
  std::vector<std::size_t> floor(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    floor[c] = out.quotas[c] > spec.slack ? out.quotas[c] - spec.slack : 0;
    owed += floor[c];
  }

  for (const auto& r : reports) {
    if (out.points.size() == spec.batch_size) break;
    require(r.point < assignments.size(), ErrorCode::out_of_range,
            "margin report for unknown point " + std::to_string(r.point));
    if (taken[r.point] || exclude.count(r.point)) continue;
    const auto c = assignments[r.point];
    if (admitted[c] >= out.quotas[c] + spec.slack) continue;
    const bool below_floor = admitted[c] < floor[c];
    const std::size_t open = spec.batch_size - out.points.size();
    if (!below_floor && owed >= open) continue;
    if (below_floor) --owed;
    ++admitted[c];
    taken[r.point] = true;
    out.points.push_back(r.point);
  }
  for (const auto& r : reports) {
    if (out.points.size() == spec.batch_size) break;
    if (taken[r.point] || exclude.count(r.point)) continue;
    taken[r.point] = true;
    out.points.push_back(r.point);
    ++out.filled_without_quota;
  }
  require(out.points.size() == spec.batch_size, ErrorCode::conflict,
          "margin reports do not cover enough unlabeled points for the batch");
  return out;
}

}  // namespace shotclust
