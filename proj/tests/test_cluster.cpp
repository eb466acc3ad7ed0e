#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <sstream>

#include "shotclust/cluster.hpp"
#include "support.hpp"

using namespace shotclust;
namespace ts = testing_support;

namespace {

Matrix line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

// Centroid means recomputed from scratch.
Matrix means_of(const Matrix& points, const std::vector<std::size_t>& a, std::size_t k) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(k), points.cols());
  std::vector<double> n(k, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.row(static_cast<Eigen::Index>(a[i])) += points.row(static_cast<Eigen::Index>(i));
    n[a[i]] += 1;
  }
  for (std::size_t j = 0; j < k; ++j)
    if (n[j] > 0) c.row(static_cast<Eigen::Index>(j)) /= n[j];
  return c;
}

double objective(const Matrix& points, const Matrix& centroids, const std::vector<std::size_t>& a) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (points.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(a[i]))).squaredNorm();
  return s;
}

}  // namespace

TEST(KmeansPP, SaturationGivesAllPoints) {
  const Matrix pts = line({3, -1, 8, 2.5});
  const Matrix c = kmeanspp_seed(pts, 4, 12);
  std::vector<double> got;
  for (Eigen::Index i = 0; i < 4; ++i) got.push_back(c(i, 0));
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<double>{-1, 2.5, 3, 8}));
}

TEST(KmeansPP, TooManyCentresRejected) {
  EXPECT_THROW(kmeanspp_seed(line({1, 1, 2}), 3, 0), Error);
}

TEST(KmeansPP, SplitsTwoPairs) {
  const Matrix pts = line({0, 1, 10, 11});
  int split = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Matrix c = kmeanspp_seed(pts, 2, s);
    if ((c(0, 0) < 5) != (c(1, 0) < 5)) ++split;
  }
  EXPECT_GE(split, 980);
}

TEST(KmeansPP, Deterministic) {
  std::mt19937_64 gen(1);
  const Matrix pts = ts::random_matrix(gen, 50, 3);
  EXPECT_EQ(kmeanspp_seed(pts, 5, 77), kmeanspp_seed(pts, 5, 77));
}

// Ordered (first, second) draws against the exact D² law.
TEST(KmeansPP, FrequenciesMatchExactD2Law) {
  const Matrix pts = line({0, 1, 3, 7});
  constexpr int kTrials = 10000;
  std::map<std::pair<int, int>, double> observed;
  auto index_of = [&](double v) {
    for (int i = 0; i < 4; ++i)
      if (pts(i, 0) == v) return i;
    return -1;
  };
  for (int t = 0; t < kTrials; ++t) {
    const Matrix c = kmeanspp_seed(pts, 2, static_cast<std::uint64_t>(t) * 2654435761u + 5);
    observed[{index_of(c(0, 0)), index_of(c(1, 0))}] += 1;
  }
  double chi = 0;
  int cells = 0;
  for (int i = 0; i < 4; ++i) {
    double mass = 0;
    for (int j = 0; j < 4; ++j) mass += std::pow(pts(i, 0) - pts(j, 0), 2);
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      const double p = 0.25 * std::pow(pts(i, 0) - pts(j, 0), 2) / mass;
      const double e = p * kTrials;
      const double o = observed[{i, j}];
      chi += (o - e) * (o - e) / e;
      ++cells;
    }
  }
  boost::math::chi_squared dist(cells - 1);
  EXPECT_LT(chi, boost::math::quantile(dist, 0.99));
}

TEST(Lloyd, HandExample) {
  const Matrix pts = line({0, 1, 10, 11});
  const auto c = lloyd(pts, line({0.4, 10.2}));
  EXPECT_EQ(c.centroids(0, 0), 0.5);
  EXPECT_EQ(c.centroids(1, 0), 10.5);
  EXPECT_EQ(c.assignments, (std::vector<std::size_t>{0, 0, 1, 1}));
  EXPECT_EQ(c.sizes, (std::vector<std::size_t>{2, 2}));
  EXPECT_TRUE(c.converged);
}

TEST(Lloyd, FixedPointWithZeroError) {
  const Matrix pts = line({1, 1, 5, 9, 9});
  const auto c = lloyd(pts, line({1, 5, 9}));
  EXPECT_TRUE(c.converged);
  EXPECT_EQ(c.iterations, 1u);
  EXPECT_EQ(c.objective_history.back(), 0.0);
}

TEST(Lloyd, TiesGoToLowestIndex) {
  const auto a = assign_nearest(line({5}), line({4, 6}));
  EXPECT_EQ(a[0], 0u);
}

TEST(Lloyd, EmptyClusterReseededAtFarthestPoint) {
  const Matrix pts = line({0, 1, 2, 20});
  const auto c = lloyd(pts, line({1, 100, 200}), {1, 0.0});
  // after one update the far point owns a centroid
  EXPECT_EQ(c.k(), 3u);
  bool has_twenty = false;
  for (Eigen::Index j = 0; j < 3; ++j) has_twenty = has_twenty || c.centroids(j, 0) == 20;
  EXPECT_TRUE(has_twenty);
}

TEST(Lloyd, MonotoneObjectiveOnRandomInstances) {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 100; ++t) {
    const auto n = 20 + static_cast<Eigen::Index>(gen() % 60);
    const Matrix pts = ts::random_matrix(gen, n, 1 + static_cast<Eigen::Index>(gen() % 4));
    const auto k = 2 + gen() % 5;
    const auto c = kmeans(pts, k, gen());
    for (std::size_t i = 1; i < c.objective_history.size(); ++i)
      EXPECT_LE(c.objective_history[i], c.objective_history[i - 1] + 1e-12) << "instance " << t;
  }
}

TEST(Lloyd, LocallyOptimalAtConvergence) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 40; ++t) {
    const auto n = 10 + static_cast<Eigen::Index>(gen() % 41);
    const Matrix pts = ts::random_matrix(gen, n, 2);
    const std::size_t k = 2 + gen() % 4;
    const auto c = kmeans(pts, k, gen(), {300, 0.0});
    ASSERT_TRUE(c.converged);
    EXPECT_LT((c.centroids - means_of(pts, c.assignments, k)).cwiseAbs().maxCoeff(), 1e-12);
    const double base = objective(pts, c.centroids, c.assignments);
    for (std::size_t i = 0; i < c.assignments.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        auto moved = c.assignments;
        moved[i] = j;
        EXPECT_GE(objective(pts, c.centroids, moved), base - 1e-12);
      }
    }
  }
}

TEST(Lloyd, SingleCentroidIsTotalVariance) {
  std::mt19937_64 gen(4);
  const Matrix pts = ts::random_matrix(gen, 30, 3);
  const auto c = kmeans(pts, 1, 0);
  const Matrix centered = pts.rowwise() - pts.colwise().mean();
  EXPECT_NEAR(c.objective_history.back(), centered.squaredNorm(), 1e-9);
}

TEST(Sse, HandAndHomogeneity) {
  const Matrix pts = line({0, 1, 10, 11});
  const auto c = lloyd(pts, line({0.4, 10.2}));
  const auto r = sse(c, pts);
  EXPECT_EQ(r.per_cluster, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(r.average, 0.5);

  Clustering scaled = c;
  scaled.centroids *= 3.0;
  EXPECT_NEAR(sse(scaled, pts * 3.0).average, 9 * 0.5, 1e-12);

  const auto singles = lloyd(pts, pts);
  EXPECT_EQ(sse(singles, pts).average, 0.0);
}

TEST(Sse, EmptyClusterReported) {
  Clustering c;
  c.centroids = line({0, 50});
  c.assignments = {0, 0};
  const auto r = sse(c, line({1, -1}));
  EXPECT_EQ(r.empty_clusters, std::vector<std::size_t>{1});
  EXPECT_EQ(r.average, 1.0);
}

TEST(Elbow, GridAndMonotoneOnSeparableData) {
  std::mt19937_64 gen(5);
  Matrix centres(6, 2);
  centres << 0, 0, 10, 0, 0, 10, 10, 10, 20, 0, 0, 20;
  const auto blobs = ts::gaussian_blobs(gen, centres, 15, 0.5);
  ElbowOptions opt;
  opt.k_min = 2;
  opt.k_max = 6;
  opt.step = 2;
  const auto curve = elbow_scan(blobs.points, opt);
  EXPECT_EQ(curve.ks, (std::vector<std::size_t>{2, 4, 6}));
  for (std::size_t i = 1; i < curve.sse.size(); ++i) EXPECT_LE(curve.sse[i], curve.sse[i - 1]);

  opt.k_min = 10;
  opt.k_max = 100;
  opt.step = 10;
  opt.seeds = {0};
  const Matrix many = ts::random_matrix(gen, 120, 2);
  EXPECT_EQ(elbow_scan(many, opt).ks.size(), 10u);

  opt.k_max = 10;
  EXPECT_EQ(elbow_scan(many, opt).ks.size(), 1u);
}

TEST(Elbow, KMaxClampedWithWarning) {
  ElbowOptions opt;
  opt.k_min = 1;
  opt.k_max = 50;
  opt.step = 1;
  const auto curve = elbow_scan(line({0, 1, 2, 2}), opt);
  EXPECT_EQ(curve.ks.back(), 3u);
  EXPECT_EQ(curve.warnings.size(), 1u);
}

TEST(PickK, BreakRule) {
  SseCurve c{{10, 20, 30, 40, 50}, {100, 40, 25, 21, 20}, {}};
  EXPECT_EQ(pick_k_at_break(c), 30u);
  SseCurve two{{5, 9}, {100, 0}, {}};
  EXPECT_EQ(pick_k_at_break(two), 9u);
  SseCurve flat{{1, 2, 3}, {4, 4, 4}, {}};
  EXPECT_THROW(pick_k_at_break(flat), Error);
  SseCurve one{{1}, {4}, {}};
  EXPECT_THROW(pick_k_at_break(one), Error);
}

TEST(Elbow, CsvHeader) {
  std::ostringstream out;
  write_curve_csv(out, SseCurve{{10, 20}, {1.5, 0.25}, {}});
  EXPECT_EQ(out.str(), "k,sse\n10,1.5\n20,0.25\n");
}
