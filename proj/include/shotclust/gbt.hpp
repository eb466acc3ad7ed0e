#pragma once

// Multiclass gradient-boosted regression trees on the softmax objective.
//
// Every round fits one tree per observed class to the residuals
// y_k - p_k of the current softmax, using greedy variance-reduction splits
// on presorted features. Leaves take the one-step Newton value
// (K-1)/K * sum(r) / sum(p(1-p)), scaled by the learning rate. There is no
// absolute regulariser, so duplicating the training set (and doubling
// min_leaf) reproduces the same model.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "shotclust/classifier.hpp"

namespace shotclust {

struct GbtConfig {
  std::size_t rounds = 100;
  std::size_t depth = 4;
  double learning_rate = 0.1;
  std::size_t min_leaf = 2;
};

class RegressionTree {
 public:
  struct Node {
    Eigen::Index feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with x <= threshold go left
    std::size_t left = 0, right = 0;
    double value = 0.0;
  };

  double predict(const Matrix& rows, Eigen::Index r) const {
    std::size_t at = 0;
    while (nodes_[at].feature >= 0) {
      at = rows(r, nodes_[at].feature) <= nodes_[at].threshold ? nodes_[at].left : nodes_[at].right;
    }
    return nodes_[at].value;
  }

  const std::vector<Node>& nodes() const { return nodes_; }

  // Level-wise growth. `sorted` holds, per feature, the row order by value.
  static RegressionTree fit(const Matrix& x, const std::vector<std::vector<Eigen::Index>>& sorted,
                            const std::vector<double>& residual, const std::vector<double>& hessian,
                            const GbtConfig& cfg, double leaf_scale) {
    const auto n = static_cast<std::size_t>(x.rows());
    RegressionTree tree;
    tree.nodes_.emplace_back();
    std::vector<std::size_t> node_of(n, 0);
    std::vector<std::size_t> frontier = {0};

    const std::size_t min_leaf = std::max<std::size_t>(cfg.min_leaf, 1);
    for (std::size_t level = 0; level < cfg.depth && !frontier.empty(); ++level) {
      // slot per frontier node
      std::vector<std::size_t> slot(tree.nodes_.size(), std::numeric_limits<std::size_t>::max());
      for (std::size_t s = 0; s < frontier.size(); ++s) slot[frontier[s]] = s;
      const std::size_t m = frontier.size();
      std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
      std::vector<std::size_t> count(m, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto s = slot[node_of[i]];
        if (s == std::numeric_limits<std::size_t>::max()) continue;
        sum[s] += residual[i];
        sumsq[s] += residual[i] * residual[i];
        ++count[s];
      }
      std::vector<double> best_gain(m), best_threshold(m, 0.0);
      std::vector<Eigen::Index> best_feature(m, -1);
      for (std::size_t s = 0; s < m; ++s) best_gain[s] = 1e-10 * sumsq[s];

      std::vector<double> left_sum(m);
      std::vector<std::size_t> left_count(m);
      std::vector<double> prev(m);
      for (Eigen::Index f = 0; f < x.cols(); ++f) {
        std::fill(left_sum.begin(), left_sum.end(), 0.0);
        std::fill(left_count.begin(), left_count.end(), 0);
        for (Eigen::Index row : sorted[static_cast<std::size_t>(f)]) {
          const auto s = slot[node_of[static_cast<std::size_t>(row)]];
          if (s == std::numeric_limits<std::size_t>::max()) continue;
          const double v = x(row, f);
          if (left_count[s] >= min_leaf && v > prev[s] && count[s] - left_count[s] >= min_leaf) {
            const double nl = static_cast<double>(left_count[s]);
            const double nr = static_cast<double>(count[s] - left_count[s]);
            const double sr = sum[s] - left_sum[s];
            const double gain = left_sum[s] * left_sum[s] / nl + sr * sr / nr -
                                sum[s] * sum[s] / static_cast<double>(count[s]);
            if (gain > best_gain[s]) {
              best_gain[s] = gain;
              best_feature[s] = f;
              double t = prev[s] + (v - prev[s]) / 2.0;
              if (t >= v) t = prev[s];
              best_threshold[s] = t;
            }
          }
          left_sum[s] += residual[static_cast<std::size_t>(row)];
          ++left_count[s];
          prev[s] = v;
        }
      }

      std::vector<std::size_t> next_frontier;
      for (std::size_t s = 0; s < m; ++s) {
        if (best_feature[s] < 0) continue;
        const auto id = frontier[s];
        const auto l = tree.nodes_.size();
        tree.nodes_.emplace_back();
        tree.nodes_.emplace_back();
        tree.nodes_[id].feature = best_feature[s];
        tree.nodes_[id].threshold = best_threshold[s];
        tree.nodes_[id].left = l;
        tree.nodes_[id].right = l + 1;
        next_frontier.push_back(l);
        next_frontier.push_back(l + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree.nodes_[node_of[i]];
        if (node.feature < 0) continue;
        node_of[i] = x(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left
                                                                                      : node.right;
      }
      frontier = std::move(next_frontier);
    }

    std::vector<double> num(tree.nodes_.size(), 0.0), den(tree.nodes_.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      num[node_of[i]] += residual[i];
      den[node_of[i]] += hessian[i];
    }
    for (std::size_t id = 0; id < tree.nodes_.size(); ++id) {
      if (tree.nodes_[id].feature >= 0) continue;
      tree.nodes_[id].value = leaf_scale * num[id] / std::max(den[id], 1e-12);
    }
    return tree;
  }

 private:
  std::vector<Node> nodes_;
};

class GbtModel final : public ClassifierModel {
 public:
  std::size_t num_classes() const override { return num_classes_; }

  Matrix predict_proba(const Matrix& rows) const override {
    const Matrix scores = raw_scores(rows);
    Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(num_classes_));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const double top = scores.row(r).maxCoeff();
      double z = 0.0;
      for (Eigen::Index k = 0; k < scores.cols(); ++k) z += std::exp(scores(r, k) - top);
      for (std::size_t k = 0; k < classes_.size(); ++k) {
        out(r, static_cast<Eigen::Index>(classes_[k])) =
            std::exp(scores(r, static_cast<Eigen::Index>(k)) - top) / z;
      }
    }
    return out;
  }

  // Additive scores over observed classes (columns follow classes()).
  Matrix raw_scores(const Matrix& rows) const {
    Matrix f = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(classes_.size()));
    for (const auto& round : trees_) {
      for (std::size_t k = 0; k < round.size(); ++k) {
        for (Eigen::Index r = 0; r < rows.rows(); ++r) {
          f(r, static_cast<Eigen::Index>(k)) += round[k].predict(rows, r);
        }
      }
    }
    return f;
  }

  const std::vector<std::size_t>& classes() const { return classes_; }
  std::size_t rounds() const { return trees_.size(); }

  friend std::unique_ptr<ClassifierModel> gbt_fit(const Matrix&, const std::vector<std::size_t>&,
                                                  std::size_t, const GbtConfig&);

 private:
  std::size_t num_classes_ = 0;
  std::vector<std::size_t> classes_;
  std::vector<std::vector<RegressionTree>> trees_;  // [round][class]
};

inline std::unique_ptr<ClassifierModel> gbt_fit(const Matrix& rows,
                                                const std::vector<std::size_t>& labels,
                                                std::size_t num_classes,
                                                const GbtConfig& cfg = {}) {
  require(cfg.rounds >= 1 && cfg.depth >= 1 && cfg.min_leaf >= 1 && cfg.learning_rate > 0.0,
          ErrorCode::invalid_argument, "GBT config values must be positive");
  const auto present = detail::present_classes(rows, labels, num_classes);
  if (present.size() == 1) {
    return std::make_unique<ConstantModel>(detail::one_hot(present[0], num_classes),
                                           "single-class training set; constant model");
  }

  auto model = std::make_unique<GbtModel>();
  model->num_classes_ = num_classes;
  model->classes_ = present;

  const auto n = static_cast<std::size_t>(rows.rows());
  const auto k = present.size();
  std::vector<std::size_t> column_of(num_classes, 0);
  for (std::size_t i = 0; i < k; ++i) column_of[present[i]] = i;

  std::vector<std::vector<Eigen::Index>> sorted(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index f = 0; f < rows.cols(); ++f) {
    auto& order = sorted[static_cast<std::size_t>(f)];
    order.resize(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return rows(a, f) < rows(b, f); });
  }

  Matrix scores = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(k));
  Matrix prob(rows.rows(), static_cast<Eigen::Index>(k));
  std::vector<double> residual(n), hessian(n);
  const double leaf_scale = cfg.learning_rate * (static_cast<double>(k) - 1.0) / static_cast<double>(k);

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const double top = scores.row(r).maxCoeff();
      prob.row(r) = (scores.row(r).array() - top).exp();
      prob.row(r) /= prob.row(r).sum();
    }
    std::vector<RegressionTree> trees;
    trees.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        const double y = column_of[labels[i]] == c ? 1.0 : 0.0;
        residual[i] = y - p;
        hessian[i] = p * (1.0 - p);
      }
      trees.push_back(RegressionTree::fit(rows, sorted, residual, hessian, cfg, leaf_scale));
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        scores(r, static_cast<Eigen::Index>(c)) += trees[c].predict(rows, r);
      }
    }
    model->trees_.push_back(std::move(trees));
  }
  return model;
}

}  // namespace shotclust
