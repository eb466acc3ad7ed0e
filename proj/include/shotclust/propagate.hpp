#pragma once

// Class-probability propagation and the semi-supervised active-learning
// loop that ties clustering, batch selection, classification and validity
// together.
//
// One iteration:
//   1. cluster the current space (K-Means++ at the start, warm-started later)
//   2. rank by margin and select a diverse batch
//   3. obtain labels for the batch
//   4. fit the classifier on every labelled row of the base features
//   5. predict class probabilities for all rows
//   6. append w * probabilities (one-hot truth for labelled rows)
//   7. re-cluster the augmented space
//   8. score validity in the base and augmented spaces
// Steps 1-2 and 4-8 are separate calls so a human can answer step 3 at
// their own pace.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "shotclust/active.hpp"
#include "shotclust/classifier.hpp"
#include "shotclust/cluster.hpp"
#include "shotclust/error.hpp"
#include "shotclust/gbt.hpp"
#include "shotclust/matrix.hpp"
#include "shotclust/svm.hpp"
#include "shotclust/validity.hpp"

namespace shotclust {

struct PropagationConfig {
  double proba_weight = 10.0;
};

// [features | w * p] per row; rows with a known label use its one-hot
// vector instead of p.
inline FeatureMatrix augment(const Matrix& features, const Matrix& proba,
                             const PropagationConfig& cfg,
                             const std::map<std::size_t, std::size_t>& known_labels = {}) {
  require(cfg.proba_weight > 0.0 && std::isfinite(cfg.proba_weight), ErrorCode::invalid_argument,
          "probability weight must be positive");
  require(features.rows() == proba.rows(), ErrorCode::invalid_argument,
          "feature rows (" + std::to_string(features.rows()) + ") and probability rows (" +
              std::to_string(proba.rows()) + ") differ");
  FeatureMatrix out;
  out.stage = Stage::augmented;
  out.values.resize(features.rows(), features.cols() + proba.cols());
  out.values.leftCols(features.cols()) = features;
  out.values.rightCols(proba.cols()) = cfg.proba_weight * proba;
  for (const auto& [row, label] : known_labels) {
    require(row < static_cast<std::size_t>(features.rows()), ErrorCode::out_of_range,
            "labelled row " + std::to_string(row) + " outside the matrix");
    require(label < static_cast<std::size_t>(proba.cols()), ErrorCode::out_of_range,
            "label " + std::to_string(label) + " outside the probability columns");
    auto suffix = out.values.row(static_cast<Eigen::Index>(row)).tail(proba.cols());
    suffix.setZero();
    suffix[static_cast<Eigen::Index>(label)] = cfg.proba_weight;
  }
  return out;
}

enum class ClassifierKind { gbt, svm };

inline std::string_view to_string(ClassifierKind kind) {
  return kind == ClassifierKind::gbt ? "gbt" : "svm";
}

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "gbt") return ClassifierKind::gbt;
  if (s == "svm") return ClassifierKind::svm;
  fail(ErrorCode::invalid_argument, "classifier must be gbt or svm, got '" + std::string(s) + "'");
}

struct ClassifierSettings {
  ClassifierKind kind = ClassifierKind::gbt;
  GbtConfig gbt;
  SvmConfig svm;
};

// Falls back to a constant model while fewer than two classes are known.
inline std::unique_ptr<ClassifierModel> fit_classifier(const ClassifierSettings& settings,
                                                       const Matrix& rows,
                                                       const std::vector<std::size_t>& labels,
                                                       std::size_t num_classes) {
  const auto present = detail::present_classes(rows, labels, num_classes);
  if (present.size() < 2) {
    return std::make_unique<ConstantModel>(detail::one_hot(present[0], num_classes),
                                           "single-class training set; constant model");
  }
  if (settings.kind == ClassifierKind::gbt) return gbt_fit(rows, labels, num_classes, settings.gbt);
  return svm_rbf_fit(rows, labels, num_classes, settings.svm);
}

struct IndexTriple {
  double silhouette = std::numeric_limits<double>::quiet_NaN();
  double dunn = std::numeric_limits<double>::quiet_NaN();
  double davies_bouldin = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsRow {
  std::size_t iteration = 0;
  std::size_t labels_seen = 0;
  IndexTriple orig;  // base feature space
  IndexTriple aug;   // space the clustering was computed in
};

// Each index is computed independently; an undefined index stays NaN.
inline IndexTriple score_indices(const Matrix& points, const std::vector<std::size_t>& assignments) {
  IndexTriple t;
  const auto labels = compact_labels(assignments);
  std::size_t k = 0;
  for (auto a : labels) k = std::max(k, a + 1);
  if (k < 2) return t;
  const auto summary = detail::pairwise_summary(points, labels, k);
  t.silhouette = detail::mean_of(summary.silhouette);
  if (summary.max_diameter > 0.0) t.dunn = summary.min_separation / summary.max_diameter;
  try {
    t.davies_bouldin = davies_bouldin(points, labels);
  } catch (const Error&) {
  }
  return t;
}

inline const char* kMetricsHeader =
    "iteration,labels_seen,silhouette_orig,dunn_orig,davies_bouldin_orig,"
    "silhouette_aug,dunn_aug,davies_bouldin_aug";

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.labels_seen << ',' << r.orig.silhouette << ',' << r.orig.dunn
        << ',' << r.orig.davies_bouldin << ',' << r.aug.silhouette << ',' << r.aug.dunn << ','
        << r.aug.davies_bouldin << '\n';
  }
  out.precision(old_precision);
}

struct LoopConfig {
  std::size_t k = 190;
  BatchSpec batch;
  std::size_t iterations = 10;
  std::size_t num_classes = 0;
  ClassifierSettings classifier;
  PropagationConfig propagation;
  std::uint64_t seed = 0;
  MarginReading margin_reading = MarginReading::nearest;
  LloydOptions lloyd;
};

inline void validate(const LoopConfig& cfg) {
  require(cfg.k >= 2, ErrorCode::invalid_argument, "K must be >= 2");
  require(cfg.batch.batch_size >= 1, ErrorCode::invalid_argument, "batch size must be >= 1");
  require(cfg.num_classes >= 1, ErrorCode::invalid_argument, "taxonomy must not be empty");
  require(cfg.propagation.proba_weight > 0.0, ErrorCode::invalid_argument,
          "probability weight must be positive");
}

// Labels for the given row indices, same order.
using Oracle = std::function<std::vector<std::size_t>(const std::vector<std::size_t>&)>;

class ActiveLoop {
 public:
  ActiveLoop(Matrix base, LoopConfig cfg) : base_(std::move(base)), cfg_(std::move(cfg)) {
    validate(cfg_);
    require(base_.rows() >= static_cast<Eigen::Index>(cfg_.k), ErrorCode::invalid_argument,
            "fewer rows than clusters");
  }

  const LoopConfig& config() const { return cfg_; }
  const Matrix& base() const { return base_; }
  const Matrix& space() const { return started_ ? space_ : base_; }
  const Clustering& clustering() const { return clustering_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }
  const std::map<std::size_t, std::size_t>& labels() const { return labels_; }
  const std::vector<std::size_t>& pending() const { return pending_; }
  std::size_t iteration() const { return iteration_; }
  bool started() const { return started_; }
  bool finished() const { return started_ && iteration_ >= cfg_.iterations; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const Matrix& last_probabilities() const { return proba_; }

  std::size_t unlabeled_count() const {
    return static_cast<std::size_t>(base_.rows()) - labels_.size();
  }

  // Unsupervised baseline clustering and metrics row 0.
  const MetricsRow& start() {
    require(!started_, ErrorCode::conflict, "loop already started");
    space_ = base_;
    clustering_ = kmeans(space_, cfg_.k, cfg_.seed, cfg_.lloyd);
    const IndexTriple t = score_indices(base_, clustering_.assignments);
    metrics_.push_back({0, 0, t, t});
    started_ = true;
    return metrics_.back();
  }

  // Steps 1-2. Returns the row indices awaiting labels; empty when the pool
  // is exhausted or the iteration budget is spent.
  const std::vector<std::size_t>& prepare_batch() {
    require(started_, ErrorCode::conflict, "loop not started");
    require(pending_.empty(), ErrorCode::conflict, "a batch is already pending");
    if (finished()) return pending_;
    if (unlabeled_count() == 0) {
      warnings_.push_back("iteration " + std::to_string(iteration_ + 1) +
                          ": unlabeled pool exhausted, nothing to select");
      return pending_;
    }
    if (iteration_ > 0) clustering_ = lloyd(space_, clustering_.centroids, cfg_.lloyd);

    BatchSpec spec = cfg_.batch;
    if (unlabeled_count() < spec.batch_size) {
      warnings_.push_back("batch shrunk to the " + std::to_string(unlabeled_count()) +
                          " remaining unlabeled rows");
      spec.batch_size = unlabeled_count();
    }
    std::unordered_set<std::size_t> exclude;
    for (const auto& [row, _] : labels_) exclude.insert(row);
    const auto reports = margins(space_, clustering_.centroids, cfg_.margin_reading);
    last_selection_ = select_batch(reports, clustering_.assignments, spec, exclude);
    pending_ = last_selection_.points;
    return pending_;
  }

  const BatchSelection& last_selection() const { return last_selection_; }

  // Steps 4-8 once every pending row has a label. `labels` follows the
  // order of pending().
  const MetricsRow& complete_iteration(const std::vector<std::size_t>& batch_labels) {
    require(!pending_.empty(), ErrorCode::conflict, "no pending batch");
    require(batch_labels.size() == pending_.size(), ErrorCode::invalid_argument,
            "expected " + std::to_string(pending_.size()) + " labels, got " +
                std::to_string(batch_labels.size()));
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      require(batch_labels[i] < cfg_.num_classes, ErrorCode::out_of_range,
              "label " + std::to_string(batch_labels[i]) + " outside [0, " +
                  std::to_string(cfg_.num_classes) + ")");
      labels_.emplace(pending_[i], batch_labels[i]);
    }
    pending_.clear();

    // 4-5
    Matrix rows(static_cast<Eigen::Index>(labels_.size()), base_.cols());
    std::vector<std::size_t> y;
    y.reserve(labels_.size());
    Eigen::Index r = 0;
    for (const auto& [row, label] : labels_) {
      rows.row(r++) = base_.row(static_cast<Eigen::Index>(row));
      y.push_back(label);
    }
    const auto model = fit_classifier(cfg_.classifier, rows, y, cfg_.num_classes);
    for (const auto& w : model->warnings()) {
      warnings_.push_back("iteration " + std::to_string(iteration_ + 1) + ": " + w);
    }
    proba_ = model->predict_proba(base_);

    // 6-7, warm start from the previous partition's means in the new space
    space_ = augment(base_, proba_, cfg_.propagation, labels_).values;
    Matrix warm = Matrix::Zero(static_cast<Eigen::Index>(cfg_.k), space_.cols());
    std::vector<std::size_t> sizes(cfg_.k, 0);
    for (std::size_t i = 0; i < clustering_.assignments.size(); ++i) {
      warm.row(static_cast<Eigen::Index>(clustering_.assignments[i])) +=
          space_.row(static_cast<Eigen::Index>(i));
      ++sizes[clustering_.assignments[i]];
    }
    for (std::size_t c = 0; c < cfg_.k; ++c) {
      if (sizes[c] > 0) warm.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    }
    clustering_ = lloyd(space_, warm, cfg_.lloyd);

    // 8
    ++iteration_;
    metrics_.push_back({iteration_, labels_.size(), score_indices(base_, clustering_.assignments),
                        score_indices(space_, clustering_.assignments)});
    return metrics_.back();
  }

  // Full iteration against an in-process oracle. Returns false when there
  // was nothing left to label.
  bool run_iteration(const Oracle& oracle) {
    if (!started_) start();
    if (pending_.empty()) prepare_batch();
    if (pending_.empty()) return false;
    complete_iteration(oracle(pending_));
    return true;
  }

 private:
  Matrix base_;
  LoopConfig cfg_;
  Matrix space_;
  Matrix proba_;
  Clustering clustering_;
  BatchSelection last_selection_;
  std::vector<MetricsRow> metrics_;
  std::map<std::size_t, std::size_t> labels_;
  std::vector<std::size_t> pending_;
  std::vector<std::string> warnings_;
  std::size_t iteration_ = 0;
  bool started_ = false;
};

}  // namespace shotclust
