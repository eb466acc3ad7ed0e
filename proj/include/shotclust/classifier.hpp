#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

// Probability estimator trained on labelled rows. predict_proba returns one
// row per input with num_classes() non-negative entries summing to 1;
// classes absent from training get probability 0.
class ClassifierModel {
 public:
  virtual ~ClassifierModel() = default;

  virtual std::size_t num_classes() const = 0;
  virtual Matrix predict_proba(const Matrix& rows) const = 0;

  std::vector<std::size_t> predict(const Matrix& rows) const {
    const Matrix p = predict_proba(rows);
    std::vector<std::size_t> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      Eigen::Index arg;
      p.row(r).maxCoeff(&arg);
      out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(arg);
    }
    return out;
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

 protected:
  std::vector<std::string> warnings_;
};

// Always predicts the same distribution; used when only one class has been
// observed.
class ConstantModel final : public ClassifierModel {
 public:
  ConstantModel(Vector distribution, std::string warning) : distribution_(std::move(distribution)) {
    if (!warning.empty()) warnings_.push_back(std::move(warning));
  }

  std::size_t num_classes() const override { return static_cast<std::size_t>(distribution_.size()); }

  Matrix predict_proba(const Matrix& rows) const override {
    Matrix out(rows.rows(), distribution_.size());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) out.row(r) = distribution_.transpose();
    return out;
  }

 private:
  Vector distribution_;
};

namespace detail {

// Sorted distinct labels; validates the label range.
inline std::vector<std::size_t> present_classes(const Matrix& rows,
                                                const std::vector<std::size_t>& labels,
                                                std::size_t num_classes) {
  require(labels.size() == static_cast<std::size_t>(rows.rows()), ErrorCode::invalid_argument,
          "label count does not match the rows");
  require(!labels.empty(), ErrorCode::invalid_argument, "no training rows");
  require(num_classes >= 1, ErrorCode::invalid_argument, "need at least one class");
  std::vector<bool> seen(num_classes, false);
  for (auto y : labels) {
    require(y < num_classes, ErrorCode::out_of_range,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    seen[y] = true;
  }
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (seen[c]) present.push_back(c);
  }
  return present;
}

inline Vector one_hot(std::size_t cls, std::size_t num_classes) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(num_classes));
  v[static_cast<Eigen::Index>(cls)] = 1.0;
  return v;
}

}  // namespace detail
}  // namespace shotclust
