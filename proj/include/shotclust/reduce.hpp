#pragma once

// Randomized truncated SVD (Gaussian range sketch, subspace power
// iterations, exact SVD of the small projected matrix) and the PCA built
// on top of it.

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"
#include "shotclust/random.hpp"

namespace shotclust {

struct SvdResult {
  Eigen::MatrixXd U;  // rows x k, orthonormal columns
  Vector S;           // k, non-negative, non-increasing
  Eigen::MatrixXd V;  // cols x k, orthonormal columns

  Eigen::MatrixXd reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

struct RsvdOptions {
  Eigen::Index oversampling = 10;
  int power_iters = 4;
  std::uint64_t rng_seed = 0;
};

namespace detail {

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace detail

template <typename Derived>
SvdResult randomized_svd(const Eigen::MatrixBase<Derived>& a, Eigen::Index n_components,
                         const RsvdOptions& opt = {}) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const Eigen::Index limit = std::min(rows, cols);
  require(n_components >= 1 && n_components <= limit, ErrorCode::out_of_range,
          "n_components " + std::to_string(n_components) + " outside [1, " +
              std::to_string(limit) + "]");
  require(opt.oversampling >= 0 && opt.power_iters >= 0, ErrorCode::invalid_argument,
          "oversampling and power iterations must be non-negative");
  const Eigen::Index sketch = std::min(n_components + opt.oversampling, limit);

  Rng rng(opt.rng_seed);
  Eigen::MatrixXd omega(cols, sketch);
  for (Eigen::Index c = 0; c < sketch; ++c) {
    for (Eigen::Index r = 0; r < cols; ++r) omega(r, c) = rng.normal();
  }

  Eigen::MatrixXd q = detail::orthonormal_basis(a * omega);
  for (int it = 0; it < opt.power_iters; ++it) {
    const Eigen::MatrixXd z = detail::orthonormal_basis(a.transpose() * q);
    q = detail::orthonormal_basis(a * z);
  }

  const Eigen::MatrixXd b = q.transpose() * a;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SvdResult out;
  out.U = q * svd.matrixU().leftCols(n_components);
  out.S = svd.singularValues().head(n_components);
  out.V = svd.matrixV().leftCols(n_components);
  return out;
}

struct PcaModel {
  Vector mean;
  Matrix basis;  // components x features, orthonormal rows
  Vector explained_variance_ratio;
  Vector singular_values;

  Eigen::Index components() const { return basis.rows(); }
  Eigen::Index features() const { return basis.cols(); }
};

// Component count is capped by min(rows, cols).
inline PcaModel fit_pca(const Matrix& m, Eigen::Index max_components = 1000,
                        const RsvdOptions& opt = {}) {
  require(m.rows() >= 2, ErrorCode::invalid_argument, "PCA needs at least 2 rows");
  require(max_components >= 1, ErrorCode::invalid_argument, "max_components must be >= 1");
  PcaModel model;
  model.mean = m.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.rowwise() - model.mean.transpose();
  const double total = centered.squaredNorm();
  require(total > 0.0, ErrorCode::degenerate, "PCA input has zero variance");

  const Eigen::Index k = std::min({max_components, m.rows(), m.cols()});
  const SvdResult svd = randomized_svd(centered, k, opt);
  model.basis = svd.V.transpose();
  model.singular_values = svd.S;
  model.explained_variance_ratio = svd.S.array().square() / total;
  return model;
}

// Keeps the prefix that ends at the first component (after the first)
// whose individual contribution falls below `marginal_epsilon`.
inline Eigen::Index select_components(const Vector& ratios, double marginal_epsilon = 0.001) {
  require(ratios.size() > 0, ErrorCode::invalid_argument, "no explained-variance ratios");
  for (Eigen::Index i = 1; i < ratios.size(); ++i) {
    if (ratios[i] < marginal_epsilon) return i;
  }
  return ratios.size();
}

inline FeatureMatrix project(const Matrix& m, const PcaModel& model, Eigen::Index m_components) {
  require(m.cols() == model.features(), ErrorCode::invalid_argument,
          "projection expects " + std::to_string(model.features()) + " columns, got " +
              std::to_string(m.cols()));
  require(m_components >= 1 && m_components <= model.components(), ErrorCode::out_of_range,
          "m_components " + std::to_string(m_components) + " outside [1, " +
              std::to_string(model.components()) + "]");
  FeatureMatrix out;
  out.values = (m.rowwise() - model.mean.transpose()) *
               model.basis.topRows(m_components).transpose();
  out.stage = Stage::reduced;
  return out;
}

inline Matrix reconstruct(const Matrix& projected, const PcaModel& model) {
  Matrix out = projected * model.basis.topRows(projected.cols());
  out.rowwise() += model.mean.transpose();
  return out;
}

inline void save_pca(const std::filesystem::path& path, const PcaModel& model) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  io::write_bundle(out, {{"mean", model.mean.transpose(), Stage::raw},
                         {"basis", model.basis, Stage::raw},
                         {"ratios", model.explained_variance_ratio.transpose(), Stage::raw}});
  require(static_cast<bool>(out), ErrorCode::io_error, "write failed: " + path.string());
}

inline PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  const auto sections = io::read_bundle(in);
  PcaModel model;
  bool have_mean = false, have_basis = false, have_ratios = false;
  for (const auto& s : sections) {
    if (s.name == "mean") {
      model.mean = s.values.row(0).transpose();
      have_mean = true;
    } else if (s.name == "basis") {
      model.basis = s.values;
      have_basis = true;
    } else if (s.name == "ratios") {
      model.explained_variance_ratio = s.values.row(0).transpose();
      have_ratios = true;
    }
  }
  require(have_mean && have_basis && have_ratios, ErrorCode::parse_error,
          "PCA file missing a mean, basis or ratios section");
  require(model.mean.size() == model.basis.cols() &&
              model.explained_variance_ratio.size() == model.basis.rows(),
          ErrorCode::parse_error, "PCA file sections have inconsistent shapes");
  return model;
}

}  // namespace shotclust
