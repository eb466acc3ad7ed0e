#pragma once

// RBF-kernel support vector machine.
//
// Binary problems are solved by SMO with maximal-violating-pair working set
// selection on a precomputed kernel matrix. Decision values are mapped to
// probabilities with Platt's sigmoid fitted on the training decision
// values. More than two classes are handled one-vs-rest with the per-class
// probabilities renormalised.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "shotclust/classifier.hpp"

namespace shotclust {

struct SvmConfig {
  double C = 1.0;
  double gamma = 0.0;  // <= 0 selects 1 / feature count
  double tol = 1e-3;
  std::size_t max_passes = 200;  // iteration cap is max_passes * rows
};

inline Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix k = -2.0 * (a * b.transpose());
  k.colwise() += na;
  k.rowwise() += nb.transpose();
  return (-gamma * k.array().max(0.0)).exp().matrix();
}

struct BinarySvm {
  Vector coef;  // alpha_i * y_i over the training rows
  double rho = 0.0;
  std::size_t iterations = 0;

  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& kernel_row) const {
    return kernel_row.dot(coef) - rho;
  }
};

// y in {-1, +1}. Dual: min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0.
inline BinarySvm smo_solve(const Matrix& kernel, const std::vector<int>& y, const SvmConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(y.size());
  constexpr double tau = 1e-12;
  const double c = cfg.C;
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> grad(static_cast<std::size_t>(n), -1.0);
  auto q = [&](Eigen::Index i, Eigen::Index j) {
    return static_cast<double>(y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)]) *
           kernel(i, j);
  };
  auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  BinarySvm out;
  const std::size_t max_iter = std::max<std::size_t>(cfg.max_passes, 1) * static_cast<std::size_t>(n);
  while (out.iterations < max_iter) {
    // i maximises -y G over I_up, j minimises it over I_low
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto s = static_cast<std::size_t>(t);
      if (y[s] == 1 ? !upper(s) : !lower(s)) {
        const double v = -y[s] * grad[s];
        if (v > gmax) {
          gmax = v;
          i = t;
        }
      }
      if (y[s] == 1 ? !lower(s) : !upper(s)) {
        const double v = y[s] * grad[s];
        if (v > gmax2) {
          gmax2 = v;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < cfg.tol) break;
    ++out.iterations;

    const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
    const double old_i = alpha[si], old_j = alpha[sj];
    if (y[si] != y[sj]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad[si] - grad[sj]) / quad;
      const double diff = alpha[si] - alpha[sj];
      alpha[si] += delta;
      alpha[sj] += delta;
      if (diff > 0.0) {
        if (alpha[sj] < 0.0) { alpha[sj] = 0.0; alpha[si] = diff; }
      } else {
        if (alpha[si] < 0.0) { alpha[si] = 0.0; alpha[sj] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[si] > c) { alpha[si] = c; alpha[sj] = c - diff; }
      } else {
        if (alpha[sj] > c) { alpha[sj] = c; alpha[si] = c + diff; }
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (grad[si] - grad[sj]) / quad;
      const double sum = alpha[si] + alpha[sj];
      alpha[si] -= delta;
      alpha[sj] += delta;
      if (sum > c) {
        if (alpha[si] > c) { alpha[si] = c; alpha[sj] = sum - c; }
      } else {
        if (alpha[sj] < 0.0) { alpha[sj] = 0.0; alpha[si] = sum; }
      }
      if (sum > c) {
        if (alpha[sj] > c) { alpha[sj] = c; alpha[si] = sum - c; }
      } else {
        if (alpha[si] < 0.0) { alpha[si] = 0.0; alpha[sj] = sum; }
      }
    }
    const double di = alpha[si] - old_i, dj = alpha[sj] - old_j;
    for (Eigen::Index t = 0; t < n; ++t) {
      grad[static_cast<std::size_t>(t)] += q(i, t) * di + q(j, t) * dj;
    }
  }

  // rho: average of y G over free vectors, else the midpoint of the bounds
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  out.rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  out.coef.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    out.coef[t] = alpha[static_cast<std::size_t>(t)] * y[static_cast<std::size_t>(t)];
  }
  return out;
}

// Platt sigmoid P(y=+1 | f) = 1 / (1 + exp(A f + B)), Newton's method with
// backtracking on regularised targets.
struct PlattSigmoid {
  double a = 0.0, b = 0.0;

  double operator()(double f) const {
    const double z = a * f + b;
    return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  }
};

inline PlattSigmoid platt_fit(const std::vector<double>& dec, const std::vector<int>& y) {
  double prior1 = 0.0, prior0 = 0.0;
  for (int v : y) (v > 0 ? prior1 : prior0) += 1.0;
  constexpr int max_iter = 100;
  constexpr double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = dec.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0 ? hi : lo;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  PlattSigmoid s{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0))};
  double fval = objective(s.a, s.b);
  for (int iter = 0; iter < max_iter; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * s.a + s.b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= min_step) {
      const double na = s.a + step * da, nb = s.b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        s = {na, nb};
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < min_step) break;
  }
  return s;
}

class SvmModel final : public ClassifierModel {
 public:
  static constexpr double kMinProb = 1e-7;

  std::size_t num_classes() const override { return num_classes_; }

  Matrix predict_proba(const Matrix& rows) const override {
    Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(num_classes_));
    constexpr Eigen::Index chunk = 1024;
    for (Eigen::Index start = 0; start < rows.rows(); start += chunk) {
      const auto len = std::min(chunk, rows.rows() - start);
      const Matrix k = rbf_kernel(rows.middleRows(start, len), train_, gamma_);
      for (Eigen::Index r = 0; r < len; ++r) {
        auto clamp = [](double p) { return std::clamp(p, kMinProb, 1.0 - kMinProb); };
        if (classes_.size() == 2) {
          const double p = clamp(sigmoids_[0](machines_[0].decision(k.row(r))));
          out(start + r, static_cast<Eigen::Index>(classes_[0])) = p;
          out(start + r, static_cast<Eigen::Index>(classes_[1])) = 1.0 - p;
          continue;
        }
        double total = 0.0;
        for (std::size_t c = 0; c < classes_.size(); ++c) {
          const double p = clamp(sigmoids_[c](machines_[c].decision(k.row(r))));
          out(start + r, static_cast<Eigen::Index>(classes_[c])) = p;
          total += p;
        }
        out.row(start + r) /= total;
      }
    }
    return out;
  }

  // Raw decision values, one column per binary machine.
  Matrix decision_values(const Matrix& rows) const {
    const Matrix k = rbf_kernel(rows, train_, gamma_);
    Matrix out(rows.rows(), static_cast<Eigen::Index>(machines_.size()));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      for (std::size_t c = 0; c < machines_.size(); ++c) {
        out(r, static_cast<Eigen::Index>(c)) = machines_[c].decision(k.row(r));
      }
    }
    return out;
  }

  double gamma() const { return gamma_; }

  friend std::unique_ptr<ClassifierModel> svm_rbf_fit(const Matrix&, const std::vector<std::size_t>&,
                                                      std::size_t, const SvmConfig&);

 private:
  std::size_t num_classes_ = 0;
  std::vector<std::size_t> classes_;
  Matrix train_;
  double gamma_ = 0.0;
  std::vector<BinarySvm> machines_;
  std::vector<PlattSigmoid> sigmoids_;
};

inline std::unique_ptr<ClassifierModel> svm_rbf_fit(const Matrix& rows,
                                                    const std::vector<std::size_t>& labels,
                                                    std::size_t num_classes,
                                                    const SvmConfig& cfg = {}) {
  require(cfg.C > 0.0, ErrorCode::invalid_argument, "SVM C must be positive");
  require(cfg.tol > 0.0, ErrorCode::invalid_argument, "SVM tol must be positive");
  require(rows.cols() >= 1, ErrorCode::invalid_argument, "SVM needs at least one feature");
  const auto present = detail::present_classes(rows, labels, num_classes);
  require(present.size() >= 2, ErrorCode::invalid_argument,
          "SVM needs at least two classes in the training set");

  auto model = std::make_unique<SvmModel>();
  model->num_classes_ = num_classes;
  model->classes_ = present;
  model->train_ = rows;
  model->gamma_ = cfg.gamma > 0.0 ? cfg.gamma : 1.0 / static_cast<double>(rows.cols());
  const Matrix kernel = rbf_kernel(rows, rows, model->gamma_);

  const std::size_t machines = present.size() == 2 ? 1 : present.size();
  std::vector<int> y(labels.size());
  std::vector<double> dec(labels.size());
  for (std::size_t m = 0; m < machines; ++m) {
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == present[m] ? 1 : -1;
    BinarySvm svm = smo_solve(kernel, y, cfg);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      dec[i] = svm.decision(kernel.row(static_cast<Eigen::Index>(i)));
    }
    model->sigmoids_.push_back(platt_fit(dec, y));
    model->machines_.push_back(std::move(svm));
  }
  return model;
}

}  // namespace shotclust
