#include "dc/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dc/error.hpp"

namespace dc {

SymmetricEigen symmetric_eigen(const Matrix& input, double tol, int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw std::invalid_argument("symmetric_eigen: matrix is not square");
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (double x : a.values()) scale = std::max(scale, std::abs(x));

  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol * std::max(scale, 1e-300); ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.values[j] = a(src, src);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::abs(v(k, src)) > std::abs(v(arg, src))) arg = k;
    const double sign = v(arg, src) < 0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = sign * v(k, src);
  }
  return out;
}

Matrix covariance(const Matrix& x, std::vector<double>* mean_out) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);

  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - mean[j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += centered[i] * centered[j];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }
  if (mean_out) *mean_out = std::move(mean);
  return cov;
}

WhiteningTransform fit_whitening(const Matrix& features, std::size_t target_dim, double epsilon) {
  const std::size_t d = features.cols();
  if (features.rows() < 2) throw std::invalid_argument("fit_whitening: need at least 2 rows");
  if (target_dim > d)
    throw std::invalid_argument("fit_whitening: target_dim " + std::to_string(target_dim) +
                                " exceeds feature dimension " + std::to_string(d));
  if (!(epsilon > 0.0)) throw std::invalid_argument("fit_whitening: epsilon must be positive");
  require_finite(features, "fit_whitening input");

  WhiteningTransform t;
  t.epsilon = epsilon;
  const Matrix cov = covariance(features, &t.mean);

  double magnitude = 1.0;
  for (double x : features.values()) magnitude = std::max(magnitude, std::abs(x));
  const double floor = std::pow(64.0 * std::numeric_limits<double>::epsilon() * magnitude, 2);

  SymmetricEigen eig = symmetric_eigen(cov);
  if (d == 0 || eig.values.front() <= floor) {
    std::string cols;
    for (std::size_t j = 0; j < d; ++j) {
      if (cov(j, j) <= floor) cols += (cols.empty() ? "" : ",") + std::to_string(j);
    }
    throw NumericalError("fit_whitening: covariance has rank 0; constant feature columns: [" +
                         cols + "]");
  }

  const std::size_t p = target_dim == 0 ? d : target_dim;
  t.projection = Matrix(d, p);
  t.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(p));
  for (std::size_t j = 0; j < p; ++j) {
    // Tiny negative eigenvalues are rounding noise of a PSD matrix.
    const double lambda = std::max(eig.values[j], 0.0);
    const double scale = 1.0 / std::sqrt(lambda + epsilon);
    for (std::size_t i = 0; i < d; ++i) t.projection(i, j) = eig.vectors(i, j) * scale;
  }
  return t;
}

Matrix apply_whitening(const WhiteningTransform& t, const Matrix& features) {
  if (features.cols() != t.mean.size())
    throw std::invalid_argument("apply_whitening: features have " +
                                std::to_string(features.cols()) + " columns, transform expects " +
                                std::to_string(t.mean.size()));
  Matrix centered = features;
  for (std::size_t r = 0; r < centered.rows(); ++r) {
    auto row = centered.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= t.mean[j];
  }
  return matmul(centered, t.projection);
}

Matrix l2_normalize_rows(Matrix features) {
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    const double norm = std::sqrt(squared_norm(row));
    if (norm == 0.0) continue;
    for (auto& x : row) x /= norm;
  }
  return features;
}

}  // namespace dc
