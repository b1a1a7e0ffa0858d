#pragma once

#include <cstddef>
#include <vector>

#include "dc/matrix.hpp"

namespace dc {

struct SymmetricEigen {
  std::vector<double> values;  // non-increasing
  Matrix vectors;              // column j pairs with values[j]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Each eigenvector is
// sign-normalized so that its largest-magnitude entry is positive.
SymmetricEigen symmetric_eigen(const Matrix& a, double tol = 1e-14, int max_sweeps = 100);

// Population covariance (1/N normalization) and column means.
Matrix covariance(const Matrix& x, std::vector<double>* mean_out = nullptr);

// PCA whitening: y = (x - mean) · projection, where column j of the projection
// is the j-th principal axis scaled by 1 / sqrt(eigenvalue_j + epsilon).
struct WhiteningTransform {
  std::vector<double> mean;
  Matrix projection;                // input_dim × output_dim
  std::vector<double> eigenvalues;  // kept eigenvalues, non-increasing
  double epsilon = 1e-5;

  std::size_t input_dim() const noexcept { return projection.rows(); }
  std::size_t output_dim() const noexcept { return projection.cols(); }
};

inline constexpr double kDefaultWhiteningEpsilon = 1e-5;

// target_dim == 0 keeps every component.
WhiteningTransform fit_whitening(const Matrix& features, std::size_t target_dim = 0,
                                 double epsilon = kDefaultWhiteningEpsilon);
Matrix apply_whitening(const WhiteningTransform& t, const Matrix& features);

// Scales every nonzero row to unit Euclidean norm; zero rows stay zero.
Matrix l2_normalize_rows(Matrix features);

}  // namespace dc
