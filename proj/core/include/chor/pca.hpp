#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "chor/tensor.hpp"

namespace chor {

/// Linear projection onto the leading principal axes of a data matrix.
struct PcaModel {
  std::vector<double> mean;                      // dim
  Tensor components;                             // k x dim, orthonormal rows
  std::vector<double> explained_variance;        // k eigenvalues, population (1/N) normalisation
  std::vector<double> explained_variance_ratio;  // k, nonincreasing
  double discarded_variance = 0.0;               // sum of the eigenvalues not kept

  std::size_t k() const { return explained_variance.size(); }
  std::size_t dim() const { return mean.size(); }

  /// y = components * (x - mean)
  std::vector<double> transform(std::span<const double> x) const;
  /// Row-wise transform of an (n x dim) row-major block.
  std::vector<double> transform_rows(std::span<const double> rows) const;
  /// x = components^T * y + mean
  std::vector<double> inverse(std::span<const double> y) const;
  std::vector<double> inverse_rows(std::span<const double> rows) const;
};

/// Fits on the rows of an (rows x dim) row-major matrix via SVD of the centred
/// data. k is the smallest count whose cumulative explained variance reaches
/// `variance_target`, capped at the numerical rank. Each component is signed
/// so its largest-magnitude entry is positive.
/// Throws InvalidArgument for fewer than 2 rows, a target outside (0, 1], or
/// constant data.
PcaModel pca_fit(std::span<const double> data, std::size_t rows, std::size_t dim, double variance_target);

}  // namespace chor
