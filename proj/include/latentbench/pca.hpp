#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "latentbench/matrix.hpp"
#include "latentbench/model_io.hpp"

namespace latentbench {

struct PcaModel {
  std::vector<double> mean;               // p
  Matrix components;                      // d x p, orthonormal rows
  std::vector<double> explained_variance; // d, non-increasing

  std::size_t p() const noexcept { return mean.size(); }
  std::size_t d() const noexcept { return components.rows(); }
};

enum class PcaSolver {
  automatic,   // covariance when p <= n, Gram otherwise
  covariance,  // eigendecomposition of the p x p sample covariance
  gram,        // eigendecomposition of the n x n centered Gram matrix
};

/// Top-d principal axes of `rows` (sample covariance, divisor n-1). Each
/// component's largest-magnitude entry is positive.
PcaModel pca_fit(const Matrix& rows, std::size_t d, PcaSolver solver = PcaSolver::automatic);

/// (x - mean) * components^T
Matrix pca_transform(const PcaModel& model, const Matrix& rows);
/// y * components + mean
Matrix pca_inverse_transform(const PcaModel& model, const Matrix& embedded);

void save_pca(const PcaModel& model, ModelWriter& out);
PcaModel load_pca(const ModelReader& in);

}  // namespace latentbench
