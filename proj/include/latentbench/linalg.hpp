#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "latentbench/matrix.hpp"

namespace latentbench {

/// Leading eigenpairs, largest eigenvalue first. vectors is n x d with one
/// eigenvector per column.
struct EigenPairs {
  std::vector<double> values;
  Matrix vectors;
  std::size_t iterations = 0;  // Lanczos steps, 0 for the dense solver
};

/// Flips v so that its entry of largest magnitude (lowest index on ties) is
/// positive.
void orient_sign(std::span<double> v) noexcept;

/// Dense symmetric eigensolver, top d by algebraic value.
EigenPairs top_eigenpairs_dense(const Matrix& symmetric, std::size_t d);

using MatVec = std::function<void(std::span<const double> in, std::span<double> out)>;

struct LanczosOptions {
  double tolerance = 1e-11;        // residual relative to the largest |Ritz value|
  std::size_t max_basis = 0;       // 0 -> min(n, max(6d, d + 200))
  std::uint64_t seed = 0x1a2b3c4d;
  bool deflate_constant = false;   // keep the basis orthogonal to the ones vector
};

/// Lanczos with full reorthogonalization for the top d eigenpairs of a
/// symmetric operator given only through products.
EigenPairs top_eigenpairs_lanczos(const MatVec& op, std::size_t n, std::size_t d,
                                  const LanczosOptions& options = {});

}  // namespace latentbench
