#pragma once

#include <cstddef>

namespace latentbench::kernels::detail {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  double (*squared_distance)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
  double (*squared_weighted_sum)(const double*, const double*, std::size_t) noexcept;
  void (*gemm_nt)(const double*, const double*, double*, std::size_t, std::size_t,
                  std::size_t, bool) noexcept;
  void (*gemm_nn)(const double*, const double*, double*, std::size_t, std::size_t,
                  std::size_t, bool) noexcept;
};

const KernelTable& scalar_table() noexcept;
// Returns nullptr when the build has no AVX2 translation unit.
const KernelTable* avx2_table() noexcept;

}  // namespace latentbench::kernels::detail
