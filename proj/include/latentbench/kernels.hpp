#pragma once
// Dense double-precision inner-loop kernels with a scalar reference path and
// an AVX2/FMA path. The active instruction set is chosen once at startup from
// CPUID and may be pinned with LATENTBENCH_ISA=scalar|avx2 or set_isa().
//
// Every kernel in the AVX2 table is tested for equivalence against the scalar
// table (see tests/test_kernels.cpp). The two paths sum in different orders,
// so results agree to rounding, not bitwise. Within one process the chosen
// path is fixed, which keeps reruns bit-exact.

#include <cstddef>
#include <span>
#include <string_view>

namespace latentbench::kernels {

enum class Isa { scalar, avx2 };

/// True when the CPU (and the build) can run the given path.
bool isa_available(Isa isa) noexcept;
Isa active_isa() noexcept;
/// Pins the dispatch table. Throws std::invalid_argument if unavailable.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double squared_distance(std::span<const double> a,
                        std::span<const double> b) noexcept;
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
/// sum_i row[i]^2 * w[i]; the matvec of an elementwise-squared matrix.
double squared_weighted_sum(std::span<const double> row,
                            std::span<const double> w) noexcept;

/// c(m x n) = a(m x k) * b(n x k)^T, row-major. Adds into c when accumulate.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k, bool accumulate = false) noexcept;
/// c(m x n) = a(m x k) * b(k x n), row-major. Adds into c when accumulate.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k, bool accumulate = false) noexcept;

}  // namespace latentbench::kernels
