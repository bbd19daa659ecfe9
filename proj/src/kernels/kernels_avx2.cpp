// Compiled with -mavx2 -mfma; only reached after a runtime CPUID check.
#include <immintrin.h>

#include "kernel_table.hpp"

namespace latentbench::kernels::detail {
namespace {

inline double hsum(__m256d v) noexcept {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_weighted_sum(const double* row, const double* w, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d r0 = _mm256_loadu_pd(row + i);
    const __m256d r1 = _mm256_loadu_pd(row + i + 4);
    acc0 = _mm256_fmadd_pd(_mm256_mul_pd(r0, r0), _mm256_loadu_pd(w + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_mul_pd(r1, r1), _mm256_loadu_pd(w + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d r0 = _mm256_loadu_pd(row + i);
    acc0 = _mm256_fmadd_pd(_mm256_mul_pd(r0, r0), _mm256_loadu_pd(w + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += row[i] * row[i] * w[i];
  return s;
}

// One row of a against four rows of b per pass.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k, bool accumulate) noexcept {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t l = 0;
      for (; l + 4 <= k; l += 4) {
        const __m256d va = _mm256_loadu_pd(ai + l);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + l), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + l), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + l), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + l), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; l < k; ++l) {
        r0 += ai[l] * b0[l];
        r1 += ai[l] * b1[l];
        r2 += ai[l] * b2[l];
        r3 += ai[l] * b3[l];
      }
      if (accumulate) {
        ci[j] += r0; ci[j + 1] += r1; ci[j + 2] += r2; ci[j + 3] += r3;
      } else {
        ci[j] = r0; ci[j + 1] = r1; ci[j + 2] = r2; ci[j + 3] = r3;
      }
    }
    for (; j < n; ++j) {
      const double v = dot(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

// Keeps a 16-wide strip of the output row in registers across the k loop.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k, bool accumulate) noexcept {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0, c1, c2, c3;
      if (accumulate) {
        c0 = _mm256_loadu_pd(ci + j);
        c1 = _mm256_loadu_pd(ci + j + 4);
        c2 = _mm256_loadu_pd(ci + j + 8);
        c3 = _mm256_loadu_pd(ci + j + 12);
      } else {
        c0 = c1 = c2 = c3 = _mm256_setzero_pd();
      }
      for (std::size_t l = 0; l < k; ++l) {
        const __m256d va = _mm256_set1_pd(ai[l]);
        const double* bl = b + l * n + j;
        c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bl), c0);
        c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bl + 4), c1);
        c2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bl + 8), c2);
        c3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(bl + 12), c3);
      }
      _mm256_storeu_pd(ci + j, c0);
      _mm256_storeu_pd(ci + j + 4, c1);
      _mm256_storeu_pd(ci + j + 8, c2);
      _mm256_storeu_pd(ci + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = accumulate ? _mm256_loadu_pd(ci + j) : _mm256_setzero_pd();
      for (std::size_t l = 0; l < k; ++l)
        c0 = _mm256_fmadd_pd(_mm256_set1_pd(ai[l]), _mm256_loadu_pd(b + l * n + j), c0);
      _mm256_storeu_pd(ci + j, c0);
    }
    for (; j < n; ++j) {
      double s = accumulate ? ci[j] : 0.0;
      for (std::size_t l = 0; l < k; ++l) s += ai[l] * b[l * n + j];
      ci[j] = s;
    }
  }
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const KernelTable table{dot, squared_distance, axpy, squared_weighted_sum,
                                 gemm_nt, gemm_nn};
  return &table;
}

}  // namespace latentbench::kernels::detail
