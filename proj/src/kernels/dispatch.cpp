#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_table.hpp"
#include "latentbench/kernels.hpp"

namespace latentbench::kernels {
namespace {

#if defined(LATENTBENCH_HAVE_AVX2)
bool cpu_has_avx2() noexcept {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}
#endif

const detail::KernelTable* table_for(Isa isa) noexcept {
  if (isa == Isa::scalar) return &detail::scalar_table();
#if defined(LATENTBENCH_HAVE_AVX2)
  if (cpu_has_avx2()) return detail::avx2_table();
#endif
  return nullptr;
}

Isa initial_isa() noexcept {
  if (const char* env = std::getenv("LATENTBENCH_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
  }
  return table_for(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

struct State {
  std::atomic<Isa> isa{initial_isa()};
  std::atomic<const detail::KernelTable*> table{table_for(isa.load())};
};

State& state() noexcept {
  static State s;
  return s;
}

inline const detail::KernelTable& t() noexcept {
  return *state().table.load(std::memory_order_relaxed);
}

}  // namespace

bool isa_available(Isa isa) noexcept { return table_for(isa) != nullptr; }

Isa active_isa() noexcept { return state().isa.load(); }

void set_isa(Isa isa) {
  const auto* table = table_for(isa);
  if (!table) throw std::invalid_argument("instruction set not available: " +
                                          std::string(isa_name(isa)));
  state().table.store(table);
  state().isa.store(isa);
}

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return t().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  return t().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  t().axpy(alpha, x.data(), y.data(), x.size());
}

double squared_weighted_sum(std::span<const double> row,
                            std::span<const double> w) noexcept {
  return t().squared_weighted_sum(row.data(), w.data(), row.size());
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k, bool accumulate) noexcept {
  t().gemm_nt(a, b, c, m, n, k, accumulate);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k, bool accumulate) noexcept {
  t().gemm_nn(a, b, c, m, n, k, accumulate);
}

}  // namespace latentbench::kernels
