#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "qnopt/error.hpp"

namespace qnopt::kernels {
namespace {

const KernelTable kScalarTable{
    Backend::Scalar,
    "scalar",
    &detail::dot_scalar,
    &detail::squared_distance_scalar,
    &detail::axpy_scalar,
    &detail::linear_combination_scalar,
    &detail::half_average_scalar,
    &detail::quantize_round_scalar,
    &detail::quantize_floor_scalar,
    &detail::quantize_ceil_scalar,
    &detail::sparsify_scalar,
};

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("QNOPT_KERNELS")) {
    const std::string choice(env);
    if (choice == "scalar") return &kScalarTable;
    if (choice == "avx2" && cpu_supports(Backend::Avx2)) return avx2_table();
  }
  if (cpu_supports(Backend::Avx2)) return avx2_table();
  return &kScalarTable;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalarTable; }

const KernelTable* avx2_table() noexcept {
#ifdef QNOPT_HAVE_AVX2
  return &detail::kAvx2Table;
#else
  return nullptr;
#endif
}

bool cpu_supports(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(QNOPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::Scalar};
  if (cpu_supports(Backend::Avx2)) out.push_back(Backend::Avx2);
  return out;
}

const KernelTable& table_for(Backend b) {
  require(cpu_supports(b), ErrorCode::Unsupported, "kernel backend not supported on this CPU");
  return b == Backend::Avx2 ? *avx2_table() : kScalarTable;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

void set_backend(Backend b) { current().store(&table_for(b), std::memory_order_release); }

}  // namespace qnopt::kernels
