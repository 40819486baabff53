#pragma once

// Vector kernels used in the hot loops (message quantization, consensus
// updates, logistic gradients). Every kernel has a portable scalar
// reference; SIMD variants are selected at runtime when the CPU supports
// them. Elementwise kernels are bit-identical across backends; reductions
// agree to rounding.

#include <span>
#include <string_view>
#include <vector>

namespace qnopt::kernels {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a * x + b * y
  void (*linear_combination)(double a, const double* x, double b, const double* y, double* out,
                             std::size_t n);
  // z = 0.5 * (z + t)
  void (*half_average)(double* z, const double* t, std::size_t n);
  // out = delta * round_half_away(x / delta)
  void (*quantize_round)(const double* x, double delta, double* out, std::size_t n);
  // out = largest lattice point k*delta with k*delta <= x
  void (*quantize_floor)(const double* x, double delta, double* out, std::size_t n);
  // out = smallest lattice point k*delta with k*delta >= x
  void (*quantize_ceil)(const double* x, double delta, double* out, std::size_t n);
  // out = x where |x| >= theta, else 0
  void (*sparsify)(const double* x, double theta, double* out, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
// nullptr when the variant was not compiled in.
const KernelTable* avx2_table() noexcept;

bool cpu_supports(Backend b) noexcept;
std::vector<Backend> available_backends();

// Kernel table used by the library. Defaults to the widest supported
// backend; the QNOPT_KERNELS environment variable ("scalar" / "avx2")
// overrides the choice at first use.
const KernelTable& active() noexcept;
void set_backend(Backend b);
const KernelTable& table_for(Backend b);

// Convenience wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline double squared_norm(std::span<const double> a) { return active().dot(a.data(), a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace qnopt::kernels
