#include <cmath>

#include "kernels_impl.hpp"

namespace qnopt::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void linear_combination_scalar(double a, const double* x, double b, const double* y, double* out,
                               std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void half_average_scalar(double* z, const double* t, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) z[i] = 0.5 * (z[i] + t[i]);
}

void quantize_round_scalar(const double* x, double delta, double* out, std::size_t n) {
  // std::round breaks ties away from zero.
  for (std::size_t i = 0; i < n; ++i) out[i] = delta * std::round(x[i] / delta);
}

// x / delta can land one ulp on the wrong side of an integer, so the
// index is nudged until k*delta <= x < (k+1)*delta holds for the
// products actually produced. This keeps floor/ceil idempotent.
void quantize_floor_scalar(const double* x, double delta, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double k = std::floor(x[i] / delta);
    if (k * delta > x[i]) {
      k -= 1.0;
    } else if ((k + 1.0) * delta <= x[i]) {
      k += 1.0;
    }
    out[i] = k * delta;
  }
}

void quantize_ceil_scalar(const double* x, double delta, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double k = std::ceil(x[i] / delta);
    if (k * delta < x[i]) {
      k += 1.0;
    } else if ((k - 1.0) * delta >= x[i]) {
      k -= 1.0;
    }
    out[i] = k * delta;
  }
}

void sparsify_scalar(const double* x, double theta, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(x[i]) < theta ? 0.0 : x[i];
}

}  // namespace qnopt::kernels::detail
