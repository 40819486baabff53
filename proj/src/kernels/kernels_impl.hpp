#pragma once

#include "qnopt/kernels.hpp"

namespace qnopt::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void linear_combination_scalar(double a, const double* x, double b, const double* y, double* out,
                               std::size_t n);
void half_average_scalar(double* z, const double* t, std::size_t n);
void quantize_round_scalar(const double* x, double delta, double* out, std::size_t n);
void quantize_floor_scalar(const double* x, double delta, double* out, std::size_t n);
void quantize_ceil_scalar(const double* x, double delta, double* out, std::size_t n);
void sparsify_scalar(const double* x, double theta, double* out, std::size_t n);

#ifdef QNOPT_HAVE_AVX2
extern const KernelTable kAvx2Table;
#endif

}  // namespace qnopt::kernels::detail
