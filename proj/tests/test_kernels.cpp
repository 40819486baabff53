#include <doctest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <vector>

#include "qnopt/kernels.hpp"
#include "qnopt/rng.hpp"

using namespace qnopt;
namespace k = qnopt::kernels;

namespace {

// Mixed magnitudes, exact ties, signed zeros and lattice-edge values.
std::vector<double> probe_inputs(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng) * 2.0 - 1.0;
    switch (i % 7) {
      case 0: x[i] = u * 1e3; break;
      case 1: x[i] = u * 1e-6; break;
      case 2: x[i] = std::round(u * 50.0) + 0.5; break;  // exact half
      case 3: x[i] = (i % 2 ? -0.0 : 0.0); break;
      case 4: x[i] = std::round(u * 100.0) * 0.1; break;  // near 0.1-lattice
      case 5: x[i] = u * 37.0; break;
      default: x[i] = -u * 0.05; break;
    }
  }
  return x;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar table is always available") {
    CHECK(k::scalar_table().backend == k::Backend::Scalar);
    CHECK(k::cpu_supports(k::Backend::Scalar));
    CHECK_FALSE(k::available_backends().empty());
  }

  TEST_CASE("scalar rounding ties away from zero") {
    const auto& s = k::scalar_table();
    std::vector<double> x = {0.5, -0.5, 1.5, -2.5, 0.49999999999999994, 0.0, -0.0};
    std::vector<double> out(x.size());
    s.quantize_round(x.data(), 1.0, out.data(), x.size());
    CHECK(out[0] == 1.0);
    CHECK(out[1] == -1.0);
    CHECK(out[2] == 2.0);
    CHECK(out[3] == -3.0);
    CHECK(out[4] == 0.0);
    CHECK_FALSE(std::signbit(out[5]));
    CHECK(std::signbit(out[6]));
  }

  TEST_CASE("floor and ceil land on the lattice on the correct side") {
    const auto& s = k::scalar_table();
    const double delta = 0.1;
    auto x = probe_inputs(997, 3);
    std::vector<double> lo(x.size()), hi(x.size());
    s.quantize_floor(x.data(), delta, lo.data(), x.size());
    s.quantize_ceil(x.data(), delta, hi.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(lo[i] <= x[i]);
      CHECK(hi[i] >= x[i]);
      CHECK(x[i] - lo[i] < delta);
      CHECK(hi[i] - x[i] < delta);
    }
  }

  TEST_CASE("every compiled backend matches the scalar reference") {
    const auto& ref = k::scalar_table();
    for (auto b : k::available_backends()) {
      const auto& t = k::table_for(b);
      CAPTURE(t.name);
      for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 64u, 1001u}) {
        CAPTURE(n);
        const auto x = probe_inputs(n, 11 + n);
        const auto y = probe_inputs(n, 97 + n);

        // Reductions: agree to rounding.
        const double d_ref = ref.dot(x.data(), y.data(), n), d = t.dot(x.data(), y.data(), n);
        double mag = 0.0;
        for (std::size_t i = 0; i < n; ++i) mag += std::fabs(x[i] * y[i]);
        CHECK(std::fabs(d - d_ref) <= 1e-14 * (mag + 1.0));
        const double s_ref = ref.squared_distance(x.data(), y.data(), n);
        CHECK(std::fabs(t.squared_distance(x.data(), y.data(), n) - s_ref) <= 1e-14 * (s_ref + 1.0));

        // Elementwise: bit identical.
        std::vector<double> a = y, b2 = y;
        ref.axpy(-0.37, x.data(), a.data(), n);
        t.axpy(-0.37, x.data(), b2.data(), n);
        CHECK(bit_equal(a, b2));

        std::vector<double> o1(n), o2(n);
        ref.linear_combination(0.3, x.data(), -1.7, y.data(), o1.data(), n);
        t.linear_combination(0.3, x.data(), -1.7, y.data(), o2.data(), n);
        CHECK(bit_equal(o1, o2));

        a = y;
        b2 = y;
        ref.half_average(a.data(), x.data(), n);
        t.half_average(b2.data(), x.data(), n);
        CHECK(bit_equal(a, b2));

        for (double delta : {1.0, 0.1, 1e-3, 1e-8, 3.7}) {
          ref.quantize_round(x.data(), delta, o1.data(), n);
          t.quantize_round(x.data(), delta, o2.data(), n);
          CHECK(bit_equal(o1, o2));
          ref.quantize_floor(x.data(), delta, o1.data(), n);
          t.quantize_floor(x.data(), delta, o2.data(), n);
          CHECK(bit_equal(o1, o2));
          ref.quantize_ceil(x.data(), delta, o1.data(), n);
          t.quantize_ceil(x.data(), delta, o2.data(), n);
          CHECK(bit_equal(o1, o2));
        }
        for (double theta : {0.0, 0.1, 5.0}) {
          ref.sparsify(x.data(), theta, o1.data(), n);
          t.sparsify(x.data(), theta, o2.data(), n);
          CHECK(bit_equal(o1, o2));
        }
      }
    }
  }

  TEST_CASE("in-place quantization is allowed") {
    for (auto b : k::available_backends()) {
      const auto& t = k::table_for(b);
      auto x = probe_inputs(33, 5);
      std::vector<double> expect(x.size());
      k::scalar_table().quantize_round(x.data(), 0.25, expect.data(), x.size());
      t.quantize_round(x.data(), 0.25, x.data(), x.size());
      CHECK(bit_equal(x, expect));
    }
  }

  TEST_CASE("backend switching") {
    const auto before = k::active().backend;
    k::set_backend(k::Backend::Scalar);
    CHECK(k::active().backend == k::Backend::Scalar);
    if (!k::cpu_supports(k::Backend::Avx2)) CHECK_THROWS(k::set_backend(k::Backend::Avx2));
    k::set_backend(before);
  }
}
