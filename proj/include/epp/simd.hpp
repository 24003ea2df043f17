#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference
// implementation and an AVX2/FMA variant; the variant is chosen once at
// runtime from the CPU feature flags and can be overridden for testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace epp::simd {

enum class Backend { Scalar, Avx2 };

/// Backend used by the dispatching entry points below.
Backend active_backend() noexcept;

/// True if the running CPU supports the AVX2 kernels.
bool avx2_available() noexcept;

/// Forces a backend. Requesting Avx2 on a CPU without it is ignored and
/// returns false.
bool set_backend(Backend backend) noexcept;

std::string_view backend_name(Backend backend) noexcept;

/// Per-clinic sufficient statistics of the probit residuals:
/// precision = sum 1/v, weighted = sum d/v, quadratic = sum d^2/v.
struct ClinicMoments {
  std::span<const double> precision;
  std::span<const double> weighted;
  std::span<const double> quadratic;
};

/// For every variance sigma2[k] writes
///   out[k] = sum_s log(1 + sigma2 * P_s) + Q_s - sigma2 * B_s^2 / (1 + sigma2 * P_s)
/// i.e. the sigma2-dependent part of -2 * sum_s log MVN(d_s; 0, sigma2 J + V_s).
void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);

struct SumSq {
  double sum;
  double sum_sq;
};
SumSq sum_and_sum_sq(std::span<const double> x);

namespace scalar {
void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
SumSq sum_and_sum_sq(std::span<const double> x);
}  // namespace scalar

namespace avx2 {
void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
SumSq sum_and_sum_sq(std::span<const double> x);
}  // namespace avx2

}  // namespace epp::simd
