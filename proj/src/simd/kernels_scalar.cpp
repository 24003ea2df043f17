#include <cmath>

#include "epp/simd.hpp"

namespace epp::simd::scalar {

void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out) {
  const std::size_t n_clinics = m.precision.size();
  for (std::size_t k = 0; k < sigma2.size(); ++k) {
    const double s2 = sigma2[k];
    double total = 0.0;
    for (std::size_t s = 0; s < n_clinics; ++s) {
      const double q = 1.0 + s2 * m.precision[s];
      total += std::log(q) + m.quadratic[s] - s2 * m.weighted[s] * m.weighted[s] / q;
    }
    out[k] = total;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

SumSq sum_and_sum_sq(std::span<const double> x) {
  SumSq r{0.0, 0.0};
  for (double v : x) {
    r.sum += v;
    r.sum_sq += v * v;
  }
  return r;
}

}  // namespace epp::simd::scalar
