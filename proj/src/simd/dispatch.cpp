#include <atomic>

#include "epp/simd.hpp"

namespace epp::simd {

namespace avx2 {
bool supported() noexcept;
}

namespace {

Backend detect() noexcept { return avx2::supported() ? Backend::Avx2 : Backend::Scalar; }

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

bool avx2_available() noexcept {
  static const bool available = avx2::supported();
  return available;
}

bool set_backend(Backend backend) noexcept {
  if (backend == Backend::Avx2 && !avx2_available()) return false;
  current().store(backend, std::memory_order_relaxed);
  return true;
}

std::string_view backend_name(Backend backend) noexcept {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out) {
  if (active_backend() == Backend::Avx2) {
    avx2::clinic_marginal_terms(m, sigma2, out);
  } else {
    scalar::clinic_marginal_terms(m, sigma2, out);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active_backend() == Backend::Avx2 ? avx2::dot(a, b) : scalar::dot(a, b);
}

SumSq sum_and_sum_sq(std::span<const double> x) {
  return active_backend() == Backend::Avx2 ? avx2::sum_and_sum_sq(x) : scalar::sum_and_sum_sq(x);
}

}  // namespace epp::simd
