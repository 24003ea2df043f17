#include <cmath>
#include <cstdint>
#include <numbers>

#include "epp/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define EPP_HAVE_X86 1
#include <immintrin.h>
#else
#define EPP_HAVE_X86 0
#endif

namespace epp::simd::avx2 {

#if EPP_HAVE_X86

#define EPP_AVX2 __attribute__((target("avx2,fma")))

namespace {

EPP_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Splits x (finite, >= 1) into mantissa in [1,2) and unbiased exponent as double.
EPP_AVX2 inline __m256d split_exponent(__m256d x, __m256d& exponent) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_mask = _mm256_set1_epi64x(0x7ff0000000000000LL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3ff0000000000000LL);
  const __m256i biased = _mm256_srli_epi64(_mm256_and_si256(bits, exp_mask), 52);
  // int64 -> double for small non-negative values via the 2^52 magic constant.
  const __m256i magic = _mm256_set1_epi64x(0x4330000000000000LL);
  const __m256d as_double =
      _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(biased, magic)), _mm256_set1_pd(4503599627370496.0));
  exponent = _mm256_sub_pd(as_double, _mm256_set1_pd(1023.0));
  return _mm256_castsi256_pd(_mm256_or_si256(_mm256_andnot_si256(exp_mask, bits), one_bits));
}

}  // namespace

EPP_AVX2 void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out) {
  const std::size_t n_clinics = m.precision.size();
  const std::size_t n = sigma2.size();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d s2 = _mm256_loadu_pd(sigma2.data() + k);
    __m256d quad = _mm256_setzero_pd();
    __m256d mant = one;
    __m256d expo = _mm256_setzero_pd();
    for (std::size_t s = 0; s < n_clinics; ++s) {
      const __m256d p = _mm256_set1_pd(m.precision[s]);
      const __m256d b2 = _mm256_set1_pd(m.weighted[s] * m.weighted[s]);
      const __m256d q = _mm256_set1_pd(m.quadratic[s]);
      const __m256d denom = _mm256_fmadd_pd(s2, p, one);
      quad = _mm256_add_pd(quad, _mm256_sub_pd(q, _mm256_div_pd(_mm256_mul_pd(s2, b2), denom)));
      __m256d e;
      mant = split_exponent(_mm256_mul_pd(mant, denom), e);
      expo = _mm256_add_pd(expo, e);
    }
    alignas(32) double mant_l[4], expo_l[4], quad_l[4];
    _mm256_store_pd(mant_l, mant);
    _mm256_store_pd(expo_l, expo);
    _mm256_store_pd(quad_l, quad);
    for (int lane = 0; lane < 4; ++lane) {
      out[k + lane] = quad_l[lane] + std::log(mant_l[lane]) + expo_l[lane] * std::numbers::ln2;
    }
  }
  if (k < n) scalar::clinic_marginal_terms(m, sigma2.subspan(k), out.subspan(k));
}

EPP_AVX2 double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i + 4), _mm256_loadu_pd(pb + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i + 8), _mm256_loadu_pd(pb + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i + 12), _mm256_loadu_pd(pb + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += pa[i] * pb[i];
  return acc;
}

EPP_AVX2 SumSq sum_and_sum_sq(std::span<const double> x) {
  const std::size_t n = x.size();
  const double* p = x.data();
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d q0 = _mm256_setzero_pd();
  __m256d q1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d a = _mm256_loadu_pd(p + i);
    const __m256d b = _mm256_loadu_pd(p + i + 4);
    s0 = _mm256_add_pd(s0, a);
    s1 = _mm256_add_pd(s1, b);
    q0 = _mm256_fmadd_pd(a, a, q0);
    q1 = _mm256_fmadd_pd(b, b, q1);
  }
  SumSq r{hsum(_mm256_add_pd(s0, s1)), hsum(_mm256_add_pd(q0, q1))};
  for (; i < n; ++i) {
    r.sum += p[i];
    r.sum_sq += p[i] * p[i];
  }
  return r;
}

bool supported() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#else

void clinic_marginal_terms(const ClinicMoments& m, std::span<const double> sigma2, std::span<double> out) {
  scalar::clinic_marginal_terms(m, sigma2, out);
}
double dot(std::span<const double> a, std::span<const double> b) { return scalar::dot(a, b); }
SumSq sum_and_sum_sq(std::span<const double> x) { return scalar::sum_and_sum_sq(x); }
bool supported() noexcept { return false; }

#endif

}  // namespace epp::simd::avx2
