#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "epp/error.hpp"
#include "epp/quadrature.hpp"

using namespace epp;

namespace {

template <class F>
LogBatchIntegrand pointwise(F f) {
  return [f](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  };
}

LogIntegral run(const LogBatchIntegrand& f, std::vector<double> bp, QuadratureConfig cfg = {}) {
  return integrate_log(f, bp, cfg);
}

}  // namespace

TEST_CASE("polynomials are exact on a single interval") {
  for (int k = 0; k <= 20; ++k) {
    const auto r = run(pointwise([k](double x) { return k * std::log(x); }), {0.0, 1.0});
    CHECK(r.log_value == doctest::Approx(-std::log(k + 1.0)).epsilon(1e-13));
    CHECK(r.subdivisions == 0);
    CHECK(r.evaluations == 21);
  }
}

TEST_CASE("smooth integrands against closed forms") {
  SUBCASE("exponential") {
    const auto r = run(pointwise([](double x) { return -3.0 * x; }), {0.0, 1.0, 2.0, 5.0});
    CHECK(r.log_value == doctest::Approx(std::log((1.0 - std::exp(-15.0)) / 3.0)).epsilon(1e-10));
  }
  SUBCASE("narrow gaussian needs subdivision") {
    const double s = 1e-3;
    const auto r = run(pointwise([s](double x) { return -0.5 * std::pow((x - 0.3) / s, 2); }), {0.0, 1.0});
    CHECK(r.subdivisions > 0);
    CHECK(std::exp(r.log_value) == doctest::Approx(s * std::sqrt(2.0 * M_PI)).epsilon(1e-6));
    CHECK(r.rel_error <= 1e-6);
  }
  SUBCASE("integrable endpoint singularity") {
    const auto r = run(pointwise([](double x) { return -0.5 * std::log(x); }), {0.0, 1.0});
    CHECK(std::exp(r.log_value) == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("values far outside the double range") {
  // exp(-5000) * Gaussian: the integral itself underflows but its log does not.
  const double offset = -5000.0;
  const auto r = run(pointwise([offset](double x) { return offset - 0.5 * x * x; }), {-40.0, -1.0, 1.0, 40.0});
  CHECK(r.log_value == doctest::Approx(offset + 0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));

  const auto big = run(pointwise([](double x) { return 3000.0 + 2.0 * std::log(x); }), {0.0, 1.0});
  CHECK(big.log_value == doctest::Approx(3000.0 - std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("rescaling when the peak is found only after subdivision") {
  // A spike of height exp(200) hides between the initial nodes.
  const double c = 0.123456789;
  const double s = 1e-6;
  auto f = pointwise([c, s](double x) { return -0.5 * std::pow((x - c) / s, 2) + 200.0; });
  QuadratureConfig cfg;
  cfg.max_subdivisions = 2000;
  std::vector<double> bp{0.0, c - 1e-4, c + 1e-4, 1.0};
  const auto r = integrate_log(f, bp, cfg);
  CHECK(r.log_value == doctest::Approx(200.0 + std::log(s * std::sqrt(2.0 * M_PI))).epsilon(1e-9));
}

TEST_CASE("all -infinity integrand has log integral -infinity") {
  const auto r = run(pointwise([](double) { return -std::numeric_limits<double>::infinity(); }), {0.0, 1.0});
  CHECK(r.log_value == -std::numeric_limits<double>::infinity());
}

TEST_CASE("failure to converge carries the achieved error") {
  QuadratureConfig cfg;
  cfg.max_subdivisions = 3;
  auto f = pointwise([](double x) { return -0.5 * std::pow((x - 0.3) / 1e-4, 2); });
  try {
    run(f, {0.0, 1.0}, cfg);
    FAIL("expected QuadratureError");
  } catch (const QuadratureError& e) {
    CHECK(e.achieved_error() > cfg.rel_tol);
    CHECK(std::string(e.what()).find("3 subdivisions") != std::string::npos);
  }
  CHECK_THROWS_AS(run(f, {0.0, 1.0}, cfg), InferenceError);
}

TEST_CASE("argument validation") {
  auto f = pointwise([](double) { return 0.0; });
  CHECK_THROWS_AS(run(f, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(run(f, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(run(f, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS((QuadratureConfig{0.0, 10}.validate()), ConfigError);
  CHECK_THROWS_AS((QuadratureConfig{1e-6, -1}.validate()), ConfigError);
  CHECK_THROWS_AS(run(pointwise([](double) { return std::nan(""); }), {0.0, 1.0}), InferenceError);
}
