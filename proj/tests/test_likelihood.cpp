#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "epp/error.hpp"
#include "epp/likelihood.hpp"
#include "epp/normal.hpp"
#include "epp/simd.hpp"
#include "support/synthetic.hpp"

using namespace epp;

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

// Normal quantile by bisection on erfc: an oracle independent of the library's probit.
double probit_oracle(double p) {
  if (p > 0.5) return -probit_oracle(1.0 - p);  // keep the bisection on the accurate tail
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Dense MVN log density of N(0, sigma2 * J + diag(v)) via Cholesky.
double dense_mvn_logdensity(const std::vector<double>& d, const std::vector<double>& v, double sigma2) {
  const std::size_t n = d.size();
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = sigma2 + (i == j ? v[i] : 0.0);
  }
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= l[j * n + k] * l[j * n + k];
    l[j * n + j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) t -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = t / l[j * n + j];
    }
  }
  std::vector<double> z(n);
  double log_det = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double t = d[i];
    for (std::size_t k = 0; k < i; ++k) t -= l[i * n + k] * z[k];
    z[i] = t / l[i * n + i];
    quad += z[i] * z[i];
    log_det += 2.0 * std::log(l[i * n + i]);
  }
  return -0.5 * (static_cast<double>(n) * kLog2Pi + log_det + quad);
}

double log_normal_density(double x, double var) { return -0.5 * (kLog2Pi + std::log(var) + x * x / var); }

PrevalenceTrajectory flat_trajectory(double value, int first = 1970, int last = 2020) {
  PrevalenceTrajectory t;
  t.first_year = first;
  t.rho.assign(static_cast<std::size_t>(last - first + 1), value);
  return t;
}

Dataset two_by_three() {
  return Dataset::from_observations({{"A", 1990, 200, 30},
                                     {"A", 1991, 250, 41},
                                     {"A", 1992, 180, 35},
                                     {"B", 1990, 400, 47},
                                     {"B", 1991, 350, 52},
                                     {"B", 1992, 300, 50}});
}

// log sum exp over a vector.
double log_sum_exp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TEST_CASE("probit agrees with a bisection oracle") {
  for (double p : {1e-15, 1e-12, 1e-6, 0.0049504950495, 0.01, 0.2, 0.5, 0.8, 0.999, 1 - 1e-10}) {
    CHECK(probit(p) == doctest::Approx(probit_oracle(p)).epsilon(1e-12));
    CHECK(normal_cdf(probit(p)) == doctest::Approx(p).epsilon(1e-13));
  }
  CHECK(probit(0.5) == 0.0);
}

TEST_CASE("transform_observation") {
  const auto half = transform_observation({"A", 2000, 100, 50});
  CHECK(half.x == 0.5);
  CHECK(half.w == 0.0);
  CHECK(half.v == doctest::Approx(2.0 * M_PI * 0.25 / 100.0).epsilon(1e-15));
  CHECK(half.v == doctest::Approx(0.0157080).epsilon(1e-6));

  const auto zero = transform_observation({"A", 2000, 100, 0});
  CHECK(zero.x == doctest::Approx(0.5 / 101.0).epsilon(1e-15));
  CHECK(zero.w == doctest::Approx(probit_oracle(0.5 / 101.0)).epsilon(1e-12));
  CHECK(zero.w == doctest::Approx(-2.5793).epsilon(1e-4));

  const auto all = transform_observation({"A", 2000, 1, 1});
  CHECK(all.x == 0.75);
  CHECK(all.v > 0.0);

  CHECK(delta_method_variance(0.5, 400) == doctest::Approx(delta_method_variance(0.5, 100) / 4.0).epsilon(1e-15));
  const double g = 0.2;
  CHECK(delta_method_variance(g, 300) ==
        doctest::Approx(2.0 * M_PI * std::exp(std::pow(probit_oracle(g), 2)) * g * (1 - g) / 300).epsilon(1e-12));
}

TEST_CASE("delta-method variance at realistic clinic sizes") {
  std::mt19937_64 rng(11);
  const int n = 300;
  for (double gamma : {0.05, 0.2, 0.5}) {
    std::binomial_distribution<int> binom(n, gamma);
    // Tabulate the probit of each possible count once.
    std::vector<double> w(n + 1);
    for (int y = 0; y <= n; ++y) w[static_cast<std::size_t>(y)] = probit((y + 0.5) / (n + 1.0));
    double sum = 0.0, sum_sq = 0.0;
    const int reps = 1000000;
    for (int i = 0; i < reps; ++i) {
      const double x = w[static_cast<std::size_t>(binom(rng))];
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / reps;
    const double variance = (sum_sq - reps * mean * mean) / (reps - 1);
    CAPTURE(gamma);
    CHECK(variance == doctest::Approx(delta_method_variance(gamma, n)).epsilon(0.05));
  }
}

TEST_CASE("residuals") {
  const Dataset ds = Dataset::from_observations({{"A", 1995, 100, 20}, {"A", 1996, 100, 50}});
  const auto& clinic = ds.clinics().front();

  PrevalenceTrajectory matched = flat_trajectory(0.0);
  for (const auto& o : clinic.observations) {
    matched.rho[static_cast<std::size_t>(o.year - 1970)] = transform_observation(o).x;
  }
  for (double d : clinic_residuals(matched, clinic)) CHECK(d == 0.0);

  const auto at_zero = clinic_residuals(flat_trajectory(0.0), clinic);
  CHECK(clamped_probit(0.0) == doctest::Approx(-7.0345).epsilon(1e-4));
  CHECK(clamped_probit(0.0) == doctest::Approx(probit_oracle(1e-12)).epsilon(1e-12));
  CHECK(clamped_probit(1.0) == doctest::Approx(probit_oracle(1.0 - 1e-12)).epsilon(1e-9));
  CHECK(at_zero[0] == doctest::Approx(transform_observation(clinic.observations[0]).w + 7.0345).epsilon(1e-5));

  // W = -1 against rho = 0.2.
  CHECK(-1.0 - clamped_probit(0.2) == doctest::Approx(-0.15838).epsilon(1e-4));
  const auto at_fifth = clinic_residuals(flat_trajectory(0.2), clinic);
  CHECK(at_fifth[1] == doctest::Approx(0.0 - probit_oracle(0.2)).epsilon(1e-12));

  CHECK(residuals(flat_trajectory(0.2), ds).size() == 1);
  CHECK_THROWS_AS(clinic_residuals(flat_trajectory(0.2, 1970, 1995), clinic), std::out_of_range);
}

TEST_CASE("clinic_marginal_logdensity") {
  SUBCASE("sigma2 = 0 is a product of univariate densities") {
    const std::vector<double> d{0.3, -0.1, 0.25}, v{0.01, 0.02, 0.015};
    double expected = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) expected += log_normal_density(d[i], v[i]);
    CHECK(clinic_marginal_logdensity(d, v, 0.0) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("single observation has variance sigma2 + v") {
    const std::vector<double> d{0.4}, v{0.02};
    CHECK(clinic_marginal_logdensity(d, v, 0.05) == doctest::Approx(log_normal_density(0.4, 0.07)).epsilon(1e-14));
  }
  SUBCASE("dense Cholesky oracle on random cases") {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> len(1, 6);
    std::normal_distribution<double> normal(0.0, 0.5);
    std::uniform_real_distribution<double> var(1e-3, 0.1);
    std::uniform_real_distribution<double> log_sigma2(-6.0, 1.0);
    for (int c = 0; c < 100; ++c) {
      const int n = c == 0 ? 3 : len(rng);
      std::vector<double> d(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        d[static_cast<std::size_t>(i)] = normal(rng);
        v[static_cast<std::size_t>(i)] = var(rng);
      }
      const double sigma2 = std::pow(10.0, log_sigma2(rng));
      const double expected = dense_mvn_logdensity(d, v, sigma2);
      CHECK(std::abs(clinic_marginal_logdensity(d, v, sigma2) - expected) <= 1e-10 * std::max(1.0, std::abs(expected)));
    }
  }
  SUBCASE("errors") {
    const std::vector<double> d{0.1, 0.2}, v{0.01, 0.0}, v1{0.01};
    CHECK_THROWS_AS(clinic_marginal_logdensity(d, v, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(clinic_marginal_logdensity(d, v1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(clinic_marginal_logdensity(v1, v1, -1.0), std::invalid_argument);
  }
}

TEST_CASE("sigma2_prior_logdensity") {
  const SigmaPrior prior;
  // Integrate in t = log sigma2, where both tails decay exponentially.
  auto log_density = [&](std::span<const double> t, std::span<double> out) {
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = sigma2_prior_logdensity(std::exp(t[i]), prior) + t[i];
  };
  std::vector<double> bp;
  for (double t = -60.0; t <= 80.0; t += 5.0) bp.push_back(t);
  QuadratureConfig tight{1e-10, 2000};
  const auto total = integrate_log(log_density, bp, tight);
  CHECK(std::exp(total.log_value) == doctest::Approx(1.0).epsilon(1e-6));

  const double mode = (1.0 / prior.beta2) / (prior.beta1 + 1.0);
  CHECK(mode == doctest::Approx(0.006806).epsilon(1e-4));
  CHECK(sigma2_prior_logdensity(mode, prior) > sigma2_prior_logdensity(mode * 1.001, prior));
  CHECK(sigma2_prior_logdensity(mode, prior) > sigma2_prior_logdensity(mode * 0.999, prior));

  // Marginal of a clinic effect: integral of N(b; 0, s) against the prior is
  // proportional to (b^2/2 + 1/beta2)^-(beta1 + 1/2).
  std::vector<double> ratios;
  for (double b : {0.0, 0.2, 0.5}) {
    auto joint = [&](std::span<const double> t, std::span<double> out) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double s = std::exp(t[i]);
        out[i] = log_normal_density(b, s) + sigma2_prior_logdensity(s, prior) + t[i];
      }
    };
    const double numeric = integrate_log(joint, bp, tight).log_value;
    const double closed = -(prior.beta1 + 0.5) * std::log(0.5 * b * b + 1.0 / prior.beta2);
    ratios.push_back(numeric - closed);
  }
  CHECK(ratios[1] == doctest::Approx(ratios[0]).epsilon(1e-8));
  CHECK(ratios[2] == doctest::Approx(ratios[0]).epsilon(1e-8));

  CHECK_THROWS_AS(sigma2_prior_logdensity(0.0, prior), std::domain_error);
  CHECK_THROWS_AS((SigmaPrior{0.0, 93}.validate()), ConfigError);
  CHECK_THROWS_AS((SigmaPrior{0.58, -1}.validate()), ConfigError);
}

TEST_CASE("integrated likelihood: trivial cases and symmetry") {
  const SigmaPrior prior;
  const QuadratureConfig quad;
  CHECK(integrated_log_likelihood(flat_trajectory(0.1), Dataset{}, prior, quad) == 0.0);

  const auto obs = two_by_three().flatten();
  std::vector<ClinicObservation> reversed(obs.rbegin(), obs.rend());
  const auto traj = flat_trajectory(0.14);
  const double a = integrated_log_likelihood(traj, Dataset::from_observations(obs), prior, quad);
  const double b = integrated_log_likelihood(traj, Dataset::from_observations(reversed), prior, quad);
  CHECK(std::isfinite(a));
  CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));

  CHECK_THROWS_AS(integrated_log_likelihood(flat_trajectory(0.1, 1991, 2020), two_by_three(), prior, quad),
                  std::out_of_range);
}

TEST_CASE("integrated likelihood against Monte Carlo over sigma2") {
  const SigmaPrior prior;
  const Dataset ds = two_by_three();
  PrevalenceTrajectory traj = flat_trajectory(0.13);
  traj.rho[20] = 0.15;
  traj.rho[22] = 0.17;
  const double quad_value = integrated_log_likelihood(traj, ds, prior, {});

  const auto d = residuals(traj, ds);
  std::vector<std::vector<double>> v;
  for (const auto& c : ds.clinics()) v.push_back(clinic_variances(c));

  // 1 / sigma2 ~ Gamma(shape beta1, rate 1 / beta2), i.e. scale beta2.
  std::mt19937_64 rng(2718);
  std::gamma_distribution<double> precision(prior.beta1, prior.beta2);
  const int draws = 1000000;
  std::vector<double> log_terms(static_cast<std::size_t>(draws));
  for (int i = 0; i < draws; ++i) {
    const double sigma2 = 1.0 / precision(rng);
    double lt = 0.0;
    for (std::size_t s = 0; s < d.size(); ++s) lt += dense_mvn_logdensity(d[s], v[s], sigma2);
    log_terms[static_cast<std::size_t>(i)] = lt;
  }
  const double mc = log_sum_exp(log_terms) - std::log(static_cast<double>(draws));
  // Monte Carlo standard error on the likelihood scale, relative.
  double s1 = 0.0, s2 = 0.0;
  for (double lt : log_terms) {
    const double w = std::exp(lt - mc);
    s1 += w;
    s2 += w * w;
  }
  const double rel_se = std::sqrt((s2 / draws - std::pow(s1 / draws, 2)) / draws);
  CAPTURE(rel_se);
  CHECK(rel_se < 0.003);
  CHECK(std::exp(quad_value - mc) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("integrated likelihood against a brute-force grid in log sigma2") {
  testing::SyntheticSpec spec;
  spec.n_clinics = 8;
  const auto syn = testing::make_synthetic(spec);
  const SigmaPrior prior;
  const auto d = residuals(syn.truth, syn.data);
  std::vector<std::vector<double>> v;
  for (const auto& c : syn.data.clinics()) v.push_back(clinic_variances(c));

  // Trapezoid in t = log sigma2 over [-40, 25] with 200000 panels.
  const int panels = 200000;
  const double lo = -40.0, hi = 25.0, h = (hi - lo) / panels;
  std::vector<double> terms(static_cast<std::size_t>(panels) + 1);
  for (int k = 0; k <= panels; ++k) {
    const double t = lo + k * h;
    const double s = std::exp(t);
    double lt = sigma2_prior_logdensity(s, prior) + t + std::log(h) + ((k == 0 || k == panels) ? std::log(0.5) : 0.0);
    for (std::size_t c = 0; c < d.size(); ++c) lt += clinic_marginal_logdensity(d[c], v[c], s);
    terms[static_cast<std::size_t>(k)] = lt;
  }
  const double grid_value = log_sum_exp(terms);

  for (auto backend : {simd::Backend::Scalar, simd::Backend::Avx2}) {
    if (backend == simd::Backend::Avx2 && !simd::avx2_available()) continue;
    const auto initial = simd::active_backend();
    simd::set_backend(backend);
    const LikelihoodEvaluator eval(syn.data, prior, {});
    const auto r = eval.integrate(syn.truth);
    simd::set_backend(initial);
    CAPTURE(simd::backend_name(backend));
    CHECK(std::abs(r.log_value - grid_value) < 1e-6);
    CHECK(r.rel_error <= 1e-6);
    CHECK(eval.clinic_count() == 8);
  }
}

TEST_CASE("likelihood over constant trajectories peaks near the simulating prevalence") {
  const double c_star = 0.2;
  std::mt19937_64 rng(404);
  std::normal_distribution<double> effect(0.0, 0.1);
  std::vector<ClinicObservation> obs;
  for (int s = 0; s < 20; ++s) {
    const double b = effect(rng);
    for (int year = 1990; year < 2000; ++year) {
      const double gamma = normal_cdf(probit(c_star) + b);
      obs.push_back({"S" + std::to_string(s), year, 400, std::binomial_distribution<int>(400, gamma)(rng)});
    }
  }
  const LikelihoodEvaluator eval(Dataset::from_observations(obs), {}, {});
  double best_c = 0.0, best = -std::numeric_limits<double>::infinity();
  for (double c = 0.05; c <= 0.5 + 1e-9; c += 0.005) {
    const double ll = eval.log_likelihood(flat_trajectory(c));
    if (ll > best) {
      best = ll;
      best_c = c;
    }
  }
  CHECK(std::abs(best_c - c_star) <= 0.02);
}

TEST_CASE("wildly wrong trajectories keep a finite log likelihood") {
  const LikelihoodEvaluator eval(two_by_three(), {}, {});
  const double zero = eval.log_likelihood(flat_trajectory(0.0));
  const double one = eval.log_likelihood(flat_trajectory(1.0));
  const double close = eval.log_likelihood(flat_trajectory(0.14));
  CHECK(std::isfinite(zero));
  CHECK(std::isfinite(one));
  CHECK(zero < close - 10.0);
  CHECK(one < close - 10.0);
  // A trajectory that is still zero after the data starts, as before an epidemic's start.
  auto late = flat_trajectory(0.14);
  late.rho[20] = 0.0;
  CHECK(std::isfinite(eval.log_likelihood(late)));
}

TEST_CASE("Dataset") {
  const auto ds = Dataset::from_observations(
      {{"B", 1992, 100, 10}, {"A", 1990, 50, 5}, {"B", 1990, 80, 9}, {"A", 1995, 60, 6}, {"C", 1999, 10, 1}});
  REQUIRE(ds.clinics().size() == 3);
  CHECK(ds.clinics()[0].id == "B");
  CHECK(ds.clinics()[1].id == "A");
  CHECK(ds.clinics()[0].observations[0].year == 1990);
  CHECK(ds.observation_count() == 5);
  CHECK(ds.first_year() == 1990);
  CHECK(ds.last_year() == 1999);
  CHECK(ds.find("C") != nullptr);
  CHECK(ds.find("D") == nullptr);

  const auto early = ds.truncated(1992);
  CHECK(early.clinics().size() == 2);
  CHECK(early.observation_count() == 3);
  const auto late = ds.held_out(1992);
  CHECK(late.size() == 2);
  CHECK(early.observation_count() + late.size() == ds.observation_count());

  CHECK_THROWS_AS(Dataset::from_observations({{"A", 1990, 0, 0}}), DataError);
  CHECK_THROWS_AS(Dataset::from_observations({{"A", 1990, 10, 11}}), DataError);
  CHECK_THROWS_AS(Dataset::from_observations({{"A", 1990, 10, -1}}), DataError);
  CHECK_THROWS_AS(Dataset::from_observations({{"A", 1990, 10, 1}, {"A", 1990, 20, 2}}), DataError);
  CHECK_NOTHROW(Dataset::from_observations({{"A", 1990, 10, 1}, {"B", 1990, 20, 2}}));
}
