#include "epp/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "epp/error.hpp"
#include "epp/normal.hpp"
#include "epp/parallel.hpp"

namespace epp {

namespace {

constexpr double kLowerProb = 0.025;
constexpr double kUpperProb = 0.975;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// (1 + beta2 b^2 / 2)^-(beta1 + 1/2): the prior factor relative to its maximum at b = 0.
double prior_factor_ratio(double b, const SigmaPrior& prior) {
  return std::pow(1.0 + 0.5 * prior.beta2 * b * b, -(prior.beta1 + 0.5));
}

double open_unit(double p) {
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

std::size_t nearest_rank(double p, std::size_t total) {
  // The 1e-9 slack keeps products such as 0.025 * 3000 from rounding up a rank.
  const double r = std::ceil(p * static_cast<double>(total) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, total);
}

struct ClinicHistory {
  const ClinicSeries* series = nullptr;
  std::vector<double> variances;
};

// Draws for one clinic/year given its (possibly empty) residual history.
std::vector<double> predictive_draws(const PosteriorSample& posterior, const ClinicHistory& history,
                                     std::uint64_t clinic_key, int year, int n_tested, const SigmaPrior& prior,
                                     std::uint64_t seed, unsigned threads) {
  std::vector<std::size_t> offset(posterior.draws.size() + 1, 0);
  for (std::size_t k = 0; k < posterior.draws.size(); ++k) offset[k + 1] = offset[k] + posterior.draws[k].multiplicity;
  std::vector<double> out(offset.back());

  parallel_for(posterior.draws.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> d;
    for (std::size_t k = begin; k < end; ++k) {
      const PosteriorDraw& draw = posterior.draws[k];
      if (!draw.trajectory.contains(year)) {
        throw DataError("year " + std::to_string(year) + " is not on the posterior trajectory grid");
      }
      d.clear();
      if (history.series != nullptr) d = clinic_residuals(draw.trajectory, *history.series);
      const double omega = clamped_probit(draw.trajectory.at(year));
      for (std::size_t j = offset[k]; j < offset[k + 1]; ++j) {
        RandomStream effect_rng(seed, StreamPurpose::ClinicEffect, j, clinic_key);
        const double b = sample_clinic_effect(d, history.variances, prior, effect_rng);
        const double mean = omega + b;
        const double gamma = open_unit(normal_cdf(mean));
        const double v = delta_method_variance(gamma, mean, n_tested);
        RandomStream noise_rng(seed, StreamPurpose::Predictive, j, clinic_key ^ mix64(static_cast<std::uint64_t>(year)));
        out[j] = open_unit(normal_cdf(mean + std::sqrt(v) * noise_rng.normal()));
      }
    }
  });
  return out;
}

}  // namespace

double clinic_effect_logdensity(double b, std::span<const double> d, std::span<const double> v,
                                const SigmaPrior& prior) {
  double ss = 0.0;
  for (std::size_t t = 0; t < d.size(); ++t) ss += (d[t] - b) * (d[t] - b) / v[t];
  return -0.5 * ss - (prior.beta1 + 0.5) * std::log(0.5 * b * b + 1.0 / prior.beta2);
}

double sample_clinic_effect(std::span<const double> d, std::span<const double> v, const SigmaPrior& prior,
                            RandomStream& rng) {
  if (d.size() != v.size()) throw std::invalid_argument("residual and variance vectors differ in length");
  if (d.empty()) {
    const boost::math::students_t_distribution<double> t(2.0 * prior.beta1);
    return boost::math::quantile(t, rng.uniform()) / std::sqrt(prior.beta1 * prior.beta2);
  }
  double precision = 0.0;
  double weighted = 0.0;
  for (std::size_t t = 0; t < d.size(); ++t) {
    precision += 1.0 / v[t];
    weighted += d[t] / v[t];
  }
  const double tau = std::sqrt(1.0 / precision);
  const double mean = weighted / precision;
  for (;;) {
    const double b = mean + tau * rng.normal();
    const double accept = prior_factor_ratio(b, prior);
    if (!(accept <= 1.0)) throw std::logic_error("rejection envelope violated");
    if (rng.uniform() < accept) return b;
  }
}

double sample_clinic_effect(std::span<const double> d, std::span<const double> v, const SigmaPrior& prior,
                            std::uint64_t seed) {
  RandomStream rng(seed, StreamPurpose::ClinicEffect, 0);
  return sample_clinic_effect(d, v, prior, rng);
}

std::vector<double> predict_clinic(const PosteriorSample& posterior, const Dataset& dataset,
                                   const PredictiveRequest& req, const SigmaPrior& prior, std::uint64_t seed,
                                   unsigned threads) {
  const ClinicSeries* clinic = dataset.find(req.clinic_id);
  if (clinic == nullptr) throw DataError("unknown clinic '" + req.clinic_id + "'");
  const int n_tested = req.n_tested.value_or(clinic->observations.back().n_tested);
  if (n_tested < 1) throw DataError("n_tested must be >= 1");
  ClinicHistory history{clinic, clinic_variances(*clinic)};
  return predictive_draws(posterior, history, fnv1a(req.clinic_id), req.year, n_tested, prior, seed, threads);
}

double weighted_quantile(std::span<const double> values, std::span<const std::size_t> weights, double p) {
  if (values.size() != weights.size() || values.empty()) throw std::invalid_argument("weighted_quantile needs data");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const std::size_t total = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  if (total == 0) throw std::invalid_argument("weighted_quantile needs positive total weight");
  const std::size_t rank = nearest_rank(p, total);
  std::size_t cumulative = 0;
  for (std::size_t i : order) {
    cumulative += weights[i];
    if (cumulative >= rank) return values[i];
  }
  return values[order.back()];
}

double sample_quantile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("sample_quantile needs data");
  std::vector<double> sorted(values.begin(), values.end());
  const std::size_t rank = nearest_rank(p, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  return sorted[rank - 1];
}

QuantileTable population_quantiles(const PosteriorSample& posterior, std::span<const int> years,
                                   std::span<const double> probs) {
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile probabilities must lie in (0, 1)");
  }
  QuantileTable table;
  table.years.assign(years.begin(), years.end());
  table.probs.assign(probs.begin(), probs.end());
  std::vector<double> values(posterior.draws.size());
  std::vector<std::size_t> weights(posterior.draws.size());
  for (std::size_t k = 0; k < posterior.draws.size(); ++k) weights[k] = posterior.draws[k].multiplicity;
  for (int year : years) {
    for (std::size_t k = 0; k < posterior.draws.size(); ++k) {
      if (!posterior.draws[k].trajectory.contains(year)) {
        throw DataError("year " + std::to_string(year) + " is not on the posterior trajectory grid");
      }
      values[k] = posterior.draws[k].trajectory.at(year);
    }
    std::vector<double> row;
    for (double p : probs) row.push_back(weighted_quantile(values, weights, p));
    table.values.push_back(std::move(row));
  }
  return table;
}

CoverageReport evaluate_holdout(const PosteriorSample& posterior, const Dataset& fit_data,
                                std::span<const ClinicObservation> held_out, const SigmaPrior& prior,
                                std::uint64_t seed, unsigned threads) {
  if (held_out.empty()) throw DataError("no held-out observations to score");
  CoverageReport report;
  std::size_t inside = 0;
  for (const auto& obs : held_out) {
    ClinicHistory history;
    history.series = fit_data.find(obs.clinic_id);
    if (history.series != nullptr) history.variances = clinic_variances(*history.series);
    const std::vector<double> draws =
        predictive_draws(posterior, history, fnv1a(obs.clinic_id), obs.year, obs.n_tested, prior, seed, threads);
    HeldOutPoint pt;
    pt.clinic_id = obs.clinic_id;
    pt.year = obs.year;
    pt.n_tested = obs.n_tested;
    pt.observed = static_cast<double>(obs.n_positive) / obs.n_tested;
    pt.corrected = transform_observation(obs).x;
    pt.q_lower = sample_quantile(draws, kLowerProb);
    pt.q_median = sample_quantile(draws, 0.5);
    pt.q_upper = sample_quantile(draws, kUpperProb);
    pt.inside = pt.corrected >= pt.q_lower && pt.corrected <= pt.q_upper;
    inside += pt.inside ? 1 : 0;
    report.points.push_back(std::move(pt));
  }
  report.coverage = static_cast<double>(inside) / static_cast<double>(report.points.size());
  return report;
}

BacktestResult backtest(const Dataset& dataset, int truncate_year, const MeldingConfig& cfg, std::uint64_t seed) {
  const Dataset fit_data = dataset.truncated(truncate_year);
  if (fit_data.empty()) throw DataError("no observations at or before " + std::to_string(truncate_year));
  const std::vector<ClinicObservation> held_out = dataset.held_out(truncate_year);
  if (held_out.empty()) throw DataError("no observations after " + std::to_string(truncate_year) + " to hold out");
  BacktestResult result;
  result.posterior = run_melding(cfg, fit_data);
  result.coverage = evaluate_holdout(result.posterior, fit_data, held_out, cfg.sigma_prior, seed, cfg.threads);
  result.coverage.truncate_year = truncate_year;
  return result;
}

}  // namespace epp
