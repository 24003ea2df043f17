#pragma once

// Posterior summaries and clinic-level posterior predictive distributions.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epp/likelihood.hpp"
#include "epp/melding.hpp"
#include "epp/rng.hpp"

namespace epp {

struct PredictiveRequest {
  std::string clinic_id;
  int year = 0;
  std::optional<int> n_tested;  ///< defaults to the clinic's most recent sample size
};

/// Unnormalized log density of a clinic effect given residuals:
/// -1/2 sum (d_t - b)^2 / v_t - (beta1 + 1/2) log(b^2 / 2 + 1/beta2).
double clinic_effect_logdensity(double b, std::span<const double> d, std::span<const double> v,
                                const SigmaPrior& prior);

/// Exact draw from the clinic-effect posterior by rejection from the Gaussian
/// likelihood factor. With no residuals the draw comes from the prior
/// marginal of b, a scaled Student t with 2 beta1 degrees of freedom.
double sample_clinic_effect(std::span<const double> d, std::span<const double> v, const SigmaPrior& prior,
                            RandomStream& rng);
double sample_clinic_effect(std::span<const double> d, std::span<const double> v, const SigmaPrior& prior,
                            std::uint64_t seed);

/// Posterior predictive draws of observed prevalence at one clinic, one per
/// resampled posterior draw (multiplicities expanded).
std::vector<double> predict_clinic(const PosteriorSample& posterior, const Dataset& dataset,
                                   const PredictiveRequest& req, const SigmaPrior& prior, std::uint64_t seed,
                                   unsigned threads = 1);

/// Lower nearest-rank quantile of a weighted sample: the smallest value whose
/// cumulative weight reaches p * total.
double weighted_quantile(std::span<const double> values, std::span<const std::size_t> weights, double p);
double sample_quantile(std::span<const double> values, double p);

struct QuantileTable {
  std::vector<int> years;
  std::vector<double> probs;
  std::vector<std::vector<double>> values;  ///< values[year index][prob index]
};

QuantileTable population_quantiles(const PosteriorSample& posterior, std::span<const int> years,
                                   std::span<const double> probs);

struct HeldOutPoint {
  std::string clinic_id;
  int year = 0;
  int n_tested = 0;
  double observed = 0.0;    ///< Y / N
  double corrected = 0.0;   ///< (Y + 1/2) / (N + 1), compared with the interval
  double q_lower = 0.0;
  double q_median = 0.0;
  double q_upper = 0.0;
  bool inside = false;
};

struct CoverageReport {
  int truncate_year = 0;
  std::vector<HeldOutPoint> points;
  double coverage = 0.0;
};

/// Scores 95% predictive intervals of held-out observations against a
/// posterior fitted on fit_data. Clinics absent from fit_data use the
/// prior marginal of their effect.
CoverageReport evaluate_holdout(const PosteriorSample& posterior, const Dataset& fit_data,
                                std::span<const ClinicObservation> held_out, const SigmaPrior& prior,
                                std::uint64_t seed, unsigned threads = 1);

struct BacktestResult {
  CoverageReport coverage;
  PosteriorSample posterior;
};

/// Fits on observations up to truncate_year and scores the rest.
BacktestResult backtest(const Dataset& dataset, int truncate_year, const MeldingConfig& cfg, std::uint64_t seed);

}  // namespace epp
