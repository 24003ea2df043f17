#pragma once

// Sampling-importance-resampling over the EPP inputs: prior draws are run
// through the model, weighted by the integrated likelihood times the
// output-constraint indicator, and resampled multinomially.

#include <cstdint>
#include <span>
#include <vector>

#include "epp/likelihood.hpp"
#include "epp/model.hpp"
#include "epp/priors.hpp"
#include "epp/quadrature.hpp"

namespace epp {

inline constexpr std::size_t kMinPriorDraws = 100;

struct MeldingConfig {
  std::size_t n_prior = 200000;
  std::size_t n_resample = 3000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  ///< 0 = all hardware threads; never affects results
  InputPriorConfig prior;
  DemographyConfig demography;
  SurvivalConfig survival;
  SimGrid grid;
  std::vector<OutputConstraint> constraints{OutputConstraint{1980, 0.0, 0.10}};
  SigmaPrior sigma_prior;
  QuadratureConfig quadrature;

  void validate() const;
};

struct WeightedDraw {
  EppParams params;
  PrevalenceTrajectory trajectory;
  double log_weight = 0.0;  ///< -inf for constraint-violating draws
};

struct Diagnostics {
  double ess = 0.0;
  std::size_t unique_count = 0;
  std::size_t max_multiplicity = 0;
  double constraint_pass_rate = 0.0;
  std::size_t quadrature_failures = 0;
  std::size_t n_prior = 0;
  std::size_t n_resample = 0;
};

/// One distinct resampled prior draw and how often it was selected.
struct PosteriorDraw {
  std::size_t source_index = 0;
  std::size_t multiplicity = 0;
  EppParams params;
  PrevalenceTrajectory trajectory;
};

struct PosteriorSample {
  std::vector<PosteriorDraw> draws;  ///< ascending source_index
  Diagnostics diagnostics;

  std::size_t total_multiplicity() const;
};

struct LogWeights {
  std::vector<double> values;
  std::size_t constraint_passes = 0;
  std::size_t quadrature_failures = 0;
};

/// log w_i = log p(W | rho_i) + log indicator(rho_i). Draws whose quadrature
/// fails get -inf and are counted.
LogWeights compute_log_weights(std::span<const WeightedDraw> draws, const LikelihoodEvaluator& likelihood,
                               const std::vector<OutputConstraint>& constraints, unsigned threads = 1);

/// Multinomial resampling of J indices with probabilities proportional to
/// exp(log_weights - max). Returns the multiplicity of every index.
/// Throws InferenceError when no weight is finite.
std::vector<std::size_t> resample(std::span<const double> log_weights, std::size_t J, std::uint64_t seed);

/// Normalized probabilities exp(lw - max) / sum.
std::vector<double> resample_probabilities(std::span<const double> log_weights);

/// (sum w)^2 / sum w^2 over w = exp(lw - max).
double effective_sample_size(std::span<const double> log_weights);

Diagnostics diagnostics_report(std::span<const double> log_weights, std::span<const std::size_t> multiplicities,
                               std::size_t constraint_passes);

PosteriorSample run_melding(const MeldingConfig& cfg, const Dataset& dataset);

}  // namespace epp
