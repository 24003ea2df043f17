#pragma once

#include <cstdint>
#include <vector>

#include "epp/model.hpp"

namespace epp {

struct InputPriorConfig {
  double r_max = 15.0;
  int t0_min = 1970;
  int t0_max = 1990;
  double chi_prior = 0.1;  ///< fixed chi at which a uniform entering fraction induces the prior on phi

  void validate() const;
};

/// Uniform direct prior on prevalence in one year; the pooled prior keeps
/// only its support.
struct OutputConstraint {
  int year = 1980;
  double lower = 0.0;
  double upper = 0.1;

  void validate() const;
};

/// Inverse of at_risk_fraction at fixed chi: (logit f - logit f0) / chi.
double phi_from_fractions(double f, double f0, double chi);

/// Draw i of the input prior; a pure function of (seed, i).
EppParams sample_input(const InputPriorConfig& cfg, std::uint64_t seed, std::uint64_t index);

/// n independent draws from the input prior.
std::vector<EppParams> sample_inputs(const InputPriorConfig& cfg, std::size_t n, std::uint64_t seed);

/// 1 iff every constrained year's prevalence lies in [lower, upper].
int constraint_indicator(const PrevalenceTrajectory& traj, const std::vector<OutputConstraint>& constraints);

}  // namespace epp
