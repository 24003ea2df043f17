#pragma once

// Synthetic clinic data simulated from a known EPP trajectory with probit
// clinic effects and binomial sampling.

#include <cstdint>
#include <vector>

#include "epp/likelihood.hpp"
#include "epp/model.hpp"

namespace epp::testing {

struct SyntheticSpec {
  EppParams truth{3.0, 0.35, 1978, -5.0};
  int n_clinics = 5;
  int first_year = 1989;
  int last_year = 2000;
  double sigma = 0.15;
  int n_min = 300;
  int n_max = 600;
  std::uint64_t seed = 1;
  DemographyConfig demography;
  SurvivalConfig survival;
  SimGrid grid;
};

struct SyntheticData {
  Dataset data;
  PrevalenceTrajectory truth;
  std::vector<double> clinic_effects;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

}  // namespace epp::testing
