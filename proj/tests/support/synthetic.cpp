#include "synthetic.hpp"

#include <random>
#include <string>

#include "epp/normal.hpp"
#include "epp/rng.hpp"

namespace epp::testing {

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  SyntheticData out;
  out.truth = simulate(spec.truth, spec.demography, spec.survival, spec.grid);
  RandomStream rng(spec.seed, StreamPurpose::Synthetic, 0);
  std::vector<ClinicObservation> obs;
  for (int s = 0; s < spec.n_clinics; ++s) {
    const double b = spec.sigma * rng.normal();
    out.clinic_effects.push_back(b);
    const std::string id = "C" + std::to_string(s + 1);
    for (int year = spec.first_year; year <= spec.last_year; ++year) {
      const int n = std::uniform_int_distribution<int>(spec.n_min, spec.n_max)(rng.engine());
      const double gamma = normal_cdf(probit(out.truth.at(year)) + b);
      const int y = std::binomial_distribution<int>(n, gamma)(rng.engine());
      obs.push_back(ClinicObservation{id, year, n, y});
    }
  }
  out.data = Dataset::from_observations(obs);
  return out;
}

}  // namespace epp::testing
