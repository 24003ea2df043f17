#include "epp/priors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "epp/error.hpp"
#include "epp/rng.hpp"

namespace epp {

namespace {
double logit(double p) { return std::log(p / (1.0 - p)); }
}  // namespace

void InputPriorConfig::validate() const {
  if (!(r_max > 0.0)) throw ConfigError("r_max must be > 0");
  if (t0_min > t0_max) throw ConfigError("t0_min must be <= t0_max");
  if (!(chi_prior > 0.0)) throw ConfigError("chi_prior must be > 0");
}

void OutputConstraint::validate() const {
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) {
    throw ConfigError("constraint for " + std::to_string(year) + " needs 0 <= lower < upper <= 1");
  }
}

double phi_from_fractions(double f, double f0, double chi) {
  if (!(f > 0.0 && f < 1.0) || !(f0 > 0.0 && f0 < 1.0)) {
    throw std::domain_error("phi_from_fractions needs f and f0 strictly inside (0, 1)");
  }
  if (!(chi > 0.0)) throw std::domain_error("phi_from_fractions needs chi > 0");
  return (logit(f) - logit(f0)) / chi;
}

EppParams sample_input(const InputPriorConfig& cfg, std::uint64_t seed, std::uint64_t index) {
  RandomStream rng(seed, StreamPurpose::PriorDraw, index);
  EppParams p;
  p.r = cfg.r_max * rng.uniform();
  const auto span = static_cast<std::uint64_t>(cfg.t0_max - cfg.t0_min + 1);
  p.t0 = cfg.t0_min + static_cast<int>(std::uniform_int_distribution<std::uint64_t>(0, span - 1)(rng.engine()));
  p.f0 = rng.uniform();
  p.phi = phi_from_fractions(rng.uniform(), p.f0, cfg.chi_prior);
  return p;
}

std::vector<EppParams> sample_inputs(const InputPriorConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_inputs needs n >= 1");
  cfg.validate();
  std::vector<EppParams> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sample_input(cfg, seed, i);
  return out;
}

int constraint_indicator(const PrevalenceTrajectory& traj, const std::vector<OutputConstraint>& constraints) {
  for (const auto& c : constraints) {
    if (!traj.contains(c.year)) {
      throw std::out_of_range("constraint year " + std::to_string(c.year) + " is not on the trajectory grid");
    }
    const double rho = traj.at(c.year);
    if (rho < c.lower || rho > c.upper) return 0;
  }
  return 1;
}

}  // namespace epp
