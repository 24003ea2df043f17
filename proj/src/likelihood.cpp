#include "epp/likelihood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "epp/error.hpp"
#include "epp/normal.hpp"
#include "epp/simd.hpp"

namespace epp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Initial partition of the sigma^2 axis, in decades; mapped to u = s/(1+s).
constexpr std::array<double, 10> kSigma2Breaks{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4};

std::vector<double> u_breakpoints() {
  std::vector<double> out;
  out.push_back(0.0);
  for (double s : kSigma2Breaks) out.push_back(s / (1.0 + s));
  out.push_back(1.0);
  return out;
}

}  // namespace

Dataset Dataset::from_observations(const std::vector<ClinicObservation>& observations) {
  Dataset ds;
  std::map<std::string, std::size_t> index;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& obs : observations) {
    if (obs.n_tested < 1) {
      throw DataError("clinic " + obs.clinic_id + ", year " + std::to_string(obs.year) + ": tested must be >= 1");
    }
    if (obs.n_positive < 0 || obs.n_positive > obs.n_tested) {
      throw DataError("clinic " + obs.clinic_id + ", year " + std::to_string(obs.year) +
                      ": positive must lie in [0, tested]");
    }
    if (!seen.emplace(obs.clinic_id, obs.year).second) {
      throw DataError("clinic " + obs.clinic_id + " reports year " + std::to_string(obs.year) + " more than once");
    }
    auto [it, inserted] = index.emplace(obs.clinic_id, ds.clinics_.size());
    if (inserted) ds.clinics_.push_back(ClinicSeries{obs.clinic_id, {}});
    ds.clinics_[it->second].observations.push_back(obs);
  }
  for (auto& c : ds.clinics_) {
    std::sort(c.observations.begin(), c.observations.end(),
              [](const ClinicObservation& a, const ClinicObservation& b) { return a.year < b.year; });
  }
  return ds;
}

std::size_t Dataset::observation_count() const {
  std::size_t n = 0;
  for (const auto& c : clinics_) n += c.observations.size();
  return n;
}

const ClinicSeries* Dataset::find(const std::string& clinic_id) const {
  for (const auto& c : clinics_) {
    if (c.id == clinic_id) return &c;
  }
  return nullptr;
}

int Dataset::first_year() const {
  if (empty()) throw std::logic_error("empty dataset has no first year");
  int y = clinics_.front().observations.front().year;
  for (const auto& c : clinics_) y = std::min(y, c.observations.front().year);
  return y;
}

int Dataset::last_year() const {
  if (empty()) throw std::logic_error("empty dataset has no last year");
  int y = clinics_.front().observations.back().year;
  for (const auto& c : clinics_) y = std::max(y, c.observations.back().year);
  return y;
}

Dataset Dataset::truncated(int truncate_year) const {
  Dataset out;
  for (const auto& c : clinics_) {
    ClinicSeries kept{c.id, {}};
    for (const auto& o : c.observations) {
      if (o.year <= truncate_year) kept.observations.push_back(o);
    }
    if (!kept.observations.empty()) out.clinics_.push_back(std::move(kept));
  }
  return out;
}

std::vector<ClinicObservation> Dataset::held_out(int truncate_year) const {
  std::vector<ClinicObservation> out;
  for (const auto& c : clinics_) {
    for (const auto& o : c.observations) {
      if (o.year > truncate_year) out.push_back(o);
    }
  }
  return out;
}

std::vector<ClinicObservation> Dataset::flatten() const {
  std::vector<ClinicObservation> out;
  for (const auto& c : clinics_) out.insert(out.end(), c.observations.begin(), c.observations.end());
  return out;
}

void SigmaPrior::validate() const {
  if (!(beta1 > 0.0)) throw ConfigError("beta1 must be > 0");
  if (!(beta2 > 0.0)) throw ConfigError("beta2 must be > 0");
}

double delta_method_variance(double gamma, double probit_gamma, int n_tested) {
  return 2.0 * std::numbers::pi * std::exp(probit_gamma * probit_gamma) * gamma * (1.0 - gamma) / n_tested;
}

double delta_method_variance(double gamma, int n_tested) {
  return delta_method_variance(gamma, probit(gamma), n_tested);
}

TransformedObs transform_observation(const ClinicObservation& obs) {
  TransformedObs t;
  t.x = (obs.n_positive + 0.5) / (obs.n_tested + 1.0);
  t.w = probit(t.x);
  t.v = delta_method_variance(t.x, t.w, obs.n_tested);
  return t;
}

double clamped_probit(double rho) {
  return probit(std::clamp(rho, kPrevalenceClamp, 1.0 - kPrevalenceClamp));
}

std::vector<double> clinic_residuals(const PrevalenceTrajectory& traj, const ClinicSeries& clinic) {
  std::vector<double> d;
  d.reserve(clinic.observations.size());
  for (const auto& o : clinic.observations) {
    if (!traj.contains(o.year)) {
      throw std::out_of_range("observation year " + std::to_string(o.year) + " of clinic " + clinic.id +
                              " is not on the trajectory grid");
    }
    d.push_back(transform_observation(o).w - clamped_probit(traj.at(o.year)));
  }
  return d;
}

std::vector<std::vector<double>> residuals(const PrevalenceTrajectory& traj, const Dataset& ds) {
  std::vector<std::vector<double>> out;
  out.reserve(ds.clinics().size());
  for (const auto& c : ds.clinics()) out.push_back(clinic_residuals(traj, c));
  return out;
}

std::vector<double> clinic_variances(const ClinicSeries& clinic) {
  std::vector<double> v;
  v.reserve(clinic.observations.size());
  for (const auto& o : clinic.observations) v.push_back(transform_observation(o).v);
  return v;
}

double clinic_marginal_logdensity(std::span<const double> d, std::span<const double> v, double sigma2) {
  if (d.size() != v.size()) throw std::invalid_argument("residual and variance vectors differ in length");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be >= 0");
  double precision = 0.0;
  double weighted = 0.0;
  double quadratic = 0.0;
  double log_det_v = 0.0;
  for (std::size_t t = 0; t < d.size(); ++t) {
    if (!(v[t] > 0.0)) throw std::invalid_argument("variances must be > 0");
    precision += 1.0 / v[t];
    weighted += d[t] / v[t];
    quadratic += d[t] * d[t] / v[t];
    log_det_v += std::log(v[t]);
  }
  const double q = 1.0 + sigma2 * precision;
  const double log_det = log_det_v + std::log(q);
  const double form = quadratic - sigma2 * weighted * weighted / q;
  return -0.5 * (static_cast<double>(d.size()) * kLog2Pi + log_det + form);
}

double sigma2_prior_logdensity(double sigma2, const SigmaPrior& prior) {
  if (!(sigma2 > 0.0)) throw std::domain_error("sigma2 must be > 0");
  const double rate = 1.0 / prior.beta2;
  return prior.beta1 * std::log(rate) - std::lgamma(prior.beta1) - (prior.beta1 + 1.0) * std::log(sigma2) -
         rate / sigma2;
}

LikelihoodEvaluator::LikelihoodEvaluator(const Dataset& ds, SigmaPrior prior, QuadratureConfig quad)
    : prior_(prior), quad_(quad) {
  prior_.validate();
  quad_.validate();
  clinic_offset_.push_back(0);
  for (const auto& c : ds.clinics()) {
    double precision = 0.0;
    for (const auto& o : c.observations) {
      const TransformedObs t = transform_observation(o);
      years_.push_back(o.year);
      w_.push_back(t.w);
      inv_v_.push_back(1.0 / t.v);
      precision += 1.0 / t.v;
      constant_ -= 0.5 * (kLog2Pi + std::log(t.v));
    }
    precision_.push_back(precision);
    clinic_offset_.push_back(w_.size());
  }
}

LogIntegral LikelihoodEvaluator::integrate(const PrevalenceTrajectory& traj) const {
  const std::size_t n_clinics = clinic_count();
  if (n_clinics == 0) return LogIntegral{};

  std::vector<double> weighted(n_clinics, 0.0);
  std::vector<double> quadratic(n_clinics, 0.0);
  for (std::size_t s = 0; s < n_clinics; ++s) {
    for (std::size_t i = clinic_offset_[s]; i < clinic_offset_[s + 1]; ++i) {
      if (!traj.contains(years_[i])) {
        throw std::out_of_range("observation year " + std::to_string(years_[i]) + " is not on the trajectory grid");
      }
      const double d = w_[i] - clamped_probit(traj.at(years_[i]));
      weighted[s] += d * inv_v_[i];
      quadratic[s] += d * d * inv_v_[i];
    }
  }
  const simd::ClinicMoments moments{precision_, weighted, quadratic};

  std::vector<double> sigma2;
  std::vector<double> terms;
  auto log_integrand = [&](std::span<const double> u, std::span<double> out) {
    sigma2.resize(u.size());
    terms.resize(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) sigma2[k] = u[k] / (1.0 - u[k]);
    simd::clinic_marginal_terms(moments, sigma2, terms);
    for (std::size_t k = 0; k < u.size(); ++k) {
      out[k] = -0.5 * terms[k] + sigma2_prior_logdensity(sigma2[k], prior_) - 2.0 * std::log1p(-u[k]);
    }
  };
  static const std::vector<double> breaks = u_breakpoints();
  LogIntegral result = integrate_log(log_integrand, breaks, quad_);
  result.log_value += constant_;
  return result;
}

double LikelihoodEvaluator::log_likelihood(const PrevalenceTrajectory& traj) const {
  return integrate(traj).log_value;
}

double integrated_log_likelihood(const PrevalenceTrajectory& traj, const Dataset& ds, const SigmaPrior& prior,
                                 const QuadratureConfig& quad) {
  return LikelihoodEvaluator(ds, prior, quad).log_likelihood(traj);
}

}  // namespace epp
