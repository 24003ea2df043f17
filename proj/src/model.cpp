#include "epp/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "epp/error.hpp"
#include "epp/simd.hpp"

namespace epp {

namespace {

constexpr double kKernelHorizonYears = 60.0;
constexpr int kEntryLagYears = 15;

double weibull_survival(double t, const SurvivalConfig& cfg) {
  return std::exp(-std::pow(t / cfg.weibull_scale, cfg.weibull_shape));
}

void check_params(const EppParams& p, const SimGrid& grid) {
  if (!(p.r >= 0.0) || !std::isfinite(p.r)) throw std::invalid_argument("r must be finite and >= 0");
  if (!(p.f0 >= 0.0 && p.f0 <= 1.0)) throw std::invalid_argument("f0 must lie in [0, 1]");
  if (!std::isfinite(p.phi)) throw std::invalid_argument("phi must be finite");
  if (p.t0 < grid.start_year || p.t0 > grid.end_year) {
    throw std::invalid_argument("t0 = " + std::to_string(p.t0) + " lies outside the simulation grid");
  }
}

}  // namespace

void DemographyConfig::validate() const {
  if (!(mu > 0.0)) throw ConfigError("mu must be > 0");
  if (!(entry_rate > 0.0)) throw ConfigError("entry_rate must be > 0");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
}

void SurvivalConfig::validate() const {
  if (!(weibull_shape > 0.0)) throw ConfigError("weibull_shape must be > 0");
  if (!(weibull_scale > 0.0)) throw ConfigError("weibull_scale must be > 0");
  if (!(lambda0 >= 0.0 && lambda0 < 1.0)) throw ConfigError("lambda0 must lie in [0, 1)");
}

void SimGrid::validate() const {
  if (start_year >= end_year) throw ConfigError("start_year must be < end_year");
  if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("dt must lie in (0, 1]");
  const double per_year = 1.0 / dt;
  if (std::abs(per_year - std::round(per_year)) > 1e-9 * per_year) {
    throw ConfigError("dt must divide one year into a whole number of steps");
  }
}

int SimGrid::steps_per_year() const { return static_cast<int>(std::lround(1.0 / dt)); }

int SimGrid::step_count() const { return (end_year + 1 - start_year) * steps_per_year(); }

double SimGrid::step_time(int step) const {
  return start_year + static_cast<double>(step) / steps_per_year();
}

double PrevalenceTrajectory::at(int year) const {
  if (!contains(year)) throw std::out_of_range("year " + std::to_string(year) + " is not on the trajectory grid");
  return rho[static_cast<std::size_t>(year - first_year)];
}

std::vector<int> PrevalenceTrajectory::years() const {
  std::vector<int> out(rho.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = first_year + static_cast<int>(i);
  return out;
}

double chi(double x_frac, double f0) { return x_frac - (1.0 - f0); }

namespace {

// at_risk_fraction with logit(f0) supplied by the caller.
double at_risk_given_logit(double x_frac, double f0, double logit_f0, double phi) {
  if (f0 <= 0.0) return 0.0;
  if (f0 >= 1.0) return 1.0;
  const double a = phi * chi(x_frac, f0) + logit_f0;
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double logit_or_zero(double f0) { return f0 > 0.0 && f0 < 1.0 ? std::log(f0 / (1.0 - f0)) : 0.0; }

}  // namespace

double at_risk_fraction(double x_frac, double f0, double phi) {
  return at_risk_given_logit(x_frac, f0, logit_or_zero(f0), phi);
}

std::vector<double> death_kernel(const SimGrid& grid, const SurvivalConfig& cfg) {
  const int per_year = grid.steps_per_year();
  const int horizon = static_cast<int>(kKernelHorizonYears) * per_year;
  std::vector<double> g(static_cast<std::size_t>(horizon));
  double previous = 1.0;
  for (int k = 1; k <= horizon; ++k) {
    const double current = weibull_survival(static_cast<double>(k) / per_year, cfg);
    g[static_cast<std::size_t>(k - 1)] = previous - current;
    previous = current;
  }
  return g;
}

double median_survival(const SurvivalConfig& cfg) {
  return cfg.weibull_scale * std::pow(std::log(2.0), 1.0 / cfg.weibull_shape);
}

double entry_count(const EpidemicState& lagged, const DemographyConfig& demog, double dt) {
  return demog.entry_rate * (lagged.x + lagged.z + demog.kappa * lagged.y) * dt;
}

PrevalenceTrajectory annualize(std::span<const double> step_prevalence, const SimGrid& grid) {
  const int per_year = grid.steps_per_year();
  PrevalenceTrajectory traj;
  traj.first_year = grid.start_year;
  traj.rho.reserve(static_cast<std::size_t>(grid.end_year - grid.start_year + 1));
  for (int year = grid.start_year; year <= grid.end_year; ++year) {
    // Mid-year lies exactly on the grid for even steps_per_year; otherwise
    // the step just after mid-year is taken.
    const int step = (year - grid.start_year) * per_year + (per_year + 1) / 2;
    if (static_cast<std::size_t>(step) >= step_prevalence.size()) {
      throw std::invalid_argument("step series does not cover the grid");
    }
    traj.rho.push_back(step_prevalence[static_cast<std::size_t>(step)]);
  }
  return traj;
}

Simulator::Simulator(DemographyConfig demog, SurvivalConfig survival, SimGrid grid)
    : demog_(demog), survival_(survival), grid_(grid) {
  demog_.validate();
  survival_.validate();
  grid_.validate();
  if (!(demog_.mu * grid_.dt < 1.0)) throw ConfigError("mu * dt must be < 1");
  kernel_reversed_ = death_kernel(grid_, survival_);
  std::reverse(kernel_reversed_.begin(), kernel_reversed_.end());
  const auto n = static_cast<std::size_t>(grid_.step_count());
  incidence_.assign(n, 0.0);
  fertile_.assign(n + 1, 0.0);
  prevalence_.assign(n + 1, 0.0);
}

Simulator::Rates Simulator::rates(const EpidemicState& s, const EppParams& params, double logit_f0,
                                  double entries) const {
  const double total = s.total();
  if (!(total > 0.0)) return Rates{};
  const double f = at_risk_given_logit(s.x / total, params.f0, logit_f0, params.phi);
  const double infection = params.r * (s.y / total) * s.z;
  return Rates{(1.0 - f) * entries - demog_.mu * s.x, f * entries - demog_.mu * s.z - infection, infection};
}

void Simulator::integrate(const EppParams& params, bool keep_states) {
  check_params(params, grid_);
  const int n_steps = grid_.step_count();
  const int per_year = grid_.steps_per_year();
  const int lag = kEntryLagYears * per_year;
  const int horizon = static_cast<int>(kernel_reversed_.size());
  const int pulse_step = (params.t0 - grid_.start_year) * per_year;
  const double dt = grid_.dt;
  const double logit_f0 = logit_or_zero(params.f0);

  EpidemicState s{1.0 - params.f0, params.f0, 0.0};
  const double initial_fertile = s.x + s.z;

  std::fill(incidence_.begin(), incidence_.end(), 0.0);
  if (keep_states) {
    states_.assign(static_cast<std::size_t>(n_steps) + 1, EpidemicState{});
    states_[0] = s;
  }
  fertile_[0] = initial_fertile;
  prevalence_[0] = 0.0;

  for (int n = 0; n < n_steps; ++n) {
    double pulse = 0.0;
    if (n == pulse_step) {
      pulse = survival_.lambda0 * s.z;
      s.z -= pulse;
      s.y += pulse;
    }
    const double fertile_lagged = n >= lag ? fertile_[static_cast<std::size_t>(n - lag)] : initial_fertile;
    const double entries = demog_.entry_rate * fertile_lagged;

    double deaths = 0.0;
    if (n > pulse_step) {
      const int first = std::max(pulse_step, n - horizon);
      const int offset = first - (n - horizon);
      const auto len = static_cast<std::size_t>(n - first);
      deaths = simd::dot(std::span<const double>(incidence_.data() + first, len),
                         std::span<const double>(kernel_reversed_.data() + offset, len));
    }

    // Heun step: entries and deaths are held fixed over the step, the
    // state-dependent infection and recruitment terms are averaged between
    // the current state and an Euler predictor.
    const Rates k1 = rates(s, params, logit_f0, entries);
    const EpidemicState predicted{std::max(0.0, s.x + k1.dx * dt), std::max(0.0, s.z + k1.dz * dt),
                                  std::max(0.0, s.y + k1.infection * dt - deaths)};
    const Rates k2 = rates(predicted, params, logit_f0, entries);

    double x = s.x + 0.5 * (k1.dx + k2.dx) * dt;
    double infections = 0.5 * (k1.infection + k2.infection) * dt;
    double z = s.z + 0.5 * (k1.dz + k2.dz) * dt;
    if (z < 0.0) {
      infections += z;
      z = 0.0;
    }
    double y = s.y + infections - deaths;
    if (y < 0.0) y = 0.0;
    if (x < 0.0) x = 0.0;

    incidence_[static_cast<std::size_t>(n)] = infections + pulse;
    s = EpidemicState{x, z, y};
    fertile_[static_cast<std::size_t>(n) + 1] = x + z + demog_.kappa * y;
    prevalence_[static_cast<std::size_t>(n) + 1] = y / s.total();
    if (keep_states) states_[static_cast<std::size_t>(n) + 1] = s;
  }
}

PrevalenceTrajectory Simulator::run(const EppParams& params) {
  integrate(params, false);
  return annualize(prevalence_, grid_);
}

StepSeries Simulator::run_steps(const EppParams& params) {
  integrate(params, true);
  StepSeries out;
  out.states = states_;
  out.incidence = incidence_;
  return out;
}

PrevalenceTrajectory simulate(const EppParams& params, const DemographyConfig& demog, const SurvivalConfig& survival,
                              const SimGrid& grid) {
  Simulator sim(demog, survival, grid);
  return sim.run(params);
}

}  // namespace epp
