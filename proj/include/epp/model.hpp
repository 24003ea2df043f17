#pragma once

// Discrete-time EPP susceptible-infected model: not-at-risk (X), at-risk (Z)
// and infected (Y) groups, logistic recruitment into the at-risk group,
// Weibull survival after infection and a single seeding pulse at t0.

#include <span>
#include <vector>

namespace epp {

/// The four calibrated inputs.
struct EppParams {
  double r = 0.0;    ///< rate of infection (per year)
  double f0 = 0.0;   ///< fraction initially at risk
  int t0 = 1980;     ///< epidemic start year
  double phi = 0.0;  ///< behavioural response
};

/// Demographic constants; all overridable from the config file.
struct DemographyConfig {
  double mu = 0.02;          ///< non-AIDS death rate per year
  double entry_rate = 0.02;  ///< 15-year-old entries per head of population 15 years earlier, per year
  double kappa = 0.5;        ///< discount on the infected group's contribution to entries

  void validate() const;
};

struct SurvivalConfig {
  double weibull_shape = 2.4;
  double weibull_scale = 10.5;
  double lambda0 = 0.001;  ///< fraction of the at-risk group infected by the start pulse

  void validate() const;
};

struct SimGrid {
  int start_year = 1970;
  int end_year = 2020;  ///< last year reported in the annual trajectory
  double dt = 0.1;

  void validate() const;
  int steps_per_year() const;
  /// Number of Euler steps; the grid covers [start_year, end_year + 1].
  int step_count() const;
  double step_time(int step) const;
};

/// Annual population prevalence, one value per integer year starting at first_year.
struct PrevalenceTrajectory {
  int first_year = 0;
  std::vector<double> rho;

  int last_year() const { return first_year + static_cast<int>(rho.size()) - 1; }
  bool contains(int year) const { return year >= first_year && year <= last_year(); }
  /// Throws std::out_of_range for years off the grid.
  double at(int year) const;
  std::vector<int> years() const;
};

/// Compartment sizes at one grid point.
struct EpidemicState {
  double x = 0.0;
  double z = 0.0;
  double y = 0.0;

  double total() const { return x + z + y; }
  double prevalence() const { return y / total(); }
};

/// Step-level model output: state at every grid point 0..step_count().
struct StepSeries {
  std::vector<EpidemicState> states;
  std::vector<double> incidence;  ///< new infections during each step (pulse included)
};

/// chi = X/N - (1 - f0).
double chi(double x_frac, double f0);

/// Fraction of new entrants joining the at-risk group,
/// exp(phi chi) / (exp(phi chi) - 1 + 1/f0), evaluated as logistic(phi chi + logit f0).
double at_risk_fraction(double x_frac, double f0, double phi);

/// Probability that an infected person dies of AIDS in the k-th step after
/// infection, g_k = S((k-1) dt) - S(k dt), for k = 1..K over a 60-year horizon.
/// Element 0 of the result is g_1.
std::vector<double> death_kernel(const SimGrid& grid, const SurvivalConfig& cfg);

/// Closed-form Weibull median survival time in years.
double median_survival(const SurvivalConfig& cfg);

/// Entrants during one step: entry_rate * (X + Z + kappa Y)(t - 15) * dt.
double entry_count(const EpidemicState& lagged, const DemographyConfig& demog, double dt);

/// Picks, for every integer year of the grid, the step nearest mid-year.
PrevalenceTrajectory annualize(std::span<const double> step_prevalence, const SimGrid& grid);

/// Reusable simulator: holds the death kernel and scratch buffers so that
/// repeated runs on the same grid do not allocate. Not thread-safe; use one
/// instance per thread.
class Simulator {
 public:
  Simulator(DemographyConfig demog, SurvivalConfig survival, SimGrid grid);

  PrevalenceTrajectory run(const EppParams& params);
  StepSeries run_steps(const EppParams& params);

  const SimGrid& grid() const { return grid_; }

 private:
  struct Rates {
    double dx = 0.0;
    double dz = 0.0;
    double infection = 0.0;
  };

  Rates rates(const EpidemicState& s, const EppParams& params, double logit_f0, double entries) const;
  void integrate(const EppParams& params, bool keep_states);

  DemographyConfig demog_;
  SurvivalConfig survival_;
  SimGrid grid_;
  std::vector<double> kernel_reversed_;
  std::vector<double> incidence_;
  std::vector<double> fertile_;
  std::vector<double> prevalence_;
  std::vector<EpidemicState> states_;
};

PrevalenceTrajectory simulate(const EppParams& params, const DemographyConfig& demog, const SurvivalConfig& survival,
                              const SimGrid& grid);

}  // namespace epp
