#pragma once

// Integrated random-effects likelihood of antenatal-clinic counts given a
// population prevalence trajectory. Counts are modelled on the probit
// scale as W_st = probit(rho_t) + b_s + e_st with b_s ~ N(0, sigma^2),
// e_st ~ N(0, v_st); b is integrated analytically (rank-one plus diagonal
// covariance) and sigma^2 numerically against an inverse-gamma prior.

#include <string>
#include <vector>

#include "epp/model.hpp"
#include "epp/quadrature.hpp"

namespace epp {

struct ClinicObservation {
  std::string clinic_id;
  int year = 0;
  int n_tested = 1;
  int n_positive = 0;
};

/// Observations of one clinic, sorted by year.
struct ClinicSeries {
  std::string id;
  std::vector<ClinicObservation> observations;
};

/// Clinic data grouped by clinic in order of first appearance.
class Dataset {
 public:
  Dataset() = default;

  /// Validates counts and rejects duplicate (clinic, year) pairs; throws DataError.
  static Dataset from_observations(const std::vector<ClinicObservation>& observations);

  const std::vector<ClinicSeries>& clinics() const { return clinics_; }
  bool empty() const { return clinics_.empty(); }
  std::size_t observation_count() const;
  /// nullptr if the clinic is unknown.
  const ClinicSeries* find(const std::string& clinic_id) const;
  int first_year() const;
  int last_year() const;

  /// Observations with year <= truncate_year; clinics left without data are dropped.
  Dataset truncated(int truncate_year) const;
  /// Observations with year > truncate_year.
  std::vector<ClinicObservation> held_out(int truncate_year) const;
  /// All observations, clinic by clinic.
  std::vector<ClinicObservation> flatten() const;

 private:
  std::vector<ClinicSeries> clinics_;
};

struct TransformedObs {
  double x = 0.5;  ///< continuity-corrected proportion (Y + 1/2) / (N + 1)
  double w = 0.0;  ///< probit(x)
  double v = 0.0;  ///< delta-method variance of w
};

/// Inverse-gamma prior on sigma^2 with shape beta1 and rate 1/beta2.
struct SigmaPrior {
  double beta1 = 0.58;
  double beta2 = 93.0;

  void validate() const;
};

/// Delta-method variance of the probit-transformed proportion:
/// 2 pi exp(probit(gamma)^2) gamma (1 - gamma) / n.
double delta_method_variance(double gamma, int n_tested);
/// Same, with probit(gamma) already known.
double delta_method_variance(double gamma, double probit_gamma, int n_tested);

TransformedObs transform_observation(const ClinicObservation& obs);

/// Trajectory prevalence is clamped to this distance from 0 and 1 before the probit.
inline constexpr double kPrevalenceClamp = 1e-12;
double clamped_probit(double rho);

/// Probit residuals d_st = W_st - probit(rho_t) for one clinic.
std::vector<double> clinic_residuals(const PrevalenceTrajectory& traj, const ClinicSeries& clinic);

/// Residual vectors for every clinic in dataset order.
std::vector<std::vector<double>> residuals(const PrevalenceTrajectory& traj, const Dataset& ds);

/// Delta-method variances of one clinic's observations.
std::vector<double> clinic_variances(const ClinicSeries& clinic);

/// log MVN(d; 0, sigma2 * ones + diag(v)) via the rank-one update identities.
double clinic_marginal_logdensity(std::span<const double> d, std::span<const double> v, double sigma2);

double sigma2_prior_logdensity(double sigma2, const SigmaPrior& prior);

/// Precomputes the transformed data of a dataset once and evaluates
/// log p(W | rho) for many trajectories. Const and safe to share between threads.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const Dataset& ds, SigmaPrior prior, QuadratureConfig quad);

  double log_likelihood(const PrevalenceTrajectory& traj) const;
  /// As log_likelihood, also returning quadrature statistics.
  LogIntegral integrate(const PrevalenceTrajectory& traj) const;

  std::size_t clinic_count() const { return clinic_offset_.empty() ? 0 : clinic_offset_.size() - 1; }

 private:
  SigmaPrior prior_;
  QuadratureConfig quad_;
  std::vector<int> years_;
  std::vector<double> w_;
  std::vector<double> inv_v_;
  std::vector<std::size_t> clinic_offset_;
  std::vector<double> precision_;
  double constant_ = 0.0;  ///< -1/2 sum (log 2 pi + log v) over all observations
};

double integrated_log_likelihood(const PrevalenceTrajectory& traj, const Dataset& ds, const SigmaPrior& prior,
                                 const QuadratureConfig& quad);

}  // namespace epp
