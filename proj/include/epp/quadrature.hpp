#pragma once

#include <functional>
#include <span>

namespace epp {

struct QuadratureConfig {
  double rel_tol = 1e-6;
  int max_subdivisions = 200;

  void validate() const;
};

/// Fills log_f[i] = log f(x[i]) for a batch of abscissae.
using LogBatchIntegrand = std::function<void(std::span<const double> x, std::span<double> log_f)>;

struct LogIntegral {
  double log_value = 0.0;  ///< log of the integral
  double rel_error = 0.0;  ///< estimated relative error
  int subdivisions = 0;
  int evaluations = 0;
};

/// Globally adaptive 21-point Gauss-Kronrod integration of a function given
/// in log space. The integrand is rescaled by its running maximum so that
/// values far below the double range still integrate correctly.
/// `breakpoints` must be increasing and holds at least the two end points;
/// it defines the initial partition. Throws QuadratureError when rel_tol is
/// not met within max_subdivisions bisections.
LogIntegral integrate_log(const LogBatchIntegrand& log_f, std::span<const double> breakpoints,
                          const QuadratureConfig& cfg);

}  // namespace epp
