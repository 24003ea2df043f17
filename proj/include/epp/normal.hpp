#pragma once

namespace epp {

/// Standard normal quantile. Requires 0 < p < 1.
double probit(double p);

/// Standard normal distribution function.
double normal_cdf(double x);

}  // namespace epp
