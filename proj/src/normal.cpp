#include "epp/normal.hpp"

#include <boost/math/distributions/normal.hpp>

namespace epp {

namespace {
const boost::math::normal_distribution<double> kStandardNormal{0.0, 1.0};
}

double probit(double p) { return boost::math::quantile(kStandardNormal, p); }

double normal_cdf(double x) { return boost::math::cdf(kStandardNormal, x); }

}  // namespace epp
