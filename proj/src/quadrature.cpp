#include "epp/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "epp/error.hpp"

namespace epp {

namespace {

constexpr int kHalf = 10;              // positive Kronrod abscissae excluding the centre
constexpr int kNodes = 2 * kHalf + 1;  // 21 points per interval
constexpr double kRescaleMargin = 40.0;

struct Rule {
  std::array<double, kHalf + 1> x{};   // x[0] = 0 (centre)
  std::array<double, kHalf + 1> wk{};  // Kronrod weights
  std::array<double, kHalf + 1> wg{};  // Gauss weights on the shared nodes, 0 elsewhere
};

const Rule& rule() {
  static const Rule r = [] {
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    Rule out;
    const auto& kx = gauss_kronrod<double, kNodes>::abscissa();
    const auto& kw = gauss_kronrod<double, kNodes>::weights();
    const auto& gx = gauss<double, kHalf>::abscissa();
    const auto& gw = gauss<double, kHalf>::weights();
    for (std::size_t i = 0; i <= kHalf; ++i) {
      out.x[i] = kx[i];
      out.wk[i] = kw[i];
      for (std::size_t j = 0; j < gx.size(); ++j) {
        if (std::abs(gx[j] - kx[i]) < 1e-14) out.wg[i] = gw[j];
      }
    }
    return out;
  }();
  return r;
}

struct Interval {
  double a = 0.0;
  double b = 0.0;
  double result = 0.0;  // in units of exp(scale)
  double error = 0.0;
  std::array<double, kNodes> log_f{};
};

// Abscissae of one interval: centre first, then the +/- pairs.
void fill_nodes(double a, double b, std::span<double> out) {
  const Rule& r = rule();
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  out[0] = centre;
  for (int i = 1; i <= kHalf; ++i) {
    out[2 * i - 1] = centre - half * r.x[i];
    out[2 * i] = centre + half * r.x[i];
  }
}

void estimate(Interval& iv, double scale) {
  const Rule& r = rule();
  const double half = 0.5 * (iv.b - iv.a);
  std::array<double, kNodes> f{};
  for (int i = 0; i < kNodes; ++i) f[i] = std::exp(iv.log_f[i] - scale);
  double resk = r.wk[0] * f[0];
  double resg = r.wg[0] * f[0];
  double resabs = std::abs(resk);
  for (int i = 1; i <= kHalf; ++i) {
    const double pair = f[2 * i - 1] + f[2 * i];
    resk += r.wk[i] * pair;
    resg += r.wg[i] * pair;
    resabs += r.wk[i] * (std::abs(f[2 * i - 1]) + std::abs(f[2 * i]));
  }
  const double mean = 0.5 * resk;
  double resasc = r.wk[0] * std::abs(f[0] - mean);
  for (int i = 1; i <= kHalf; ++i) resasc += r.wk[i] * (std::abs(f[2 * i - 1] - mean) + std::abs(f[2 * i] - mean));
  resabs *= std::abs(half);
  resasc *= std::abs(half);
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = std::numeric_limits<double>::min();
  if (resabs > tiny / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  iv.result = resk * half;
  iv.error = err;
}

// Largest log value of an interval; NaN if any node is NaN or +infinity.
double max_log(const Interval& iv) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : iv.log_f) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::quiet_NaN();
    m = std::max(m, v);
  }
  return m;
}

}  // namespace

void QuadratureConfig::validate() const {
  if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be > 0");
  if (max_subdivisions < 0) throw ConfigError("max_subdivisions must be >= 0");
}

LogIntegral integrate_log(const LogBatchIntegrand& log_f, std::span<const double> breakpoints,
                          const QuadratureConfig& cfg) {
  if (breakpoints.size() < 2) throw std::invalid_argument("integrate_log needs at least two breakpoints");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) throw std::invalid_argument("breakpoints must increase");
  }

  LogIntegral out;
  std::vector<Interval> intervals(breakpoints.size() - 1);
  std::vector<double> x(intervals.size() * kNodes);
  std::vector<double> lf(x.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    intervals[i].a = breakpoints[i];
    intervals[i].b = breakpoints[i + 1];
    fill_nodes(intervals[i].a, intervals[i].b, std::span<double>(x).subspan(i * kNodes, kNodes));
  }
  log_f(x, lf);
  out.evaluations += static_cast<int>(x.size());

  double scale = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    std::copy_n(lf.begin() + static_cast<std::ptrdiff_t>(i * kNodes), kNodes, intervals[i].log_f.begin());
    const double m = max_log(intervals[i]);
    if (std::isnan(m)) throw InferenceError("integrand returned NaN or +infinity");
    scale = std::max(scale, m);
  }
  if (scale == -std::numeric_limits<double>::infinity()) {
    out.log_value = scale;
    return out;
  }
  for (auto& iv : intervals) estimate(iv, scale);

  std::array<double, 2 * kNodes> xs{};
  std::array<double, 2 * kNodes> ls{};
  for (;;) {
    double total = 0.0;
    double err = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      total += intervals[i].result;
      err += intervals[i].error;
      if (intervals[i].error > intervals[worst].error) worst = i;
    }
    if (err <= cfg.rel_tol * std::abs(total)) {
      out.log_value = std::log(total) + scale;
      out.rel_error = total != 0.0 ? err / std::abs(total) : 0.0;
      return out;
    }
    if (out.subdivisions >= cfg.max_subdivisions) {
      std::ostringstream msg;
      msg << "quadrature did not reach rel_tol " << cfg.rel_tol << " within " << cfg.max_subdivisions
          << " subdivisions (achieved relative error " << err / std::abs(total) << ")";
      throw QuadratureError(msg.str(), err / std::abs(total), std::log(total) + scale);
    }

    const Interval parent = intervals[worst];
    const double mid = 0.5 * (parent.a + parent.b);
    Interval left{parent.a, mid};
    Interval right{mid, parent.b};
    fill_nodes(left.a, left.b, std::span<double>(xs).first(kNodes));
    fill_nodes(right.a, right.b, std::span<double>(xs).last(kNodes));
    log_f(xs, ls);
    out.evaluations += 2 * kNodes;
    ++out.subdivisions;
    std::copy_n(ls.begin(), kNodes, left.log_f.begin());
    std::copy_n(ls.begin() + kNodes, kNodes, right.log_f.begin());

    const double new_max = std::max(max_log(left), max_log(right));
    if (std::isnan(new_max)) throw InferenceError("integrand returned NaN or +infinity");
    if (new_max > scale + kRescaleMargin) {
      const double factor = std::exp(scale - new_max);
      for (auto& iv : intervals) {
        iv.result *= factor;
        iv.error *= factor;
      }
      scale = new_max;
    }
    estimate(left, scale);
    estimate(right, scale);
    intervals[worst] = left;
    intervals.push_back(right);
  }
}

}  // namespace epp
