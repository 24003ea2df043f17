#include "epp/melding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "epp/error.hpp"
#include "epp/parallel.hpp"
#include "epp/rng.hpp"
#include "epp/simd.hpp"

namespace epp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double max_finite(std::span<const double> lw) {
  double m = kNegInf;
  for (double v : lw) m = std::max(m, v);
  return m;
}

std::vector<double> relative_weights(std::span<const double> log_weights) {
  const double m = max_finite(log_weights);
  if (m == kNegInf) {
    throw InferenceError("posterior unreachable: no prior draw satisfies constraints with positive likelihood");
  }
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - m);
  return w;
}

}  // namespace

void MeldingConfig::validate() const {
  if (n_prior < kMinPriorDraws) {
    throw ConfigError("n_prior = " + std::to_string(n_prior) + " is below the minimum of " +
                      std::to_string(kMinPriorDraws));
  }
  if (n_resample < 1 || n_resample > n_prior) throw ConfigError("n_resample must lie in [1, n_prior]");
  prior.validate();
  demography.validate();
  survival.validate();
  grid.validate();
  sigma_prior.validate();
  quadrature.validate();
  if (prior.t0_min < grid.start_year || prior.t0_max > grid.end_year) {
    throw ConfigError("t0 prior support must lie within [start_year, end_year]");
  }
  for (const auto& c : constraints) {
    c.validate();
    if (c.year < grid.start_year || c.year > grid.end_year) {
      throw ConfigError("constraint year " + std::to_string(c.year) + " lies outside the simulation grid");
    }
  }
}

std::size_t PosteriorSample::total_multiplicity() const {
  std::size_t n = 0;
  for (const auto& d : draws) n += d.multiplicity;
  return n;
}

LogWeights compute_log_weights(std::span<const WeightedDraw> draws, const LikelihoodEvaluator& likelihood,
                               const std::vector<OutputConstraint>& constraints, unsigned threads) {
  LogWeights out;
  out.values.assign(draws.size(), kNegInf);
  std::vector<unsigned char> passed(draws.size(), 0);
  std::vector<unsigned char> failed(draws.size(), 0);
  parallel_for(draws.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (constraint_indicator(draws[i].trajectory, constraints) == 0) continue;
      passed[i] = 1;
      try {
        out.values[i] = likelihood.log_likelihood(draws[i].trajectory);
      } catch (const QuadratureError&) {
        failed[i] = 1;
      }
    }
  });
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out.constraint_passes += passed[i];
    out.quadrature_failures += failed[i];
  }
  return out;
}

std::vector<double> resample_probabilities(std::span<const double> log_weights) {
  std::vector<double> w = relative_weights(log_weights);
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

std::vector<std::size_t> resample(std::span<const double> log_weights, std::size_t J, std::uint64_t seed) {
  const std::vector<double> w = relative_weights(log_weights);
  std::vector<double> cumulative(w.size());
  double running = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    running += w[i];
    cumulative[i] = running;
  }
  std::vector<std::size_t> multiplicity(w.size(), 0);
  RandomStream rng(seed, StreamPurpose::Resample, 0);
  for (std::size_t j = 0; j < J; ++j) {
    const double target = rng.uniform() * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    auto idx = static_cast<std::size_t>(it - cumulative.begin());
    if (idx >= w.size()) idx = w.size() - 1;
    // Zero-weight entries share the cumulative value of their predecessor and
    // are never selected by upper_bound, except through the clamp above.
    while (w[idx] == 0.0 && idx > 0) --idx;
    ++multiplicity[idx];
  }
  return multiplicity;
}

double effective_sample_size(std::span<const double> log_weights) {
  const std::vector<double> w = relative_weights(log_weights);
  const simd::SumSq s = simd::sum_and_sum_sq(w);
  return s.sum * s.sum / s.sum_sq;
}

Diagnostics diagnostics_report(std::span<const double> log_weights, std::span<const std::size_t> multiplicities,
                               std::size_t constraint_passes) {
  Diagnostics d;
  d.n_prior = log_weights.size();
  d.ess = effective_sample_size(log_weights);
  for (std::size_t m : multiplicities) {
    d.n_resample += m;
    if (m > 0) ++d.unique_count;
    d.max_multiplicity = std::max(d.max_multiplicity, m);
  }
  d.constraint_pass_rate =
      log_weights.empty() ? 0.0 : static_cast<double>(constraint_passes) / static_cast<double>(log_weights.size());
  return d;
}

PosteriorSample run_melding(const MeldingConfig& cfg, const Dataset& dataset) {
  cfg.validate();
  for (const auto& c : dataset.clinics()) {
    for (const auto& o : c.observations) {
      if (o.year < cfg.grid.start_year || o.year > cfg.grid.end_year) {
        throw DataError("observation year " + std::to_string(o.year) + " of clinic " + c.id +
                        " lies outside the simulation grid");
      }
    }
  }

  std::vector<WeightedDraw> draws(cfg.n_prior);
  parallel_for(cfg.n_prior, cfg.threads, [&](std::size_t begin, std::size_t end) {
    Simulator sim(cfg.demography, cfg.survival, cfg.grid);
    for (std::size_t i = begin; i < end; ++i) {
      draws[i].params = sample_input(cfg.prior, cfg.seed, i);
      draws[i].trajectory = sim.run(draws[i].params);
    }
  });

  const LikelihoodEvaluator likelihood(dataset, cfg.sigma_prior, cfg.quadrature);
  LogWeights lw = compute_log_weights(draws, likelihood, cfg.constraints, cfg.threads);
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i].log_weight = lw.values[i];

  const std::vector<std::size_t> multiplicity = resample(lw.values, cfg.n_resample, cfg.seed);

  PosteriorSample sample;
  sample.diagnostics = diagnostics_report(lw.values, multiplicity, lw.constraint_passes);
  sample.diagnostics.quadrature_failures = lw.quadrature_failures;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (multiplicity[i] == 0) continue;
    sample.draws.push_back(PosteriorDraw{i, multiplicity[i], draws[i].params, std::move(draws[i].trajectory)});
  }
  return sample;
}

}  // namespace epp
