#include "epp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "epp/error.hpp"

namespace epp::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

// Non-negative decimal `digits[.digits]` as mantissa / denominator, exactly.
struct Decimal {
  std::int64_t mantissa = 0;
  std::int64_t denominator = 1;
};

std::optional<Decimal> parse_decimal(std::string_view text) {
  // Six fraction digits keep tested * mantissa within 64 bits.
  constexpr std::size_t kMaxFractionDigits = 6;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  const std::string_view fraction = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty() && fraction.empty()) return std::nullopt;
  if (whole.size() > 3 || fraction.size() > kMaxFractionDigits) return std::nullopt;
  Decimal d;
  for (std::string_view part : {whole, fraction}) {
    for (char c : part) {
      if (c < '0' || c > '9') return std::nullopt;
      d.mantissa = d.mantissa * 10 + (c - '0');
    }
  }
  for (std::size_t i = 0; i < fraction.size(); ++i) d.denominator *= 10;
  return d;
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string format_g(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

// ---------------------------------------------------------------- dataset

Dataset parse_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return parse_dataset(in, path.string());
}

Dataset parse_dataset(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  int col_clinic = -1, col_year = -1, col_tested = -1, col_positive = -1, col_percent = -1;
  std::size_t n_cols = 0;
  bool have_header = false;
  std::vector<ClinicObservation> observations;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (!have_header) {
      n_cols = fields.size();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto f = fields[i];
        const int idx = static_cast<int>(i);
        if (f == "clinic") col_clinic = idx;
        else if (f == "year") col_year = idx;
        else if (f == "tested") col_tested = idx;
        else if (f == "positive") col_positive = idx;
        else if (f == "prevalence_percent") col_percent = idx;
        else throw DataError(where(source, line_no) + "unknown column '" + std::string(f) + "'");
      }
      if (col_clinic < 0 || col_year < 0 || col_tested < 0) {
        throw DataError(where(source, line_no) + "header needs clinic, year and tested columns");
      }
      if (col_positive >= 0 && col_percent >= 0) {
        throw DataError(where(source, line_no) + "give either positive or prevalence_percent, not both");
      }
      if (col_positive < 0 && col_percent < 0) {
        throw DataError(where(source, line_no) + "header needs a positive or prevalence_percent column");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != n_cols) {
      throw DataError(where(source, line_no) + "expected " + std::to_string(n_cols) + " fields, found " +
                      std::to_string(fields.size()));
    }
    ClinicObservation obs;
    obs.clinic_id = std::string(fields[static_cast<std::size_t>(col_clinic)]);
    if (obs.clinic_id.empty()) throw DataError(where(source, line_no) + "empty clinic id");
    if (!parse_number(fields[static_cast<std::size_t>(col_year)], obs.year)) {
      throw DataError(where(source, line_no) + "year must be an integer");
    }
    if (!parse_number(fields[static_cast<std::size_t>(col_tested)], obs.n_tested)) {
      throw DataError(where(source, line_no) + "tested must be an integer count");
    }
    if (col_positive >= 0) {
      if (!parse_number(fields[static_cast<std::size_t>(col_positive)], obs.n_positive)) {
        throw DataError(where(source, line_no) + "positive must be an integer count");
      }
    } else {
      const auto percent = parse_decimal(fields[static_cast<std::size_t>(col_percent)]);
      if (!percent || percent->mantissa > 100 * percent->denominator) {
        throw DataError(where(source, line_no) + "prevalence_percent must be a decimal number in [0, 100]");
      }
      if (obs.n_tested >= 1) {
        // Exact half-up rounding of tested * percent / 100 in integer arithmetic.
        const std::int64_t den = percent->denominator * 100;
        const std::int64_t num = static_cast<std::int64_t>(obs.n_tested) * percent->mantissa;
        obs.n_positive = static_cast<int>((2 * num + den) / (2 * den));
      }
    }
    if (obs.n_tested < 1) throw DataError(where(source, line_no) + "tested must be >= 1");
    if (obs.n_positive < 0 || obs.n_positive > obs.n_tested) {
      throw DataError(where(source, line_no) + "positive must lie in [0, tested]");
    }
    observations.push_back(std::move(obs));
  }
  if (!have_header) throw DataError(source + ": missing header line");
  try {
    return Dataset::from_observations(observations);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  out << "clinic,year,tested,positive\n";
  for (const auto& c : ds.clinics()) {
    for (const auto& o : c.observations) {
      out << o.clinic_id << ',' << o.year << ',' << o.n_tested << ',' << o.n_positive << '\n';
    }
  }
}

// ---------------------------------------------------------------- config

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return parse_config(in, path.string());
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  MeldingConfig& m = cfg.melding;
  bool constraints_seen = false;

  using Setter = std::function<void(std::string_view)>;
  auto real = [](double& target, std::function<bool(double)> ok, const char* range) -> Setter {
    return [&target, ok, range](std::string_view v) {
      double x = 0.0;
      if (!parse_number(v, x)) throw ConfigError("expected a number");
      if (!ok(x)) throw ConfigError(std::string("value must be ") + range);
      target = x;
    };
  };
  auto integer = [](auto& target, std::function<bool(long long)> ok, const char* range) -> Setter {
    return [&target, ok, range](std::string_view v) {
      long long x = 0;
      if (!parse_number(v, x)) throw ConfigError("expected an integer");
      if (!ok(x)) throw ConfigError(std::string("value must be ") + range);
      target = static_cast<std::remove_reference_t<decltype(target)>>(x);
    };
  };
  auto positive = [](double x) { return x > 0.0; };
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  auto any_int = [](long long) { return true; };

  const std::map<std::string, Setter, std::less<>> setters{
      {"mu", real(m.demography.mu, positive, "> 0")},
      {"entry_rate", real(m.demography.entry_rate, positive, "> 0")},
      {"kappa", real(m.demography.kappa, unit, "in [0, 1]")},
      {"lambda0", real(m.survival.lambda0, [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)")},
      {"weibull_shape", real(m.survival.weibull_shape, positive, "> 0")},
      {"weibull_scale", real(m.survival.weibull_scale, positive, "> 0")},
      {"dt", real(m.grid.dt, [](double x) { return x > 0.0 && x <= 1.0; }, "in (0, 1]")},
      {"start_year", integer(m.grid.start_year, any_int, "an integer")},
      {"end_year", integer(m.grid.end_year, any_int, "an integer")},
      {"r_max", real(m.prior.r_max, positive, "> 0")},
      {"t0_min", integer(m.prior.t0_min, any_int, "an integer")},
      {"t0_max", integer(m.prior.t0_max, any_int, "an integer")},
      {"chi_prior", real(m.prior.chi_prior, positive, "> 0")},
      {"beta1", real(m.sigma_prior.beta1, positive, "> 0")},
      {"beta2", real(m.sigma_prior.beta2, positive, "> 0")},
      {"rel_tol", real(m.quadrature.rel_tol, positive, "> 0")},
      {"max_subdivisions", integer(m.quadrature.max_subdivisions, [](long long x) { return x >= 0; }, ">= 0")},
      {"n_prior", integer(m.n_prior, [](long long x) { return x >= 1; }, ">= 1")},
      {"n_resample", integer(m.n_resample, [](long long x) { return x >= 1; }, ">= 1")},
      {"seed", integer(m.seed, [](long long x) { return x >= 0; }, ">= 0")},
      {"constraint",
       [&](std::string_view v) {
         if (!constraints_seen) m.constraints.clear();
         constraints_seen = true;
         if (v == "none") return;
         const auto parts = split(v, ',');
         OutputConstraint c;
         if (parts.size() != 3 || !parse_number(parts[0], c.year) || !parse_number(parts[1], c.lower) ||
             !parse_number(parts[2], c.upper)) {
           throw ConfigError("constraint must be YEAR,LOWER,UPPER");
         }
         c.validate();
         m.constraints.push_back(c);
       }},
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where(source, line_no) + "expected key = value");
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where(source, line_no) + "unknown key '" + std::string(key) + "'");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where(source, line_no) + std::string(key) + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

void write_config(const RunConfig& cfg, std::ostream& out) {
  const MeldingConfig& m = cfg.melding;
  auto g = [](double x) { return format_g(x, 17); };
  out << "mu = " << g(m.demography.mu) << "\nentry_rate = " << g(m.demography.entry_rate)
      << "\nkappa = " << g(m.demography.kappa) << "\nlambda0 = " << g(m.survival.lambda0)
      << "\nweibull_shape = " << g(m.survival.weibull_shape) << "\nweibull_scale = " << g(m.survival.weibull_scale)
      << "\ndt = " << g(m.grid.dt) << "\nstart_year = " << m.grid.start_year << "\nend_year = " << m.grid.end_year
      << "\nr_max = " << g(m.prior.r_max) << "\nt0_min = " << m.prior.t0_min << "\nt0_max = " << m.prior.t0_max
      << "\nchi_prior = " << g(m.prior.chi_prior) << "\nbeta1 = " << g(m.sigma_prior.beta1)
      << "\nbeta2 = " << g(m.sigma_prior.beta2) << "\nrel_tol = " << g(m.quadrature.rel_tol)
      << "\nmax_subdivisions = " << m.quadrature.max_subdivisions << "\nn_prior = " << m.n_prior
      << "\nn_resample = " << m.n_resample << "\nseed = " << m.seed << '\n';
  if (m.constraints.empty()) out << "constraint = none\n";
  for (const auto& c : m.constraints) {
    out << "constraint = " << c.year << ',' << g(c.lower) << ',' << g(c.upper) << '\n';
  }
}

// ---------------------------------------------------------------- outputs

void write_trajectory(const PrevalenceTrajectory& traj, std::ostream& out) {
  out << "year,prevalence\n";
  for (std::size_t i = 0; i < traj.rho.size(); ++i) {
    out << traj.first_year + static_cast<int>(i) << ',' << format_g(traj.rho[i], 6) << '\n';
  }
}

void write_posterior(const PosteriorSample& sample, std::ostream& out) {
  out << "index,multiplicity,r,f0,t0,phi";
  if (!sample.draws.empty()) {
    for (int year : sample.draws.front().trajectory.years()) out << ",rho_" << year;
  }
  out << '\n';
  for (const auto& d : sample.draws) {
    out << d.source_index << ',' << d.multiplicity << ',' << format_g(d.params.r, 17) << ','
        << format_g(d.params.f0, 17) << ',' << d.params.t0 << ',' << format_g(d.params.phi, 17);
    for (double rho : d.trajectory.rho) out << ',' << format_g(rho, 6);
    out << '\n';
  }
}

PosteriorSample read_posterior(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_posterior(in, path.string());
}

PosteriorSample read_posterior(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError(source + ": empty posterior file");
  const auto header = split(line, ',');
  static const char* fixed[] = {"index", "multiplicity", "r", "f0", "t0", "phi"};
  if (header.size() < 7) throw DataError(where(source, 1) + "posterior header needs at least one rho_YYYY column");
  for (std::size_t i = 0; i < 6; ++i) {
    if (header[i] != fixed[i]) throw DataError(where(source, 1) + "unexpected column '" + std::string(header[i]) + "'");
  }
  int first_year = 0;
  for (std::size_t i = 6; i < header.size(); ++i) {
    int year = 0;
    if (header[i].substr(0, 4) != "rho_" || !parse_number(header[i].substr(4), year)) {
      throw DataError(where(source, 1) + "bad trajectory column '" + std::string(header[i]) + "'");
    }
    if (i == 6) first_year = year;
    if (year != first_year + static_cast<int>(i - 6)) {
      throw DataError(where(source, 1) + "trajectory years must be consecutive");
    }
  }

  PosteriorSample sample;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw DataError(where(source, line_no) + "wrong number of fields");
    PosteriorDraw d;
    if (!parse_number(f[0], d.source_index) || !parse_number(f[1], d.multiplicity) || d.multiplicity == 0 ||
        !parse_number(f[2], d.params.r) || !parse_number(f[3], d.params.f0) || !parse_number(f[4], d.params.t0) ||
        !parse_number(f[5], d.params.phi)) {
      throw DataError(where(source, line_no) + "malformed posterior row");
    }
    d.trajectory.first_year = first_year;
    d.trajectory.rho.resize(header.size() - 6);
    for (std::size_t i = 6; i < f.size(); ++i) {
      if (!parse_number(f[i], d.trajectory.rho[i - 6])) {
        throw DataError(where(source, line_no) + "malformed prevalence value");
      }
    }
    sample.draws.push_back(std::move(d));
  }
  if (sample.draws.empty()) throw DataError(source + ": posterior file has no draws");
  sample.diagnostics.n_resample = sample.total_multiplicity();
  sample.diagnostics.unique_count = sample.draws.size();
  for (const auto& d : sample.draws) {
    sample.diagnostics.max_multiplicity = std::max(sample.diagnostics.max_multiplicity, d.multiplicity);
  }
  return sample;
}

void write_diagnostics(const Diagnostics& d, std::ostream& out) {
  out << "n_prior = " << d.n_prior << "\nn_resample = " << d.n_resample << "\ness = " << format_g(d.ess, 10)
      << "\nunique_count = " << d.unique_count << "\nmax_multiplicity = " << d.max_multiplicity
      << "\nconstraint_pass_rate = " << format_g(d.constraint_pass_rate, 10)
      << "\nquadrature_failures = " << d.quadrature_failures << '\n';
}

void write_quantiles(const QuantileTable& table, const std::vector<std::string>& labels, std::ostream& out) {
  out << "year";
  for (const auto& l : labels) out << ",q_" << l;
  out << '\n';
  for (std::size_t i = 0; i < table.years.size(); ++i) {
    out << table.years[i];
    for (double v : table.values[i]) out << ',' << format_g(v, 6);
    out << '\n';
  }
}

void write_predictive_draws(const std::vector<double>& draws, std::ostream& out) {
  out << "draw,prevalence\n";
  for (std::size_t i = 0; i < draws.size(); ++i) out << i << ',' << format_g(draws[i], 6) << '\n';
}

void write_coverage(const CoverageReport& report, std::ostream& out) {
  out << "clinic,year,tested,observed,corrected,q_0.025,q_0.5,q_0.975,inside\n";
  for (const auto& p : report.points) {
    out << p.clinic_id << ',' << p.year << ',' << p.n_tested << ',' << format_g(p.observed, 6) << ','
        << format_g(p.corrected, 6) << ',' << format_g(p.q_lower, 6) << ',' << format_g(p.q_median, 6) << ','
        << format_g(p.q_upper, 6) << ',' << (p.inside ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------- plot data

std::vector<PlotRow> emit_plot_data(const PosteriorSample& posterior, const Dataset& dataset,
                                    const PlotRequest& request) {
  std::vector<PlotRow> rows;
  for (const auto& c : dataset.clinics()) {
    for (const auto& o : c.observations) {
      rows.push_back({"observed:" + c.id, static_cast<double>(o.year), static_cast<double>(o.n_positive) / o.n_tested});
    }
  }
  if (posterior.draws.empty()) return rows;

  const std::vector<int> years = posterior.draws.front().trajectory.years();
  const std::vector<double> probs{0.025, 0.5, 0.975};
  const std::vector<std::string> names{"q0.025", "q0.5", "q0.975"};
  const QuantileTable table = population_quantiles(posterior, years, probs);
  for (std::size_t p = 0; p < probs.size(); ++p) {
    for (std::size_t i = 0; i < years.size(); ++i) {
      rows.push_back({names[p], static_cast<double>(years[i]), table.values[i][p]});
    }
  }

  std::vector<std::size_t> order(posterior.draws.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return posterior.draws[a].multiplicity > posterior.draws[b].multiplicity;
  });
  const std::size_t n_traj = std::min(request.max_trajectories, order.size());
  for (std::size_t k = 0; k < n_traj; ++k) {
    const auto& d = posterior.draws[order[k]];
    const std::string name = "trajectory:" + std::to_string(d.source_index);
    for (std::size_t i = 0; i < d.trajectory.rho.size(); ++i) {
      rows.push_back({name, static_cast<double>(d.trajectory.first_year + static_cast<int>(i)), d.trajectory.rho[i]});
    }
  }

  auto histogram = [&](const std::string& name, auto get, bool integer_bins) {
    double lo = get(posterior.draws.front());
    double hi = lo;
    for (const auto& d : posterior.draws) {
      lo = std::min(lo, get(d));
      hi = std::max(hi, get(d));
    }
    std::size_t bins = request.histogram_bins;
    double width = 0.0;
    if (integer_bins) {
      bins = static_cast<std::size_t>(hi - lo) + 1;
      width = 1.0;
    } else {
      width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
    }
    std::vector<double> counts(bins, 0.0);
    for (const auto& d : posterior.draws) {
      auto b = static_cast<std::size_t>(std::floor((get(d) - lo) / width));
      counts[std::min(b, bins - 1)] += static_cast<double>(d.multiplicity);
    }
    for (std::size_t b = 0; b < bins; ++b) {
      const double centre = integer_bins ? lo + static_cast<double>(b) : lo + (static_cast<double>(b) + 0.5) * width;
      rows.push_back({name, centre, counts[b]});
    }
  };
  histogram("hist:r", [](const PosteriorDraw& d) { return d.params.r; }, false);
  histogram("hist:f0", [](const PosteriorDraw& d) { return d.params.f0; }, false);
  histogram("hist:t0", [](const PosteriorDraw& d) { return static_cast<double>(d.params.t0); }, true);
  histogram("hist:phi", [](const PosteriorDraw& d) { return d.params.phi; }, false);
  return rows;
}

void write_plot_data(const std::vector<PlotRow>& rows, std::ostream& out) {
  out << "series,year,value\n";
  for (const auto& r : rows) out << r.series << ',' << format_g(r.year, 10) << ',' << format_g(r.value, 6) << '\n';
}

}  // namespace epp::io
