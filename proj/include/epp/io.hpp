#pragma once

// File formats: clinic data CSV, key = value run configuration, posterior
// sample CSV with diagnostics sidecar, quantile tables and plot data.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "epp/melding.hpp"
#include "epp/predictive.hpp"

namespace epp::io {

/// Reads `clinic,year,tested,positive` or `clinic,year,tested,prevalence_percent`
/// (positive = round half up of tested * percent / 100). Throws DataError with
/// file and line on malformed input.
Dataset parse_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in, const std::string& source_name);
void write_dataset(const Dataset& ds, std::ostream& out);

/// Every setting of a run, with defaults applied for absent keys.
struct RunConfig {
  MeldingConfig melding;

  void validate() const { melding.validate(); }
};

/// `key = value` lines with `#` comments. Unknown keys, unparsable values and
/// out-of-range values throw ConfigError naming the file and line.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config(std::istream& in, const std::string& source_name);
void write_config(const RunConfig& cfg, std::ostream& out);

void write_trajectory(const PrevalenceTrajectory& traj, std::ostream& out);

void write_posterior(const PosteriorSample& sample, std::ostream& out);
PosteriorSample read_posterior(const std::filesystem::path& path);
PosteriorSample read_posterior(std::istream& in, const std::string& source_name);

void write_diagnostics(const Diagnostics& d, std::ostream& out);

/// Columns `year,q_<p>...` with p as given in labels.
void write_quantiles(const QuantileTable& table, const std::vector<std::string>& labels, std::ostream& out);

void write_predictive_draws(const std::vector<double>& draws, std::ostream& out);

void write_coverage(const CoverageReport& report, std::ostream& out);

struct PlotRequest {
  std::size_t max_trajectories = 200;
  std::size_t histogram_bins = 20;
};

struct PlotRow {
  std::string series;
  double year = 0.0;  ///< calendar year, or bin centre for histogram series
  double value = 0.0;
};

/// Long-format plot data: observed clinic prevalence (`observed:<clinic>`),
/// posterior bands (`q0.025`, `q0.5`, `q0.975`), up to max_trajectories
/// unique trajectories (`trajectory:<index>`) and multiplicity-weighted
/// histograms of the inputs (`hist:r`, `hist:f0`, `hist:t0`, `hist:phi`).
std::vector<PlotRow> emit_plot_data(const PosteriorSample& posterior, const Dataset& dataset,
                                    const PlotRequest& request);
void write_plot_data(const std::vector<PlotRow>& rows, std::ostream& out);

/// printf-style %.<digits>g.
std::string format_g(double value, int digits);

}  // namespace epp::io
