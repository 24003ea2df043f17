// eppmeld: command-line front end for simulation, fitting, projection,
// clinic prediction, backtesting and plot-data emission.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "epp/error.hpp"
#include "epp/io.hpp"
#include "epp/melding.hpp"
#include "epp/model.hpp"
#include "epp/predictive.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kConfigError = 3,
  kInferenceError = 4,
  kOutputError = 5,
};

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw OutputError("cannot write " + path);
  return out;
}

epp::io::RunConfig load_config(const std::string& path) {
  if (path.empty()) {
    epp::io::RunConfig cfg;
    cfg.validate();
    return cfg;
  }
  return epp::io::parse_config(path);
}

struct FitOverrides {
  std::optional<std::size_t> n;
  std::optional<std::size_t> resample;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;

  void apply(epp::MeldingConfig& m) const {
    if (n) m.n_prior = *n;
    if (resample) m.n_resample = *resample;
    if (seed) m.seed = *seed;
    m.threads = threads;
    try {
      m.validate();
    } catch (const epp::ConfigError& e) {
      throw epp::ConfigError(std::string("after applying --n/--resample/--seed: ") + e.what());
    }
  }
};

void add_fit_overrides(CLI::App* cmd, FitOverrides& o) {
  cmd->add_option("--n", o.n, "Number of prior draws (overrides n_prior)");
  cmd->add_option("--resample", o.resample, "Number of resampled draws (overrides n_resample)");
  cmd->add_option("--seed", o.seed, "Random seed (overrides seed)");
  cmd->add_option("--threads", o.threads, "Worker threads; 0 = all cores. Does not change results");
}

std::vector<double> parse_probs(const std::string& text, std::vector<std::string>& labels) {
  std::vector<double> probs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(p > 0.0 && p < 1.0)) {
      throw epp::ConfigError("--quantiles: '" + item + "' is not a probability in (0, 1)");
    }
    probs.push_back(p);
    labels.push_back(item);
  }
  if (probs.empty()) throw epp::ConfigError("--quantiles: empty list");
  return probs;
}

std::pair<int, int> parse_year_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument("no colon");
    std::size_t u1 = 0, u2 = 0;
    const std::string a = text.substr(0, colon);
    const std::string b = text.substr(colon + 1);
    const int first = std::stoi(a, &u1);
    const int last = std::stoi(b, &u2);
    if (u1 != a.size() || u2 != b.size() || first > last) throw std::invalid_argument("bad range");
    return {first, last};
  } catch (const std::exception&) {
    throw epp::ConfigError("--years: expected A:B with A <= B, got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian melding projections of HIV prevalence with the EPP model"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Run the EPP model for one parameter set");
  epp::EppParams sim_params;
  std::string sim_config, sim_out, sim_steps;
  sim_cmd->add_option("--r", sim_params.r, "Rate of infection")->required();
  sim_cmd->add_option("--f0", sim_params.f0, "Fraction initially at risk")->required();
  sim_cmd->add_option("--t0", sim_params.t0, "Start year of the epidemic")->required();
  sim_cmd->add_option("--phi", sim_params.phi, "Behavioural response")->required();
  sim_cmd->add_option("--config", sim_config, "Configuration file");
  sim_cmd->add_option("--out", sim_out, "Annual trajectory CSV (year,prevalence)")->required();
  sim_cmd->add_option("--steps", sim_steps, "Optional step-level CSV (time,x,z,y,prevalence)");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Sample the posterior by sampling-importance-resampling");
  std::string fit_data, fit_config, fit_out, fit_diag;
  FitOverrides fit_over;
  fit_cmd->add_option("--data", fit_data, "Clinic data CSV")->required();
  fit_cmd->add_option("--config", fit_config, "Configuration file");
  fit_cmd->add_option("--out", fit_out, "Posterior sample CSV")->required();
  fit_cmd->add_option("--diagnostics", fit_diag, "Diagnostics file (default: <out>.diag)");
  add_fit_overrides(fit_cmd, fit_over);

  // project
  auto* proj_cmd = app.add_subcommand("project", "Posterior quantiles of population prevalence");
  std::string proj_post, proj_years, proj_quant = "0.025,0.5,0.975", proj_out;
  proj_cmd->add_option("--posterior", proj_post, "Posterior sample CSV")->required();
  proj_cmd->add_option("--years", proj_years, "Year range A:B")->required();
  proj_cmd->add_option("--quantiles", proj_quant, "Comma-separated probabilities");
  proj_cmd->add_option("--out", proj_out, "Quantile table CSV")->required();

  // predict-clinic
  auto* pred_cmd = app.add_subcommand("predict-clinic", "Posterior predictive draws of one clinic's prevalence");
  std::string pred_post, pred_data, pred_clinic, pred_config, pred_out;
  int pred_year = 0;
  std::optional<int> pred_n;
  std::uint64_t pred_seed = 1;
  unsigned pred_threads = 0;
  pred_cmd->add_option("--posterior", pred_post, "Posterior sample CSV")->required();
  pred_cmd->add_option("--data", pred_data, "Clinic data CSV used for the fit")->required();
  pred_cmd->add_option("--clinic", pred_clinic, "Clinic id")->required();
  pred_cmd->add_option("--year", pred_year, "Target year")->required();
  pred_cmd->add_option("--n-tested", pred_n, "Assumed sample size (default: clinic's latest)");
  pred_cmd->add_option("--config", pred_config, "Configuration file (sigma prior)");
  pred_cmd->add_option("--seed", pred_seed, "Random seed");
  pred_cmd->add_option("--threads", pred_threads, "Worker threads");
  pred_cmd->add_option("--out", pred_out, "Predictive draws CSV")->required();

  // backtest
  auto* bt_cmd = app.add_subcommand("backtest", "Fit on truncated data and score held-out observations");
  std::string bt_data, bt_config, bt_out;
  int bt_truncate = 0;
  FitOverrides bt_over;
  bt_cmd->add_option("--data", bt_data, "Clinic data CSV")->required();
  bt_cmd->add_option("--truncate", bt_truncate, "Last year used for fitting")->required();
  bt_cmd->add_option("--config", bt_config, "Configuration file");
  bt_cmd->add_option("--out", bt_out, "Coverage CSV")->required();
  add_fit_overrides(bt_cmd, bt_over);

  // plot-data
  auto* plot_cmd = app.add_subcommand("plot-data", "Long-format plot data for a posterior sample");
  std::string plot_post, plot_data, plot_out;
  epp::io::PlotRequest plot_req;
  plot_cmd->add_option("--posterior", plot_post, "Posterior sample CSV")->required();
  plot_cmd->add_option("--data", plot_data, "Clinic data CSV")->required();
  plot_cmd->add_option("--out", plot_out, "Plot data CSV (series,year,value)")->required();
  plot_cmd->add_option("--max-trajectories", plot_req.max_trajectories, "Cap on emitted trajectories");
  plot_cmd->add_option("--bins", plot_req.histogram_bins, "Histogram bins for r, f0 and phi");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim_cmd) {
      const auto cfg = load_config(sim_config);
      const auto& m = cfg.melding;
      epp::Simulator sim(m.demography, m.survival, m.grid);
      if (!sim_steps.empty()) {
        const epp::StepSeries steps = sim.run_steps(sim_params);
        auto out = open_output(sim_steps);
        out << "time,x,z,y,prevalence\n";
        for (std::size_t k = 0; k < steps.states.size(); ++k) {
          const auto& s = steps.states[k];
          out << epp::io::format_g(m.grid.step_time(static_cast<int>(k)), 10) << ',' << epp::io::format_g(s.x, 10)
              << ',' << epp::io::format_g(s.z, 10) << ',' << epp::io::format_g(s.y, 10) << ','
              << epp::io::format_g(s.prevalence(), 10) << '\n';
        }
      }
      const epp::PrevalenceTrajectory traj = sim.run(sim_params);
      auto out = open_output(sim_out);
      epp::io::write_trajectory(traj, out);
    } else if (*fit_cmd) {
      auto cfg = load_config(fit_config);
      fit_over.apply(cfg.melding);
      const epp::Dataset data = epp::io::parse_dataset(fit_data);
      const epp::PosteriorSample sample = epp::run_melding(cfg.melding, data);
      {
        auto out = open_output(fit_out);
        epp::io::write_posterior(sample, out);
      }
      auto diag = open_output(fit_diag.empty() ? fit_out + ".diag" : fit_diag);
      epp::io::write_diagnostics(sample.diagnostics, diag);
      std::cout << "ess = " << epp::io::format_g(sample.diagnostics.ess, 6)
                << ", unique = " << sample.diagnostics.unique_count
                << ", max multiplicity = " << sample.diagnostics.max_multiplicity << '\n';
    } else if (*proj_cmd) {
      std::vector<std::string> labels;
      const std::vector<double> probs = parse_probs(proj_quant, labels);
      const auto [first, last] = parse_year_range(proj_years);
      const epp::PosteriorSample sample = epp::io::read_posterior(proj_post);
      std::vector<int> years;
      for (int y = first; y <= last; ++y) years.push_back(y);
      const epp::QuantileTable table = epp::population_quantiles(sample, years, probs);
      auto out = open_output(proj_out);
      epp::io::write_quantiles(table, labels, out);
    } else if (*pred_cmd) {
      const auto cfg = load_config(pred_config);
      const epp::PosteriorSample sample = epp::io::read_posterior(pred_post);
      const epp::Dataset data = epp::io::parse_dataset(pred_data);
      const epp::PredictiveRequest req{pred_clinic, pred_year, pred_n};
      const std::vector<double> draws =
          epp::predict_clinic(sample, data, req, cfg.melding.sigma_prior, pred_seed, pred_threads);
      auto out = open_output(pred_out);
      epp::io::write_predictive_draws(draws, out);
    } else if (*bt_cmd) {
      auto cfg = load_config(bt_config);
      bt_over.apply(cfg.melding);
      const epp::Dataset data = epp::io::parse_dataset(bt_data);
      const epp::BacktestResult result = epp::backtest(data, bt_truncate, cfg.melding, cfg.melding.seed);
      auto out = open_output(bt_out);
      epp::io::write_coverage(result.coverage, out);
      std::cout << "held-out points = " << result.coverage.points.size()
                << ", coverage = " << epp::io::format_g(result.coverage.coverage, 4) << '\n';
    } else if (*plot_cmd) {
      const epp::PosteriorSample sample = epp::io::read_posterior(plot_post);
      const epp::Dataset data = epp::io::parse_dataset(plot_data);
      auto out = open_output(plot_out);
      epp::io::write_plot_data(epp::io::emit_plot_data(sample, data, plot_req), out);
    }
  } catch (const epp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const epp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const epp::InferenceError& e) {
    std::cerr << "inference error: " << e.what() << '\n';
    return kInferenceError;
  } catch (const OutputError& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kOutputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::out_of_range& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}
