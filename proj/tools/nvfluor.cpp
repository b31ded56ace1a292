#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nv/io.hpp"
#include "nv/presets.hpp"
#include "nv/synth.hpp"

using nlohmann::json;

namespace {

nv::RateModel load_model(const std::string& params) {
  if (nv::is_preset(params)) return nv::preset(params);
  std::ifstream in(params);
  if (!in) throw nv::SchemaError("cannot open model file: " + params);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw nv::SchemaError(params + ": " + e.what());
  }
  nv::RateModel m;
  try {
    m.radiative = j.at("radiative_mhz").get<double>();
    m.shelving_ms0 = j.at("shelving_ms0_mhz").get<double>();
    m.shelving_ms1 = j.at("shelving_ms1_mhz").get<double>();
    m.deshelving_ms0 = j.at("deshelving_ms0_mhz").get<double>();
    m.deshelving_ms1 = j.at("deshelving_ms1_mhz").get<double>();
    m.detection = j.value("detection", 1.0);
    m.excitation = j.value("excitation_mhz", 0.0);
  } catch (const json::exception& e) {
    throw nv::SchemaError(params + ": " + e.what());
  }
  m.validate();
  return m;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (field.empty()) continue;
    values.push_back(std::stod(field));
  }
  if (values.empty()) throw nv::InvalidParameterError("empty numeric list: " + text);
  return values;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw nv::SchemaError("cannot open file for writing: " + path);
  out << text;
}

// Every run echoes its fully resolved configuration so outputs are
// reproducible from the log alone.
void echo_config(const json& config) { std::cout << "config: " << config.dump() << "\n"; }

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "csv";
  int threads = 1;
};

int run(int argc, char** argv) {
  CLI::App app{"5-level NV fluorescence readout: simulation, estimation, and fitting"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "RNG seed");
  app.add_option("--output,-o", global.output, "output path ('-' for stdout)");
  app.add_option("--format", global.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", global.threads, "worker thread cap")->check(CLI::PositiveNumber);

  // simulate ------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "simulate a fluorescence trace");
  std::string sim_params = "NV1", sim_spin = "ms0";
  double sim_intensity = 2.0, sim_dt = 8.33, sim_solver_dt = 0.1;
  int sim_bins = 240;
  simulate->add_option("--params", sim_params, "preset name (NV1/NV2/NV3) or model JSON file");
  simulate->add_option("--intensity", sim_intensity, "laser intensity in units of I_sat");
  simulate->add_option("--spin", sim_spin, "prepared state")
      ->check(CLI::IsMember({"ms0", "ms1", "pumped", "both"}));
  simulate->add_option("--bins", sim_bins, "trace length in bins")->check(CLI::PositiveNumber);
  simulate->add_option("--dt", sim_dt, "bin width, ns")->check(CLI::PositiveNumber);
  simulate->add_option("--solver-dt", sim_solver_dt, "integrator step, ns");

  // estimate ------------------------------------------------------------
  auto* estimate = app.add_subcommand("estimate", "estimate S_z from a histogram");
  std::string est_data, est_cal, est_method = "all", est_window = "auto";
  long long est_n_meas = 0;
  estimate->add_option("--data", est_data, "histogram CSV")->required();
  estimate->add_option("--cal", est_cal, "calibration CSV")->required();
  estimate->add_option("--n-meas", est_n_meas, "measurement repetitions behind the histogram")
      ->required();
  estimate->add_option("--method", est_method, "exact|approx|counting|all")
      ->check(CLI::IsMember({"exact", "approx", "counting", "all"}));
  estimate->add_option("--window", est_window, "photon counting window in bins, or 'auto'");

  // rabi ----------------------------------------------------------------
  auto* rabi = app.add_subcommand("rabi", "Monte Carlo Rabi sweep over three estimators");
  std::string rabi_params = "NV1", rabi_durations;
  double rabi_intensity = 2.0, rabi_t_pi = 91.7, rabi_dt = 8.33;
  int rabi_bins = 240;
  long long rabi_n_meas = 100000, rabi_reps = 1000;
  rabi->add_option("--params", rabi_params, "preset or model JSON file");
  rabi->add_option("--intensity", rabi_intensity, "laser intensity in units of I_sat");
  rabi->add_option("--t-pi", rabi_t_pi, "pi-pulse duration, ns")->check(CLI::PositiveNumber);
  rabi->add_option("--durations", rabi_durations,
                   "comma-separated microwave durations, ns (default: one period)");
  rabi->add_option("--n-meas", rabi_n_meas, "measurements per experiment");
  rabi->add_option("--reps", rabi_reps, "experiment repetitions per duration");
  rabi->add_option("--bins", rabi_bins, "calibration trace length");
  rabi->add_option("--dt", rabi_dt, "bin width, ns");

  // snr-sweep -----------------------------------------------------------
  auto* snr = app.add_subcommand("snr-sweep", "SNR of both estimators vs laser intensity");
  std::string snr_params = "NV1", snr_intensities = "0.1,0.2,0.5,1,1.5,2,3,5,7,10";
  double snr_dt = 8.33;
  int snr_bins = 240;
  snr->add_option("--params", snr_params, "preset or model JSON file");
  snr->add_option("--intensities", snr_intensities, "comma-separated intensities, I_sat units");
  snr->add_option("--bins", snr_bins, "trace length in bins");
  snr->add_option("--dt", snr_dt, "bin width, ns");

  // fit -----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "simultaneous multi-intensity model fit");
  std::string fit_manifest;
  fit_cmd->add_option("--manifest", fit_manifest, "fit manifest JSON")->required();

  // bin -----------------------------------------------------------------
  auto* bin_cmd = app.add_subcommand("bin", "bin a time-tag stream into a histogram");
  std::string bin_tags;
  std::int64_t bin_dt_ps = 8330, bin_offset = 0;
  int bin_bins = 240;
  bin_cmd->add_option("--tags", bin_tags, "binary time-tag file")->required();
  bin_cmd->add_option("--dt-ps", bin_dt_ps, "bin width, ps");
  bin_cmd->add_option("--bins", bin_bins, "number of bins");
  bin_cmd->add_option("--sync-offset", bin_offset, "offset from sync to bin 0, ns");

  CLI11_PARSE(app, argc, argv);

  json config{{"seed", global.seed}, {"output", global.output},
              {"format", global.format}, {"threads", global.threads}};

  if (*simulate) {
    if (sim_intensity <= 0)
      throw nv::InvalidParameterError("simulate: intensity must be positive (no excitation)");
    const nv::RateModel base = load_model(sim_params);
    config["subcommand"] = "simulate";
    config["params"] = sim_params;
    config["intensity"] = sim_intensity;
    config["spin"] = sim_spin;
    config["bins"] = sim_bins;
    config["dt"] = sim_dt;
    config["solver_dt"] = sim_solver_dt;
    echo_config(config);

    if (sim_spin == "both") {
      const nv::CalibrationPair cal =
          nv::simulated_calibration(base, sim_intensity, sim_bins, sim_dt);
      if (global.output.empty())
        throw nv::InvalidParameterError("simulate --spin both: --output required");
      nv::write_calibration_csv(global.output, cal);
      return 0;
    }
    const nv::RateModel model =
        base.with_excitation(nv::intensity_to_rate(sim_intensity, base));
    const nv::SpinPrep prep = sim_spin == "ms0"   ? nv::SpinPrep::ms0
                              : sim_spin == "ms1" ? nv::SpinPrep::ms1
                                                  : nv::SpinPrep::pumped;
    const auto trace = nv::fluorescence_trace(model, prep, sim_bins, sim_dt, sim_solver_dt);
    if (global.format == "json") {
      write_text(global.output, nv::trace_to_json(trace, &model));
    } else if (global.output.empty() || global.output == "-") {
      std::ostringstream tmp;
      for (Eigen::Index i = 0; i < trace.bins.size(); ++i)
        tmp << i * trace.dt << ',' << trace.bins[i] << '\n';
      std::cout << "t_start_ns,mean_photons\n" << tmp.str();
    } else {
      nv::write_trace_csv(global.output, trace);
    }
    return 0;
  }

  if (*estimate) {
    const nv::CalibrationPair cal = nv::read_calibration_csv(est_cal);
    const nv::HistogramData data = nv::read_histogram_csv(est_data, est_n_meas);
    int window = 0;
    if (est_window == "auto")
      window = nv::optimal_window(cal, data.n_meas);
    else
      window = std::stoi(est_window);
    config["subcommand"] = "estimate";
    config["data"] = est_data;
    config["cal"] = est_cal;
    config["n_meas"] = est_n_meas;
    config["method"] = est_method;
    config["window"] = window;
    config["window_mode"] = est_window == "auto" ? "auto" : "fixed";
    echo_config(config);

    std::vector<nv::EstimatorReport> reports;
    if (est_method == "exact" || est_method == "all")
      reports.push_back(nv::estimate_exact_mle(data, cal));
    if (est_method == "approx" || est_method == "all")
      reports.push_back(nv::estimate_approx_mle(data, cal));
    if (est_method == "counting" || est_method == "all")
      reports.push_back(nv::estimate_photon_counting(data, cal, window));

    if (global.format == "json") {
      json out = json::array();
      for (const auto& rep : reports) out.push_back(json::parse(nv::report_to_json(rep)));
      write_text(global.output, json{{"config", config}, {"reports", out}}.dump(2) + "\n");
    } else {
      std::ostringstream out;
      out << "method,s_z,predicted_std,flip_probability,window_bins\n";
      out.precision(12);
      for (const auto& rep : reports)
        out << nv::method_name(rep.method) << ',' << rep.s_z << ',' << rep.predicted_std << ','
            << rep.flip_probability() << ',' << rep.window_bins << '\n';
      write_text(global.output, out.str());
    }
    return 0;
  }

  if (*rabi) {
    const nv::RateModel base = load_model(rabi_params);
    std::vector<double> durations;
    if (rabi_durations.empty())
      for (int i = 0; i <= 12; ++i) durations.push_back(2.0 * rabi_t_pi * i / 12.0);
    else
      durations = parse_list(rabi_durations);
    config["subcommand"] = "rabi";
    config["params"] = rabi_params;
    config["intensity"] = rabi_intensity;
    config["t_pi"] = rabi_t_pi;
    config["durations"] = durations;
    config["n_meas"] = rabi_n_meas;
    config["reps"] = rabi_reps;
    config["bins"] = rabi_bins;
    config["dt"] = rabi_dt;
    echo_config(config);

    const nv::CalibrationPair cal =
        nv::simulated_calibration(base, rabi_intensity, rabi_bins, rabi_dt);
    const auto points = nv::rabi_sweep(cal, rabi_t_pi, durations, rabi_n_meas, rabi_reps,
                                       global.seed, global.threads);
    std::ostringstream out;
    out << "duration_ns,p_flip,method,mean_s_z,empirical_std,predicted_std\n";
    out.precision(12);
    for (const auto& pt : points) {
      const auto row = [&](const char* name, const nv::MethodStats& s) {
        out << pt.sweep_value << ',' << pt.p_flip << ',' << name << ',' << s.mean_s_z << ','
            << s.empirical_std << ',' << s.predicted_std << '\n';
      };
      row("exact_mle", pt.exact);
      row("approx_mle", pt.approx);
      row("photon_counting", pt.counting);
    }
    write_text(global.output, out.str());
    return 0;
  }

  if (*snr) {
    const nv::RateModel base = load_model(snr_params);
    const auto intensities = parse_list(snr_intensities);
    config["subcommand"] = "snr-sweep";
    config["params"] = snr_params;
    config["intensities"] = intensities;
    config["bins"] = snr_bins;
    config["dt"] = snr_dt;
    echo_config(config);

    const auto points = nv::snr_intensity_sweep(base, intensities, snr_bins, snr_dt);
    std::ostringstream out;
    out << "intensity,snr_approx,snr_counting,window_bins,percent_gap\n";
    out.precision(12);
    for (const auto& pt : points)
      out << pt.intensity << ',' << pt.snr_approx << ',' << pt.snr_counting << ','
          << pt.window_bins << ',' << pt.percent_gap << '\n';
    write_text(global.output, out.str());
    return 0;
  }

  if (*fit_cmd) {
    const nv::FitProblem problem = nv::load_fit_manifest(fit_manifest);
    config["subcommand"] = "fit";
    config["manifest"] = fit_manifest;
    echo_config(config);

    const nv::FitResult result = nv::fit(problem, nv::default_guess(problem));
    std::cout << nv::fit_result_table(result, problem);
    if (!global.output.empty())
      write_text(global.output, nv::fit_result_to_json(result, problem) + "\n");
    if (!result.converged) {
      std::cerr << "error: fit did not converge: " << result.message << "\n";
      return 1;
    }
    return 0;
  }

  if (*bin_cmd) {
    config["subcommand"] = "bin";
    config["tags"] = bin_tags;
    config["dt_ps"] = bin_dt_ps;
    config["bins"] = bin_bins;
    config["sync_offset"] = bin_offset;
    echo_config(config);

    std::ifstream in(bin_tags, std::ios::binary);
    if (!in) throw nv::SchemaError("cannot open file: " + bin_tags);
    nv::BinningConfig bc;
    bc.dt_ps = bin_dt_ps;
    bc.n_bins = bin_bins;
    bc.sync_offset_ns = bin_offset;
    const nv::BinResult result = nv::bin_time_tags(in, bc);
    std::cout << "n_meas: " << result.histogram.n_meas << "\n";
    std::cout << "discarded: " << result.discarded << "\n";
    if (!global.output.empty()) nv::write_histogram_csv(global.output, result.histogram);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
