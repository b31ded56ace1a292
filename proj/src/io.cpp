#include "nv/io.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nv {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw SchemaError("cannot open file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw SchemaError("cannot open file for writing: " + path);
  return out;
}

double parse_double(const std::string& field, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double value = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw SchemaError(path + ":" + std::to_string(line) + ": bad numeric field '" + field + "'");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

// Reads a CSV with the given header, returning the numeric rows.
std::vector<std::vector<double>> read_csv(const std::string& path, const std::string& header,
                                          std::size_t n_cols) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw SchemaError(path + ":1: expected header '" + header + "', got '" + line + "'");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != n_cols)
      throw SchemaError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(n_cols) + " columns, got " + std::to_string(fields.size()));
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_double(f, path, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw SchemaError(path + ": no data rows");
  return rows;
}

double infer_dt(const std::vector<std::vector<double>>& rows, const std::string& path) {
  if (rows.size() < 2) throw SchemaError(path + ": need at least two rows to infer bin width");
  const double dt = rows[1][0] - rows[0][0];
  if (dt <= 0) throw SchemaError(path + ": t_start_ns must be increasing");
  return dt;
}

}  // namespace

void BinningConfig::validate() const {
  if (dt_ps <= 0) throw InvalidParameterError("BinningConfig: dt must be positive");
  if (n_bins < 1) throw InvalidParameterError("BinningConfig: n_bins must be >= 1");
}

namespace {

// Incremental binner; feed records in order, read out the histogram at the end.
class StreamingBinner {
 public:
  StreamingBinner(const BinningConfig& config) : config_(config) {
    config.validate();
    counts_.assign(static_cast<std::size_t>(config.n_bins), 0);
    window_ps_ = static_cast<std::int64_t>(config.n_bins) * config.dt_ps;
  }

  void feed(const TimeTagRecord& rec, std::uint64_t index) {
    if (rec.channel == Channel::sync) {
      have_sync_ = true;
      ++n_sync_;
      last_sync_ns_ = rec.timestamp_ns;
      return;
    }
    if (rec.channel != Channel::photon)
      throw SchemaError("malformed record at index " + std::to_string(index) +
                        ": unknown channel " + std::to_string(static_cast<int>(rec.channel)));
    if (!have_sync_) {
      ++discarded_;
      return;
    }
    const auto rel_ns = static_cast<std::int64_t>(rec.timestamp_ns - last_sync_ns_) -
                        config_.sync_offset_ns;
    const std::int64_t rel_ps = rel_ns * 1000;
    if (rel_ps < 0 || rel_ps >= window_ps_) {
      ++discarded_;
      return;
    }
    ++counts_[static_cast<std::size_t>(rel_ps / config_.dt_ps)];
  }

  BinResult finish() const {
    if (n_sync_ == 0) throw SchemaError("time-tag stream contains no sync marker");
    BinResult result;
    result.histogram.dt = config_.dt_ns();
    result.histogram.n_meas = static_cast<long long>(n_sync_);
    result.histogram.counts.resize(config_.n_bins);
    for (int i = 0; i < config_.n_bins; ++i)
      result.histogram.counts[i] = counts_[static_cast<std::size_t>(i)];
    result.discarded = discarded_;
    return result;
  }

 private:
  BinningConfig config_;
  std::vector<long long> counts_;
  std::int64_t window_ps_ = 0;
  bool have_sync_ = false;
  std::uint64_t n_sync_ = 0;
  std::uint64_t last_sync_ns_ = 0;
  std::uint64_t discarded_ = 0;
};

TimeTagRecord decode_record(const unsigned char* buf) {
  TimeTagRecord rec;
  std::uint64_t ts = 0;
  for (int b = 7; b >= 0; --b) ts = (ts << 8) | buf[b];
  rec.timestamp_ns = ts;
  rec.channel = static_cast<Channel>(buf[8]);
  return rec;
}

}  // namespace

BinResult bin_time_tags(std::istream& stream, const BinningConfig& config) {
  StreamingBinner binner(config);
  unsigned char header[8];
  stream.read(reinterpret_cast<char*>(header), 8);
  if (stream.gcount() != 8) throw SchemaError("time-tag stream: truncated header at offset 0");
  std::uint64_t count = 0;
  for (int b = 7; b >= 0; --b) count = (count << 8) | header[b];

  std::uint64_t prev_ts = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    unsigned char buf[9];
    stream.read(reinterpret_cast<char*>(buf), 9);
    if (stream.gcount() != 9)
      throw SchemaError("time-tag stream: truncated record at byte offset " +
                        std::to_string(8 + i * 9));
    const TimeTagRecord rec = decode_record(buf);
    if (static_cast<int>(rec.channel) > 1)
      throw SchemaError("time-tag stream: bad channel at byte offset " +
                        std::to_string(8 + i * 9 + 8));
    if (i > 0 && rec.timestamp_ns < prev_ts)
      throw SchemaError("time-tag stream: timestamps decrease at record " + std::to_string(i));
    prev_ts = rec.timestamp_ns;
    binner.feed(rec, i);
  }
  return binner.finish();
}

BinResult bin_time_tags(const std::vector<TimeTagRecord>& records, const BinningConfig& config) {
  StreamingBinner binner(config);
  std::uint64_t prev_ts = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0 && records[i].timestamp_ns < prev_ts)
      throw SchemaError("time-tag stream: timestamps decrease at record " + std::to_string(i));
    prev_ts = records[i].timestamp_ns;
    binner.feed(records[i], i);
  }
  return binner.finish();
}

void write_time_tags(const std::string& path, const std::vector<TimeTagRecord>& records) {
  auto out = open_output(path, std::ios::binary);
  const auto put_u64 = [&](std::uint64_t v) {
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
    out.write(reinterpret_cast<char*>(buf), 8);
  };
  put_u64(records.size());
  for (const auto& rec : records) {
    put_u64(rec.timestamp_ns);
    const char ch = static_cast<char>(rec.channel);
    out.write(&ch, 1);
  }
}

std::vector<TimeTagRecord> read_time_tags(const std::string& path) {
  auto in = open_input(path, std::ios::binary);
  unsigned char header[8];
  in.read(reinterpret_cast<char*>(header), 8);
  if (in.gcount() != 8) throw SchemaError(path + ": truncated header");
  std::uint64_t count = 0;
  for (int b = 7; b >= 0; --b) count = (count << 8) | header[b];
  std::vector<TimeTagRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    unsigned char buf[9];
    in.read(reinterpret_cast<char*>(buf), 9);
    if (in.gcount() != 9)
      throw SchemaError(path + ": truncated record at byte offset " + std::to_string(8 + i * 9));
    records.push_back(decode_record(buf));
  }
  return records;
}

void write_trace_csv(const std::string& path, const FluorescenceTrace& trace) {
  auto out = open_output(path);
  out << "t_start_ns,mean_photons\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < trace.bins.size(); ++i)
    out << static_cast<double>(i) * trace.dt << ',' << trace.bins[i] << '\n';
}

FluorescenceTrace read_trace_csv(const std::string& path) {
  const auto rows = read_csv(path, "t_start_ns,mean_photons", 2);
  FluorescenceTrace trace;
  trace.dt = infer_dt(rows, path);
  trace.bins.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) trace.bins[static_cast<Eigen::Index>(i)] = rows[i][1];
  return trace;
}

void write_histogram_csv(const std::string& path, const HistogramData& data) {
  auto out = open_output(path);
  out << "t_start_ns,counts\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < data.counts.size(); ++i)
    out << static_cast<double>(i) * data.dt << ',' << data.counts[i] << '\n';
}

HistogramData read_histogram_csv(const std::string& path, long long n_meas) {
  const auto rows = read_csv(path, "t_start_ns,counts", 2);
  HistogramData data;
  data.dt = infer_dt(rows, path);
  data.n_meas = n_meas;
  data.counts.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][1] < 0)
      throw SchemaError(path + ":" + std::to_string(i + 2) + ": negative count");
    data.counts[static_cast<Eigen::Index>(i)] = static_cast<long long>(rows[i][1]);
  }
  return data;
}

void write_calibration_csv(const std::string& path, const CalibrationPair& cal) {
  auto out = open_output(path);
  out << "t_start_ns,m0,m1\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < cal.m0.size(); ++i)
    out << static_cast<double>(i) * cal.dt << ',' << cal.m0[i] << ',' << cal.m1[i] << '\n';
}

CalibrationPair read_calibration_csv(const std::string& path, long long n_cal) {
  const auto rows = read_csv(path, "t_start_ns,m0,m1", 3);
  CalibrationPair cal;
  cal.dt = infer_dt(rows, path);
  cal.n_cal = n_cal;
  cal.m0.resize(static_cast<Eigen::Index>(rows.size()));
  cal.m1.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cal.m0[static_cast<Eigen::Index>(i)] = rows[i][1];
    cal.m1[static_cast<Eigen::Index>(i)] = rows[i][2];
  }
  cal.validate();
  return cal;
}

std::string trace_to_json(const FluorescenceTrace& trace, const RateModel* model) {
  json j;
  j["dt"] = trace.dt;
  j["bins"] = std::vector<double>(trace.bins.begin(), trace.bins.end());
  if (model) {
    j["model"] = {{"excitation_mhz", model->excitation},
                  {"radiative_mhz", model->radiative},
                  {"shelving_ms0_mhz", model->shelving_ms0},
                  {"shelving_ms1_mhz", model->shelving_ms1},
                  {"deshelving_ms0_mhz", model->deshelving_ms0},
                  {"deshelving_ms1_mhz", model->deshelving_ms1},
                  {"detection", model->detection}};
  }
  return j.dump(2);
}

FluorescenceTrace trace_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("trace JSON: ") + e.what());
  }
  if (!j.contains("dt") || !j.contains("bins"))
    throw SchemaError("trace JSON: missing field 'dt' or 'bins'");
  FluorescenceTrace trace;
  trace.dt = j["dt"].get<double>();
  const auto bins = j["bins"].get<std::vector<double>>();
  trace.bins = Eigen::Map<const Eigen::VectorXd>(bins.data(),
                                                 static_cast<Eigen::Index>(bins.size()));
  return trace;
}

std::string report_to_json(const EstimatorReport& report) {
  json j;
  j["method"] = method_name(report.method);
  j["s_z"] = report.s_z;
  j["predicted_std"] = report.predicted_std;
  j["flip_probability"] = report.flip_probability();
  if (report.method == Method::photon_counting) j["window_bins"] = report.window_bins;
  return j.dump(2);
}

FitProblem load_fit_manifest(const std::string& path) {
  auto in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  const auto base = std::filesystem::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  FitProblem problem;
  try {
    for (const auto& d : j.at("datasets")) {
      FitDataset ds;
      ds.label = d.at("label").get<std::string>();
      ds.intensity = d.at("intensity").get<double>();
      ds.n_meas = d.at("n_meas").get<double>();
      ds.ms0 = read_trace_csv(resolve(d.at("ms0_trace").get<std::string>()));
      ds.ms1 = read_trace_csv(resolve(d.at("ms1_trace").get<std::string>()));
      problem.datasets.push_back(std::move(ds));
    }
    const auto& c = j.at("constraints");
    problem.lifetime_ms0 = {c.at("t0_ns").get<double>(), c.at("t0_sigma_ns").get<double>()};
    problem.lifetime_ms1 = {c.at("t1_ns").get<double>(), c.at("t1_sigma_ns").get<double>()};
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (j.contains("weights")) {
    const auto w = j["weights"].get<std::string>();
    if (w == "poisson")
      problem.poisson_weights = true;
    else if (w == "uniform")
      problem.poisson_weights = false;
    else
      throw SchemaError(path + ": field 'weights' must be 'poisson' or 'uniform'");
  }
  problem.validate();
  return problem;
}

std::string fit_result_to_json(const FitResult& result, const FitProblem& problem) {
  json j;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["reduced_chi_square"] = result.reduced_chi_square;
  j["message"] = result.message;
  j["weights"] = problem.poisson_weights ? "poisson" : "uniform";
  const auto entry = [](double value, double sigma) {
    return json{{"value", value}, {"std_error", sigma}};
  };
  const auto& p = result.params;
  const auto& e = result.standard_errors;
  j["parameters"] = {{"radiative_mhz", entry(p.radiative, e.radiative)},
                     {"shelving_ms0_mhz", entry(p.shelving_ms0, e.shelving_ms0)},
                     {"shelving_ms1_mhz", entry(p.shelving_ms1, e.shelving_ms1)},
                     {"deshelving_ms0_mhz", entry(p.deshelving_ms0, e.deshelving_ms0)},
                     {"deshelving_ms1_mhz", entry(p.deshelving_ms1, e.deshelving_ms1)},
                     {"detection", entry(p.detection, e.detection)}};
  j["lifetimes_ns"] = {
      {"t0", 1e3 / (p.radiative + p.shelving_ms0)},
      {"t1", 1e3 / (p.radiative + p.shelving_ms1)},
      {"t_singlet", 1e3 / (p.deshelving_ms0 + p.deshelving_ms1)},
  };
  json rates = json::array();
  for (std::size_t i = 0; i < p.excitation.size(); ++i)
    rates.push_back({{"label", problem.datasets[i].label},
                     {"intensity", problem.datasets[i].intensity},
                     {"excitation_mhz", entry(p.excitation[i], e.excitation[i])}});
  j["datasets"] = rates;
  return j.dump(2);
}

std::string fit_result_table(const FitResult& result, const FitProblem& problem) {
  std::ostringstream out;
  const auto& p = result.params;
  const auto& e = result.standard_errors;
  out.precision(4);
  out << "parameter        value      std_error\n";
  const auto row = [&](const char* name, double v, double s) {
    out << name << v << "  " << s << '\n';
  };
  row("gamma (MHz)      ", p.radiative, e.radiative);
  row("S0 (MHz)         ", p.shelving_ms0, e.shelving_ms0);
  row("S1 (MHz)         ", p.shelving_ms1, e.shelving_ms1);
  row("D0 (MHz)         ", p.deshelving_ms0, e.deshelving_ms0);
  row("D1 (MHz)         ", p.deshelving_ms1, e.deshelving_ms1);
  row("detection        ", p.detection, e.detection);
  out << "t0 (ns)          " << 1e3 / (p.radiative + p.shelving_ms0) << '\n';
  out << "t1 (ns)          " << 1e3 / (p.radiative + p.shelving_ms1) << '\n';
  out << "t_singlet (ns)   " << 1e3 / (p.deshelving_ms0 + p.deshelving_ms1) << '\n';
  for (std::size_t i = 0; i < p.excitation.size(); ++i)
    out << "R[" << problem.datasets[i].label << "] (MHz)  " << p.excitation[i] << "  "
        << e.excitation[i] << '\n';
  out << "reduced chi^2    " << result.reduced_chi_square << '\n';
  return out.str();
}

}  // namespace nv
