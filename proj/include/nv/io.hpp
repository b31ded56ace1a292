#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nv/estimators.hpp"
#include "nv/fitting.hpp"
#include "nv/photophysics.hpp"

namespace nv {

enum class Channel : std::uint8_t { photon = 0, sync = 1 };

struct TimeTagRecord {
  std::uint64_t timestamp_ns = 0;
  Channel channel = Channel::photon;
};

/// Binning geometry. The bin width is held in integer picoseconds so the
/// default 8.33 ns FPGA resolution (8330 ps) bins by exact arithmetic;
/// intervals are half-open [i*dt, (i+1)*dt).
struct BinningConfig {
  std::int64_t dt_ps = 8330;
  int n_bins = 1;
  std::int64_t sync_offset_ns = 0;

  void validate() const;
  double dt_ns() const { return static_cast<double>(dt_ps) / 1000.0; }
};

struct BinResult {
  HistogramData histogram;
  std::uint64_t discarded = 0;  // photons outside the window or before any sync
};

/// Single-pass streaming binner over a time-tag stream; n_meas is the number
/// of sync markers seen. Requires at least one sync marker.
BinResult bin_time_tags(std::istream& stream, const BinningConfig& config);
BinResult bin_time_tags(const std::vector<TimeTagRecord>& records, const BinningConfig& config);

// --- time-tag binary format -------------------------------------------------
// Little-endian: u64 record count, then per record u64 timestamp_ns, u8
// channel (0 = photon, 1 = sync). Timestamps must be non-decreasing.

void write_time_tags(const std::string& path, const std::vector<TimeTagRecord>& records);
std::vector<TimeTagRecord> read_time_tags(const std::string& path);

// --- CSV schemas ------------------------------------------------------------
// trace:        t_start_ns,mean_photons
// histogram:    t_start_ns,counts
// calibration:  t_start_ns,m0,m1

void write_trace_csv(const std::string& path, const FluorescenceTrace& trace);
FluorescenceTrace read_trace_csv(const std::string& path);

void write_histogram_csv(const std::string& path, const HistogramData& data);
HistogramData read_histogram_csv(const std::string& path, long long n_meas);

void write_calibration_csv(const std::string& path, const CalibrationPair& cal);
CalibrationPair read_calibration_csv(const std::string& path, long long n_cal = 1);

// --- JSON -------------------------------------------------------------------

std::string trace_to_json(const FluorescenceTrace& trace, const RateModel* model = nullptr);
FluorescenceTrace trace_from_json(const std::string& text);

std::string report_to_json(const EstimatorReport& report);

/// Fit manifest: {"datasets": [{"label", "intensity", "n_meas",
/// "ms0_trace", "ms1_trace"}], "constraints": {"t0_ns", "t0_sigma_ns",
/// "t1_ns", "t1_sigma_ns"}, "weights": "poisson"|"uniform"}.
/// Trace paths are resolved relative to the manifest location.
FitProblem load_fit_manifest(const std::string& path);

std::string fit_result_to_json(const FitResult& result, const FitProblem& problem);
std::string fit_result_table(const FitResult& result, const FitProblem& problem);

}  // namespace nv
