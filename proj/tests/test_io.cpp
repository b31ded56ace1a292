#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nv/io.hpp"
#include "nv/rng.hpp"

using namespace nv;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nvio_" + name)).string();
}

struct FileGuard {
  std::string path;
  ~FileGuard() { std::remove(path.c_str()); }
};

std::vector<TimeTagRecord> random_stream(std::uint64_t seed, std::size_t n_photons,
                                         std::size_t n_syncs, std::uint64_t span_ns) {
  Xoshiro256ss rng(seed);
  std::vector<TimeTagRecord> records;
  records.reserve(n_photons + n_syncs);
  for (std::size_t i = 0; i < n_syncs; ++i)
    records.push_back({i * (span_ns / n_syncs), Channel::sync});
  for (std::size_t i = 0; i < n_photons; ++i)
    records.push_back({static_cast<std::uint64_t>(rng.uniform() * span_ns), Channel::photon});
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.timestamp_ns != b.timestamp_ns) return a.timestamp_ns < b.timestamp_ns;
    return a.channel == Channel::sync && b.channel == Channel::photon;
  });
  return records;
}

// Reference binner: per photon, scan backwards for the latest sync.
HistogramData brute_force_bin(const std::vector<TimeTagRecord>& records,
                              const BinningConfig& config, std::uint64_t& discarded) {
  HistogramData out;
  out.dt = config.dt_ns();
  out.counts.setZero(config.n_bins);
  out.n_meas = 0;
  discarded = 0;
  for (const auto& rec : records)
    if (rec.channel == Channel::sync) ++out.n_meas;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].channel != Channel::photon) continue;
    bool found = false;
    for (std::size_t j = i + 1; j-- > 0;) {
      if (records[j].channel != Channel::sync) continue;
      const std::int64_t rel_ps =
          (static_cast<std::int64_t>(records[i].timestamp_ns - records[j].timestamp_ns) -
           config.sync_offset_ns) *
          1000;
      const std::int64_t window = static_cast<std::int64_t>(config.n_bins) * config.dt_ps;
      if (rel_ps >= 0 && rel_ps < window)
        ++out.counts[static_cast<Eigen::Index>(rel_ps / config.dt_ps)];
      else
        ++discarded;
      found = true;
      break;
    }
    if (!found) ++discarded;
  }
  return out;
}

}  // namespace

TEST_CASE("binning boundary convention") {
  BinningConfig config;
  config.dt_ps = 8330;
  config.n_bins = 4;

  SUBCASE("photon at the sync lands in bin 0") {
    const auto result = bin_time_tags(
        std::vector<TimeTagRecord>{{0, Channel::sync}, {0, Channel::photon}}, config);
    CHECK(result.histogram.counts[0] == 1);
    CHECK(result.histogram.n_meas == 1);
  }

  SUBCASE("photon exactly at dt goes to bin 1 (half-open bins)") {
    // 8.33 ns is not an integer ns, so probe the convention at 2 dt = 16.66 ns
    // using a 10 ns grid instead: dt = 10 ns, photon at t = 10 ns.
    BinningConfig c10;
    c10.dt_ps = 10000;
    c10.n_bins = 4;
    const auto result = bin_time_tags(
        std::vector<TimeTagRecord>{{0, Channel::sync}, {10, Channel::photon}}, c10);
    CHECK(result.histogram.counts[0] == 0);
    CHECK(result.histogram.counts[1] == 1);
  }

  SUBCASE("no sync is an error") {
    CHECK_THROWS_AS(
        bin_time_tags(std::vector<TimeTagRecord>{{5, Channel::photon}}, config), SchemaError);
  }

  SUBCASE("photons outside the window are counted as discarded") {
    const auto result = bin_time_tags(
        std::vector<TimeTagRecord>{{0, Channel::sync}, {1000000, Channel::photon}}, config);
    CHECK(result.histogram.counts.sum() == 0);
    CHECK(result.discarded == 1);
  }
}

TEST_CASE("streaming binner equals the brute-force oracle") {
  const auto records = random_stream(404, 20000, 50, 5000000);
  BinningConfig config;
  config.dt_ps = 8330;
  config.n_bins = 100;

  std::uint64_t expected_discarded = 0;
  const HistogramData expected = brute_force_bin(records, config, expected_discarded);
  const BinResult actual = bin_time_tags(records, config);

  CHECK((actual.histogram.counts - expected.counts).cwiseAbs().maxCoeff() == 0);
  CHECK(actual.histogram.n_meas == expected.n_meas);
  CHECK(actual.discarded == expected_discarded);

  SUBCASE("count conservation") {
    CHECK(actual.histogram.counts.sum() + static_cast<long long>(actual.discarded) == 20000);
  }
}

TEST_CASE("rebinning at 2 dt equals pairwise sums") {
  const auto records = random_stream(77, 5000, 20, 1000000);
  BinningConfig fine;
  fine.dt_ps = 5000;
  fine.n_bins = 40;
  BinningConfig coarse;
  coarse.dt_ps = 10000;
  coarse.n_bins = 20;

  const auto fine_hist = bin_time_tags(records, fine).histogram;
  const auto coarse_hist = bin_time_tags(records, coarse).histogram;
  for (int i = 0; i < 20; ++i)
    CHECK(coarse_hist.counts[i] == fine_hist.counts[2 * i] + fine_hist.counts[2 * i + 1]);
}

TEST_CASE("time-tag binary round trip") {
  const auto records = random_stream(11, 1000, 5, 100000);
  FileGuard file{temp_path("tags.bin")};
  write_time_tags(file.path, records);
  const auto back = read_time_tags(file.path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].timestamp_ns == records[i].timestamp_ns);
    CHECK(back[i].channel == records[i].channel);
  }

  SUBCASE("file and in-memory binning agree") {
    BinningConfig config;
    config.dt_ps = 8330;
    config.n_bins = 50;
    std::ifstream in(file.path, std::ios::binary);
    const auto from_file = bin_time_tags(in, config);
    const auto from_memory = bin_time_tags(records, config);
    CHECK((from_file.histogram.counts - from_memory.histogram.counts).cwiseAbs().maxCoeff() ==
          0);
  }
}

TEST_CASE("CSV round trips") {
  SUBCASE("calibration") {
    CalibrationPair cal;
    cal.dt = 8.33;
    cal.m0 = Eigen::Vector3d(1.25e-4, 7.5e-5, 5e-5);
    cal.m1 = Eigen::Vector3d(6e-5, 5.5e-5, 5e-5);
    FileGuard file{temp_path("cal.csv")};
    write_calibration_csv(file.path, cal);
    const CalibrationPair back = read_calibration_csv(file.path);
    CHECK(back.dt == doctest::Approx(cal.dt).epsilon(1e-12));
    CHECK((back.m0 - cal.m0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.m1 - cal.m1).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("histogram counts are bit-exact") {
    HistogramData data;
    data.dt = 8.33;
    data.n_meas = 1000;
    data.counts.resize(4);
    data.counts << 12, 0, 999999999999LL, 3;
    FileGuard file{temp_path("hist.csv")};
    write_histogram_csv(file.path, data);
    const HistogramData back = read_histogram_csv(file.path, 1000);
    CHECK((back.counts - data.counts).cwiseAbs().maxCoeff() == 0);
  }

  SUBCASE("trace") {
    FluorescenceTrace trace;
    trace.dt = 10.0;
    trace.bins = Eigen::Vector3d(0.1e-3, 0.2e-3, 0.05e-3);
    FileGuard file{temp_path("trace.csv")};
    write_trace_csv(file.path, trace);
    const FluorescenceTrace back = read_trace_csv(file.path);
    CHECK((back.bins - trace.bins).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("schema errors name the problem") {
  SUBCASE("wrong header") {
    FileGuard file{temp_path("bad_header.csv")};
    std::ofstream(file.path) << "time,stuff\n0,1\n";
    CHECK_THROWS_AS(read_trace_csv(file.path), SchemaError);
  }

  SUBCASE("bad field") {
    FileGuard file{temp_path("bad_field.csv")};
    std::ofstream(file.path) << "t_start_ns,mean_photons\n0,hello\n8.33,1e-4\n";
    CHECK_THROWS_WITH_AS(read_trace_csv(file.path), doctest::Contains(":2:"), SchemaError);
  }

  SUBCASE("column count mismatch") {
    FileGuard file{temp_path("bad_cols.csv")};
    std::ofstream(file.path) << "t_start_ns,m0,m1\n0,1e-4\n";
    CHECK_THROWS_AS(read_calibration_csv(file.path), SchemaError);
  }

  SUBCASE("truncated binary") {
    FileGuard file{temp_path("trunc.bin")};
    std::ofstream(file.path, std::ios::binary) << "\x05\x00\x00";
    CHECK_THROWS_AS(read_time_tags(file.path), SchemaError);
  }
}

TEST_CASE("trace JSON round trip") {
  FluorescenceTrace trace;
  trace.dt = 8.33;
  trace.bins = Eigen::Vector2d(1e-4, 2e-4);
  const FluorescenceTrace back = trace_from_json(trace_to_json(trace));
  CHECK(back.dt == trace.dt);
  CHECK((back.bins - trace.bins).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(trace_from_json("{\"dt\": 1.0}"), SchemaError);
  CHECK_THROWS_AS(trace_from_json("not json"), SchemaError);
}
