#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nv/io.hpp"

namespace {

std::string g_binary;
std::filesystem::path g_dir;

int run_cli(const std::string& args) {
  const std::string cmd = g_binary + " " + args + " > " + (g_dir / "stdout.txt").string() +
                          " 2> " + (g_dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& name) {
  std::ifstream in(g_dir / name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path_of(const std::string& name) { return (g_dir / name).string(); }

}  // namespace

TEST_CASE("simulate produces deterministic trace files") {
  REQUIRE(run_cli("simulate --params NV1 --intensity 2 --spin ms0 --bins 40 --output " +
                  path_of("a.csv")) == 0);
  REQUIRE(run_cli("simulate --params NV1 --intensity 2 --spin ms0 --bins 40 --output " +
                  path_of("b.csv")) == 0);
  CHECK(slurp("stdout.txt").find("config:") != std::string::npos);

  std::ifstream a(g_dir / "a.csv"), b(g_dir / "b.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("t_start_ns,mean_photons", 0) == 0);
}

TEST_CASE("simulate shows early-bin contrast between spin preparations") {
  REQUIRE(run_cli("simulate --params NV1 --intensity 2 --spin ms0 --bins 20 --output " +
                  path_of("ms0.csv")) == 0);
  REQUIRE(run_cli("simulate --params NV1 --intensity 2 --spin ms1 --bins 20 --output " +
                  path_of("ms1.csv")) == 0);
  const auto t0 = nv::read_trace_csv(path_of("ms0.csv"));
  const auto t1 = nv::read_trace_csv(path_of("ms1.csv"));
  CHECK(t0.bins[0] > t1.bins[0]);
}

TEST_CASE("simulate rejects zero intensity") {
  CHECK(run_cli("simulate --params NV1 --intensity 0 --output " + path_of("x.csv")) != 0);
  CHECK(slurp("stderr.txt").rfind("error:", 0) == 0);
}

TEST_CASE("estimate --method all on p = 0.5 synthetic data") {
  REQUIRE(run_cli("simulate --params NV1 --intensity 2 --spin both --bins 120 --output " +
                  path_of("cal.csv")) == 0);

  // Histogram at the mixture midpoint: counts = round(N (m0 + m1) / 2).
  const auto cal = nv::read_calibration_csv(path_of("cal.csv"));
  const long long n_meas = 1000000;
  nv::HistogramData data;
  data.dt = cal.dt;
  data.n_meas = n_meas;
  data.counts.resize(cal.size());
  for (Eigen::Index i = 0; i < cal.size(); ++i)
    data.counts[i] = std::llround(0.5 * n_meas * (cal.m0[i] + cal.m1[i]));
  nv::write_histogram_csv(path_of("hist.csv"), data);

  REQUIRE(run_cli("estimate --data " + path_of("hist.csv") + " --cal " + path_of("cal.csv") +
                  " --n-meas 1000000 --method all --window auto --output " +
                  path_of("est.csv")) == 0);
  const std::string out = slurp("stdout.txt");
  CHECK(out.find("\"window_mode\":\"auto\"") != std::string::npos);

  std::ifstream est(g_dir / "est.csv");
  std::string line;
  std::getline(est, line);  // header
  int rows = 0;
  while (std::getline(est, line)) {
    ++rows;
    const auto comma = line.find(',');
    const double s_z = std::stod(line.substr(comma + 1));
    CHECK(std::abs(s_z) < 0.05);  // near zero for the midpoint mixture
  }
  CHECK(rows == 3);
}

TEST_CASE("estimate with a missing calibration file fails cleanly") {
  CHECK(run_cli("estimate --data nope.csv --cal missing.csv --n-meas 10") != 0);
  CHECK(slurp("stderr.txt").rfind("error:", 0) == 0);
}

TEST_CASE("snr-sweep emits a saturating non-decreasing SNR column") {
  REQUIRE(run_cli("snr-sweep --params NV1 --intensities 0.5,1,2,4,8 --bins 120 --output " +
                  path_of("snr.csv")) == 0);
  std::ifstream in(g_dir / "snr.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "intensity,snr_approx,snr_counting,window_bins,percent_gap");
  double prev = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    std::getline(ss, field, ',');
    const double snr = std::stod(field);
    CHECK(snr >= prev);
    prev = snr;
    ++rows;
  }
  CHECK(rows == 5);
}

TEST_CASE("rabi emits the three-method schema") {
  REQUIRE(run_cli("rabi --params NV1 --durations 0,91.7 --n-meas 10000 --reps 16 --bins 60 "
                  "--seed 5 --output " +
                  path_of("rabi.csv")) == 0);
  std::ifstream in(g_dir / "rabi.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "duration_ns,p_flip,method,mean_s_z,empirical_std,predicted_std");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 3);
}

TEST_CASE("unknown preset is an error") {
  CHECK(run_cli("simulate --params NV9 --intensity 1") != 0);
  CHECK(slurp("stderr.txt").rfind("error:", 0) == 0);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <nvfluor binary>\n");
    return 2;
  }
  g_binary = argv[1];
  g_dir = std::filesystem::temp_directory_path() / "nvfluor_cli_test";
  std::filesystem::create_directories(g_dir);
  doctest::Context context;
  context.applyCommandLine(1, argv);
  const int result = context.run();
  std::filesystem::remove_all(g_dir);
  return result;
}
