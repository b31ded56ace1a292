#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nv/estimators.hpp"
#include "nv/photophysics.hpp"
#include "nv/rng.hpp"

namespace nv {

/// Specification of a synthetic spin mixture to sample histograms for.
struct MixtureSpec {
  double p_flip = 0.0;       // spin-flip probability; S_z = 1 - 2 p_flip
  long long n_meas = 1;      // repetitions per histogram
  std::uint64_t seed = 0;
  double background = 0.0;   // mean background photons per bin per measurement

  void validate() const;
};

/// Expected total counts per bin for the mixture (Poisson means).
Eigen::VectorXd expected_bins(const CalibrationPair& cal, const MixtureSpec& spec);

/// Draws each bin independently Poisson(mu_i); bit-exact for a given seed.
HistogramData sample_histogram(const CalibrationPair& cal, const MixtureSpec& spec);

struct MethodStats {
  double mean_s_z = 0.0;
  double empirical_std = 0.0;
  double predicted_std = 0.0;
};

struct MonteCarloPoint {
  double sweep_value = 0.0;  // microwave duration (ns) or intensity (I_sat)
  double p_flip = 0.0;
  long long repetitions = 0;
  MethodStats exact, approx, counting;
  int window_bins = 0;
};

/// Rabi-drive Monte Carlo: for each microwave duration the flip probability
/// is sin^2(pi t / (2 t_pi)); each sweep point runs `repetitions` independent
/// experiments of n_meas measurements and reports all three estimators.
/// Per-repetition RNG streams are pre-split, so results do not depend on
/// execution order or thread count.
std::vector<MonteCarloPoint> rabi_sweep(const CalibrationPair& cal, double t_pi_ns,
                                        const std::vector<double>& durations_ns,
                                        long long n_meas, long long repetitions,
                                        std::uint64_t seed, int n_threads = 1);

struct SnrSweepPoint {
  double intensity = 0.0;    // units of I_sat
  double snr_approx = 0.0;   // per-run SNR (N = 1)
  double snr_counting = 0.0; // at the optimal window
  int window_bins = 0;
  double percent_gap = 0.0;  // 100 * (snr_approx / snr_counting - 1)
};

/// Simulated calibration at a given laser intensity (noiseless model traces).
CalibrationPair simulated_calibration(const RateModel& model, double intensity, int n_bins,
                                      double dt_ns);

/// SNR of both estimators versus laser intensity on model-simulated
/// calibrations, at N = 1.
std::vector<SnrSweepPoint> snr_intensity_sweep(const RateModel& model,
                                               const std::vector<double>& intensities,
                                               int trace_bins, double dt_ns);

}  // namespace nv
