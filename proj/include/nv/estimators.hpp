#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "nv/errors.hpp"

namespace nv {

/// Per-bin mean photon traces for the two calibration preparations
/// ("m_s = 0": optically pumped; "m_s = 1": pumped plus a pi pulse).
struct CalibrationPair {
  double dt = 0.0;       // bin width, ns
  Eigen::VectorXd m0;    // mean photons per bin per measurement, prepared m_s = 0
  Eigen::VectorXd m1;    // same for m_s = 1
  long long n_cal = 1;   // repetitions the calibration was averaged over

  void validate() const;
  Eigen::Index size() const { return m0.size(); }
};

/// Total photon counts per bin accumulated over n_meas repetitions.
struct HistogramData {
  double dt = 0.0;
  Eigen::Matrix<long long, Eigen::Dynamic, 1> counts;
  long long n_meas = 0;
};

/// Per-bin likelihood weights: the expected count in bin i is a_i + b_i * S_z.
struct BinWeights {
  Eigen::VectorXd a;  // (N/2)(m0_i + m1_i)
  Eigen::VectorXd b;  // (N/2)(m0_i - m1_i)
};

enum class Method { exact_mle, approx_mle, photon_counting };

std::string method_name(Method m);

struct EstimatorReport {
  double s_z = 0.0;
  Method method = Method::approx_mle;
  double predicted_std = 0.0;
  int window_bins = 0;  // photon counting only, 0 otherwise
  double flip_probability() const { return (1.0 - s_z) / 2.0; }
};

BinWeights weights(const CalibrationPair& cal, long long n_meas);

/// Numeric maximum-likelihood estimate: root of the Gaussian log-likelihood
/// score in S_z, found by bracketing and bisection to |dS_z| < 1e-10.
EstimatorReport estimate_exact_mle(const HistogramData& data, const CalibrationPair& cal);

/// Closed-form weighted estimate giving bin i weight b_i / a_i.
EstimatorReport estimate_approx_mle(const HistogramData& data, const CalibrationPair& cal);

/// Classic fixed-window photon counting estimate.
EstimatorReport estimate_photon_counting(const HistogramData& data, const CalibrationPair& cal,
                                         int window_bins);

/// Predicted variance of the approximate MLE at the given S_z.
double predicted_variance_approx(const CalibrationPair& cal, long long n_meas, double s_z);

/// SNR of the approximate MLE: full signal swing over the S_z-averaged std.
double snr_approx(const CalibrationPair& cal, long long n_meas);

/// SNR of photon counting restricted to the first window_bins bins.
double snr_photon_counting(const CalibrationPair& cal, long long n_meas, int window_bins);

/// Window (bin count) maximizing the photon-counting SNR; exhaustive scan,
/// ties broken toward the smaller window.
int optimal_window(const CalibrationPair& cal, long long n_meas);

}  // namespace nv
