#include "nv/estimators.hpp"

#include <cmath>
#include <limits>

namespace nv {

void CalibrationPair::validate() const {
  if (m0.size() != m1.size())
    throw InvalidParameterError("CalibrationPair: m0 and m1 must have the same length");
  if (m0.size() == 0) throw InvalidParameterError("CalibrationPair: empty calibration");
  if (dt <= 0) throw InvalidParameterError("CalibrationPair: bin width must be positive");
  if (n_cal < 1) throw InvalidParameterError("CalibrationPair: n_cal must be >= 1");
  if (m0.minCoeff() < 0 || m1.minCoeff() < 0)
    throw InvalidParameterError("CalibrationPair: negative mean photon number");
  if (m0.maxCoeff() >= 0.5 || m1.maxCoeff() >= 0.5)
    throw InvalidParameterError(
        "CalibrationPair: per-measurement means must be << 1 (limit 0.5)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::exact_mle: return "exact_mle";
    case Method::approx_mle: return "approx_mle";
    case Method::photon_counting: return "photon_counting";
  }
  return "?";
}

BinWeights weights(const CalibrationPair& cal, long long n_meas) {
  cal.validate();
  if (n_meas < 1) throw InvalidParameterError("weights: n_meas must be >= 1");
  const double half_n = static_cast<double>(n_meas) / 2.0;
  return {half_n * (cal.m0 + cal.m1), half_n * (cal.m0 - cal.m1)};
}

namespace {

void check_compatible(const HistogramData& data, const CalibrationPair& cal) {
  if (data.counts.size() != cal.size())
    throw InvalidParameterError("histogram and calibration bin counts differ");
  if (data.n_meas < 1) throw InvalidParameterError("n_meas must be >= 1");
}

// Score function of the Gaussian log-likelihood, d(-ln P)/dS_z.
// Bins with a_i = 0 carry no information and are skipped.
double mle_score(const BinWeights& w, const HistogramData& data, double s_z) {
  double score = 0.0;
  for (Eigen::Index i = 0; i < w.a.size(); ++i) {
    const double a = w.a[i], b = w.b[i];
    if (a <= 0) continue;
    const double mu = a + b * s_z;
    const double n = static_cast<double>(data.counts[i]);
    score += (b / 2.0) * (1.0 + (mu - n * n) / (mu * mu));
  }
  return score;
}

}  // namespace

EstimatorReport estimate_exact_mle(const HistogramData& data, const CalibrationPair& cal) {
  const BinWeights w = weights(cal, data.n_meas);
  check_compatible(data, cal);
  if ((w.b.array() != 0).count() == 0)
    throw NoContrastError("exact MLE: calibration has no contrast");

  double lo = -1.5, hi = 1.5;
  double f_lo = mle_score(w, data, lo), f_hi = mle_score(w, data, hi);
  if (f_lo * f_hi > 0) {
    lo = -3.0;
    hi = 3.0;
    f_lo = mle_score(w, data, lo);
    f_hi = mle_score(w, data, hi);
    if (f_lo * f_hi > 0)
      throw NoRootError("exact MLE: score function has no sign change in [-3, 3]");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = mle_score(w, data, mid);
    if (f_mid == 0) {
      lo = hi = mid;
      break;
    }
    if ((f_lo < 0) == (f_mid < 0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }

  EstimatorReport report;
  report.method = Method::exact_mle;
  report.s_z = 0.5 * (lo + hi);
  report.predicted_std = std::sqrt(predicted_variance_approx(cal, data.n_meas, report.s_z));
  return report;
}

EstimatorReport estimate_approx_mle(const HistogramData& data, const CalibrationPair& cal) {
  const BinWeights w = weights(cal, data.n_meas);
  check_compatible(data, cal);

  double numerator = 0.0, denominator = 0.0;
  for (Eigen::Index i = 0; i < w.a.size(); ++i) {
    const double a = w.a[i], b = w.b[i];
    if (a <= 0) continue;
    numerator += (b / a) * (static_cast<double>(data.counts[i]) - a);
    denominator += b * b / a;
  }
  if (denominator == 0) throw NoContrastError("approx MLE: calibration has no contrast");

  EstimatorReport report;
  report.method = Method::approx_mle;
  report.s_z = numerator / denominator;
  report.predicted_std = std::sqrt(predicted_variance_approx(cal, data.n_meas, report.s_z));
  return report;
}

EstimatorReport estimate_photon_counting(const HistogramData& data, const CalibrationPair& cal,
                                         int window_bins) {
  cal.validate();
  check_compatible(data, cal);
  if (window_bins < 1 || window_bins > cal.size())
    throw InvalidParameterError("photon counting: window outside trace");

  const double n = static_cast<double>(data.n_meas);
  double counted = 0.0, eta0 = 0.0, eta1 = 0.0;
  for (int i = 0; i < window_bins; ++i) {
    counted += static_cast<double>(data.counts[i]);
    eta0 += n * cal.m0[i];
    eta1 += n * cal.m1[i];
  }
  if (eta0 == eta1) throw NoContrastError("photon counting: no contrast in window");

  EstimatorReport report;
  report.method = Method::photon_counting;
  report.window_bins = window_bins;
  report.s_z = 2.0 * (counted - eta1) / (eta0 - eta1) - 1.0;
  // Shot-noise variance of the window sum propagated through the linear map.
  const double mean_eta =
      std::max(0.5 * (eta0 + eta1) + 0.5 * (eta0 - eta1) * report.s_z, 0.0);
  report.predicted_std = 2.0 * std::sqrt(mean_eta) / std::abs(eta0 - eta1);
  return report;
}

double predicted_variance_approx(const CalibrationPair& cal, long long n_meas, double s_z) {
  const BinWeights w = weights(cal, n_meas);
  double numerator = 0.0, denominator = 0.0;
  for (Eigen::Index i = 0; i < w.a.size(); ++i) {
    const double a = w.a[i], b = w.b[i];
    if (a <= 0) continue;
    numerator += (b / a) * (b / a) * (a + b * s_z);
    denominator += b * b / a;
  }
  if (denominator == 0) throw NoContrastError("variance: calibration has no contrast");
  return numerator / (denominator * denominator);
}

double snr_approx(const CalibrationPair& cal, long long n_meas) {
  cal.validate();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < cal.size(); ++i) {
    const double tot = cal.m0[i] + cal.m1[i];
    if (tot <= 0) continue;
    const double diff = cal.m0[i] - cal.m1[i];
    sum += diff * diff / tot;
  }
  if (sum == 0) throw NoContrastError("snr_approx: calibration has no contrast");
  return std::sqrt(2.0 * static_cast<double>(n_meas)) * std::sqrt(sum);
}

double snr_photon_counting(const CalibrationPair& cal, long long n_meas, int window_bins) {
  cal.validate();
  if (window_bins < 1 || window_bins > cal.size())
    throw InvalidParameterError("snr_photon_counting: window outside trace");
  double diff = 0.0, tot = 0.0;
  for (int i = 0; i < window_bins; ++i) {
    diff += cal.m0[i] - cal.m1[i];
    tot += cal.m0[i] + cal.m1[i];
  }
  if (tot <= 0 || diff == 0) throw NoContrastError("snr_photon_counting: no contrast in window");
  return std::sqrt(2.0 * static_cast<double>(n_meas)) * diff / std::sqrt(tot);
}

int optimal_window(const CalibrationPair& cal, long long n_meas) {
  cal.validate();
  double diff = 0.0, tot = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  int best_window = 0;
  for (int i = 0; i < cal.size(); ++i) {
    diff += cal.m0[i] - cal.m1[i];
    tot += cal.m0[i] + cal.m1[i];
    if (tot <= 0) continue;
    const double snr = std::sqrt(2.0 * static_cast<double>(n_meas)) * diff / std::sqrt(tot);
    if (snr > best) {
      best = snr;
      best_window = i + 1;
    }
  }
  if (best_window == 0 || best <= 0)
    throw NoContrastError("optimal_window: calibration has no contrast");
  return best_window;
}

}  // namespace nv
