#include "nv/synth.hpp"

#include <cmath>
#include <numbers>
#include <thread>

namespace nv {

void MixtureSpec::validate() const {
  if (p_flip < 0 || p_flip > 1)
    throw InvalidParameterError("MixtureSpec: p_flip must be in [0, 1]");
  if (n_meas < 1) throw InvalidParameterError("MixtureSpec: n_meas must be >= 1");
  if (background < 0) throw InvalidParameterError("MixtureSpec: background must be >= 0");
}

Eigen::VectorXd expected_bins(const CalibrationPair& cal, const MixtureSpec& spec) {
  cal.validate();
  spec.validate();
  const double n = static_cast<double>(spec.n_meas);
  return n * ((1.0 - spec.p_flip) * cal.m0 + spec.p_flip * cal.m1).array() +
         n * spec.background;
}

HistogramData sample_histogram(const CalibrationPair& cal, const MixtureSpec& spec) {
  const Eigen::VectorXd mu = expected_bins(cal, spec);
  Xoshiro256ss rng(spec.seed);
  HistogramData data;
  data.dt = cal.dt;
  data.n_meas = spec.n_meas;
  data.counts.resize(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) data.counts[i] = sample_poisson(rng, mu[i]);
  return data;
}

namespace {

HistogramData sample_with_stream(const CalibrationPair& cal, const Eigen::VectorXd& mu,
                                 long long n_meas, Xoshiro256ss rng) {
  HistogramData data;
  data.dt = cal.dt;
  data.n_meas = n_meas;
  data.counts.resize(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) data.counts[i] = sample_poisson(rng, mu[i]);
  return data;
}

MethodStats summarize(const std::vector<double>& values, double predicted) {
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var), predicted};
}

template <typename F>
void parallel_for(long long count, int n_threads, F&& body) {
  if (n_threads <= 1) {
    for (long long i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&, t] {
      for (long long i = t; i < count; i += n_threads) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<MonteCarloPoint> rabi_sweep(const CalibrationPair& cal, double t_pi_ns,
                                        const std::vector<double>& durations_ns,
                                        long long n_meas, long long repetitions,
                                        std::uint64_t seed, int n_threads) {
  cal.validate();
  if (t_pi_ns <= 0) throw InvalidParameterError("rabi_sweep: t_pi must be positive");
  if (repetitions < 2) throw InvalidParameterError("rabi_sweep: need >= 2 repetitions");

  const int window = optimal_window(cal, n_meas);
  std::vector<MonteCarloPoint> points;
  points.reserve(durations_ns.size());

  std::uint64_t stream = 0;
  for (double t : durations_ns) {
    const double phase = std::sin(std::numbers::pi * t / (2.0 * t_pi_ns));
    MixtureSpec spec;
    spec.p_flip = phase * phase;
    spec.n_meas = n_meas;
    const Eigen::VectorXd mu = expected_bins(cal, spec);
    const double s_z_true = 1.0 - 2.0 * spec.p_flip;

    std::vector<double> s_exact(repetitions), s_approx(repetitions), s_count(repetitions);
    const std::uint64_t stream_base = stream;
    parallel_for(repetitions, n_threads, [&](long long rep) {
      const HistogramData data = sample_with_stream(
          cal, mu, n_meas, Xoshiro256ss::substream(seed, stream_base + rep));
      s_exact[rep] = estimate_exact_mle(data, cal).s_z;
      s_approx[rep] = estimate_approx_mle(data, cal).s_z;
      s_count[rep] = estimate_photon_counting(data, cal, window).s_z;
    });
    stream += repetitions;

    MonteCarloPoint point;
    point.sweep_value = t;
    point.p_flip = spec.p_flip;
    point.repetitions = repetitions;
    point.window_bins = window;
    const double predicted_a = std::sqrt(predicted_variance_approx(cal, n_meas, s_z_true));
    point.exact = summarize(s_exact, predicted_a);
    point.approx = summarize(s_approx, predicted_a);
    // Photon-counting prediction from the window shot noise at the true S_z.
    const BinWeights w = weights(cal, n_meas);
    const double eta_mean = w.a.head(window).sum() + w.b.head(window).sum() * s_z_true;
    const double swing = 2.0 * w.b.head(window).sum();
    point.counting =
        summarize(s_count, 2.0 * std::sqrt(std::max(eta_mean, 0.0)) / std::abs(swing));
    points.push_back(point);
  }
  return points;
}

CalibrationPair simulated_calibration(const RateModel& model, double intensity, int n_bins,
                                      double dt_ns) {
  if (intensity <= 0) throw InvalidParameterError("simulated_calibration: intensity must be > 0");
  const RateModel at_power = model.with_excitation(intensity_to_rate(intensity, model));
  CalibrationPair cal;
  cal.dt = dt_ns;
  cal.m0 = fluorescence_trace(at_power, SpinPrep::ms0, n_bins, dt_ns).bins;
  cal.m1 = fluorescence_trace(at_power, SpinPrep::ms1, n_bins, dt_ns).bins;
  cal.n_cal = 1;  // noiseless model traces
  return cal;
}

std::vector<SnrSweepPoint> snr_intensity_sweep(const RateModel& model,
                                               const std::vector<double>& intensities,
                                               int trace_bins, double dt_ns) {
  std::vector<SnrSweepPoint> points;
  points.reserve(intensities.size());
  for (double intensity : intensities) {
    const CalibrationPair cal = simulated_calibration(model, intensity, trace_bins, dt_ns);
    SnrSweepPoint point;
    point.intensity = intensity;
    point.window_bins = optimal_window(cal, 1);
    point.snr_approx = snr_approx(cal, 1);
    point.snr_counting = snr_photon_counting(cal, 1, point.window_bins);
    point.percent_gap = 100.0 * (point.snr_approx / point.snr_counting - 1.0);
    points.push_back(point);
  }
  return points;
}

}  // namespace nv
