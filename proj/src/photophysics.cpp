#include "nv/photophysics.hpp"

#include <algorithm>
#include <cmath>

namespace nv {

namespace {

constexpr double kMHzPerNs = 1e-3;  // 1 MHz = 1e-3 / ns

// RK4 step for an arbitrary fixed-size state with derivative functor f.
template <typename Vec, typename F>
Vec rk4_step(const Vec& y, double h, F&& f) {
  const Vec k1 = f(y);
  const Vec k2 = f(y + (h / 2) * k1);
  const Vec k3 = f(y + (h / 2) * k2);
  const Vec k4 = f(y + h * k3);
  return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

void RateModel::validate() const {
  if (excitation < 0 || shelving_ms0 < 0 || shelving_ms1 < 0 || deshelving_ms0 < 0 ||
      deshelving_ms1 < 0)
    throw InvalidParameterError("RateModel: rates must be non-negative");
  if (radiative <= 0) throw InvalidParameterError("RateModel: radiative rate must be positive");
  if (!(detection > 0) || detection > 1)
    throw InvalidParameterError("RateModel: detection efficiency must be in (0, 1]");
}

Populations derivative(const RateModel& model, const Populations& pop, bool laser_on) {
  const double pump = laser_on ? model.excitation * kMHzPerNs : 0.0;
  const double gamma = model.radiative * kMHzPerNs;
  const double s0 = model.shelving_ms0 * kMHzPerNs;
  const double s1 = model.shelving_ms1 * kMHzPerNs;
  const double d0 = model.deshelving_ms0 * kMHzPerNs;
  const double d1 = model.deshelving_ms1 * kMHzPerNs;

  Populations rate;
  rate[kG0] = -pump * pop[kG0] + gamma * pop[kE0] + d0 * pop[kSinglet];
  rate[kG1] = -pump * pop[kG1] + gamma * pop[kE1] + d1 * pop[kSinglet];
  rate[kE0] = pump * pop[kG0] - (gamma + s0) * pop[kE0];
  rate[kE1] = pump * pop[kG1] - (gamma + s1) * pop[kE1];
  rate[kSinglet] = s0 * pop[kE0] + s1 * pop[kE1] - (d0 + d1) * pop[kSinglet];
  return rate;
}

double max_stable_step(const RateModel& model) {
  const double fastest =
      std::max({model.excitation, model.radiative + model.shelving_ms0,
                model.radiative + model.shelving_ms1,
                model.deshelving_ms0 + model.deshelving_ms1}) *
      kMHzPerNs;
  return 1.0 / (10.0 * fastest);
}

std::vector<Populations> evolve(const RateModel& model, const Populations& init,
                                double duration_ns, double dt_solver_ns, bool laser_on) {
  if (duration_ns <= 0 || dt_solver_ns <= 0)
    throw InvalidParameterError("evolve: duration and solver step must be positive");
  if (dt_solver_ns > max_stable_step(model))
    throw InvalidParameterError("evolve: solver step exceeds stability bound 1/(10 * max rate)");

  const auto f = [&](const Populations& p) { return derivative(model, p, laser_on); };
  const auto n_steps = static_cast<std::size_t>(std::ceil(duration_ns / dt_solver_ns - 1e-12));
  std::vector<Populations> trajectory;
  trajectory.reserve(n_steps + 1);
  Populations p = init;
  trajectory.push_back(p);
  for (std::size_t i = 0; i < n_steps; ++i) {
    p = rk4_step(p, dt_solver_ns, f);
    trajectory.push_back(p);
  }
  return trajectory;
}

Populations steady_state(const RateModel& model) {
  if (model.excitation <= 0)
    throw InvalidParameterError("steady_state: excitation rate must be positive");
  if (model.deshelving_ms0 + model.deshelving_ms1 == 0 &&
      model.shelving_ms0 + model.shelving_ms1 > 0)
    throw DegenerateModelError("steady_state: population trapped in singlet (D0 = D1 = 0)");

  // Columns of the rate matrix, with the last row replaced by the
  // normalization constraint sum(p) = 1.
  Eigen::Matrix<double, 5, 5> system;
  for (int j = 0; j < 5; ++j)
    system.col(j) = derivative(model, Populations::Unit(j), true);
  system.row(4).setOnes();
  Eigen::Matrix<double, 5, 1> rhs;
  rhs << 0, 0, 0, 0, 1;

  Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(system);
  if (!lu.isInvertible())
    throw DegenerateModelError("steady_state: singular rate matrix");
  Populations p = lu.solve(rhs);
  if (!p.allFinite() || p.minCoeff() < -1e-9)
    throw DegenerateModelError("steady_state: no physical steady state");
  return p;
}

Populations pumped_initial_condition(const RateModel& model) {
  Populations p = steady_state(model);
  const double relax =
      10.0 * std::max({model.lifetime_ms0(), model.lifetime_ms1(), model.singlet_lifetime()});
  const double step = 0.5 * max_stable_step(model);
  for (int chunk = 0; chunk < 16; ++chunk) {
    if (p[kE0] < 1e-9 && p[kE1] < 1e-9 && p[kSinglet] < 1e-9) break;
    p = evolve(model, p, relax, step, false).back();
  }
  // Clamp residual excited support so the result lives exactly on g0, g1.
  p[kG0] += p[kE0];
  p[kG1] += p[kE1];
  const double d_total = model.deshelving_ms0 + model.deshelving_ms1;
  if (d_total > 0) {
    p[kG0] += p[kSinglet] * model.deshelving_ms0 / d_total;
    p[kG1] += p[kSinglet] * model.deshelving_ms1 / d_total;
  }
  p[kE0] = p[kE1] = p[kSinglet] = 0;
  p /= p.sum();
  return p;
}

double ground_polarization(const RateModel& model) {
  return pumped_initial_condition(model)[kG0];
}

FluorescenceTrace fluorescence_trace(const RateModel& model, SpinPrep spin, int n_bins,
                                     double dt_ns, double dt_solver_ns) {
  if (n_bins < 1) throw InvalidParameterError("fluorescence_trace: n_bins must be >= 1");
  if (dt_ns <= 0 || dt_solver_ns <= 0)
    throw InvalidParameterError("fluorescence_trace: bin width and solver step must be positive");
  if (dt_solver_ns > max_stable_step(model))
    throw InvalidParameterError(
        "fluorescence_trace: solver step exceeds stability bound 1/(10 * max rate)");

  Populations init = pumped_initial_condition(model);
  if (spin == SpinPrep::ms1) std::swap(init[kG0], init[kG1]);

  // Augmented state: populations plus the running integral of the detected
  // fluorescence rate, so bin integrals share the RK4 order.
  using State = Eigen::Matrix<double, 6, 1>;
  const double emit = model.detection * model.radiative * kMHzPerNs;
  const auto f = [&](const State& y) {
    State dy;
    dy.head<5>() = derivative(model, y.head<5>(), true);
    dy[5] = emit * (y[kE0] + y[kE1]);
    return dy;
  };

  State y = State::Zero();
  y.head<5>() = init;
  const auto steps_per_bin =
      static_cast<std::size_t>(std::llround(std::ceil(dt_ns / dt_solver_ns - 1e-12)));
  const double h = dt_ns / static_cast<double>(steps_per_bin);

  FluorescenceTrace trace;
  trace.dt = dt_ns;
  trace.bins.resize(n_bins);
  for (int i = 0; i < n_bins; ++i) {
    const double start = y[5];
    for (std::size_t k = 0; k < steps_per_bin; ++k) y = rk4_step(y, h, f);
    trace.bins[i] = y[5] - start;
  }
  return trace;
}

double steady_fluorescence(const RateModel& model) {
  const Populations p = steady_state(model);
  return model.detection * model.radiative * kMHzPerNs * (p[kE0] + p[kE1]);
}

double saturation_rate(const RateModel& model) {
  model.validate();
  const double limit = steady_fluorescence(model.with_excitation(1e12));
  const double target = limit / 2;

  double lo = 1e-9, hi = 1.0;
  while (steady_fluorescence(model.with_excitation(hi)) < target) hi *= 2;
  while ((hi - lo) / hi > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (steady_fluorescence(model.with_excitation(mid)) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double intensity_to_rate(double intensity, const RateModel& model) {
  if (intensity < 0) throw InvalidParameterError("intensity must be non-negative");
  return intensity * saturation_rate(model);
}

}  // namespace nv
