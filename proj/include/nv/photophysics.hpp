#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nv/errors.hpp"

namespace nv {

// Level populations are ordered (g0, g1, e0, e1, s): the two ground spin
// sublevels, the two optically excited sublevels, and the metastable singlet.
using Populations = Eigen::Matrix<double, 5, 1>;

enum PopulationIndex { kG0 = 0, kG1 = 1, kE0 = 2, kE1 = 3, kSinglet = 4 };

/// Transition rates of the 5-level photophysics model plus the detection
/// scale. All rates in MHz; times elsewhere in the library are in ns.
struct RateModel {
  double excitation = 0.0;       // optical pumping rate R
  double radiative = 0.0;        // spontaneous emission rate gamma
  double shelving_ms0 = 0.0;     // intersystem crossing out of e0
  double shelving_ms1 = 0.0;     // intersystem crossing out of e1
  double deshelving_ms0 = 0.0;   // singlet decay into g0
  double deshelving_ms1 = 0.0;   // singlet decay into g1
  double detection = 1.0;        // detected photons per emitted photon

  /// Excited-state lifetime of the m_s = 0 branch, ns.
  double lifetime_ms0() const { return 1e3 / (radiative + shelving_ms0); }
  /// Excited-state lifetime of the m_s = 1 branch, ns.
  double lifetime_ms1() const { return 1e3 / (radiative + shelving_ms1); }
  /// Singlet (metastable) lifetime, ns.
  double singlet_lifetime() const { return 1e3 / (deshelving_ms0 + deshelving_ms1); }

  /// Throws InvalidParameterError if any rate is negative, gamma is not
  /// positive, or detection is outside (0, 1].
  void validate() const;

  RateModel with_excitation(double rate_mhz) const {
    RateModel m = *this;
    m.excitation = rate_mhz;
    return m;
  }
};

enum class SpinPrep {
  ms0,     // optically pumped initial condition
  ms1,     // pumped condition after an ideal pi pulse (g0 <-> g1)
  pumped,  // raw pumped condition (same as ms0 by the calibration convention)
};

/// Mean detected photons per time bin for a single measurement instance.
struct FluorescenceTrace {
  double dt = 0.0;       // bin width, ns
  Eigen::VectorXd bins;  // mean detected photons per bin, each << 1
};

/// Time derivative of the populations under the rate equations.
/// With laser_on = false the excitation terms are dropped. Units: 1/ns.
Populations derivative(const RateModel& model, const Populations& pop, bool laser_on);

/// Largest stable fixed integration step for this model, ns.
double max_stable_step(const RateModel& model);

/// Classical fixed-step RK4 integration. Returns the sampled trajectory
/// including the initial state; samples are spaced dt_solver apart.
/// Throws InvalidParameterError when dt_solver exceeds the stability bound.
std::vector<Populations> evolve(const RateModel& model, const Populations& init,
                                double duration_ns, double dt_solver_ns, bool laser_on);

/// Analytic steady state under illumination, from the linear system with the
/// normalization constraint. Requires excitation > 0.
Populations steady_state(const RateModel& model);

/// Steady state relaxed in the dark until the excited and singlet levels are
/// empty (< 1e-9); support only on g0, g1.
Populations pumped_initial_condition(const RateModel& model);

/// Fraction of the pumped (relaxed) state in the m_s = 0 ground sublevel.
double ground_polarization(const RateModel& model);

/// Mean detected photons per bin under illumination: bin i holds
/// detection * gamma * integral of (e0 + e1) over [i*dt, (i+1)*dt).
FluorescenceTrace fluorescence_trace(const RateModel& model, SpinPrep spin, int n_bins,
                                     double dt_ns, double dt_solver_ns = 0.1);

/// Steady-state detected fluorescence rate (photons/ns) at the model's
/// excitation rate.
double steady_fluorescence(const RateModel& model);

/// Excitation rate R_sat (MHz) at which the cw fluorescence is half of its
/// saturating limit; bisection to relative tolerance 1e-6.
double saturation_rate(const RateModel& model);

/// Linear map from laser intensity (units of I_sat) to excitation rate (MHz).
double intensity_to_rate(double intensity, const RateModel& model);

}  // namespace nv
