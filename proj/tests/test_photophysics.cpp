#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nv/photophysics.hpp"
#include "nv/presets.hpp"

using namespace nv;

namespace {

RateModel nv1_at(double excitation_mhz) {
  return preset("NV1").with_excitation(excitation_mhz);
}

}  // namespace

TEST_CASE("lifetimes from NV1 rates") {
  const RateModel m = preset("NV1");
  CHECK(m.lifetime_ms0() == doctest::Approx(12.94).epsilon(0.005));
  CHECK(m.lifetime_ms1() == doctest::Approx(6.29).epsilon(0.005));
  CHECK(m.singlet_lifetime() == doctest::Approx(144.0).epsilon(0.005));
}

TEST_CASE("derivative conserves population and vanishes where expected") {
  const RateModel m = nv1_at(50.0);

  SUBCASE("components sum to zero") {
    Populations p;
    p << 0.3, 0.2, 0.25, 0.15, 0.1;
    CHECK(std::abs(derivative(m, p, true).sum()) < 1e-12);
    CHECK(std::abs(derivative(m, p, false).sum()) < 1e-12);
  }

  SUBCASE("steady state is a fixed point") {
    const Populations d = derivative(m, steady_state(m), true);
    CHECK(d.cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("ground state is dark-stable without the laser") {
    Populations p;
    p << 1, 0, 0, 0, 0;
    CHECK(derivative(m, p, false).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("e0 decays at gamma + S0 in the dark") {
    Populations p;
    p << 0, 0, 1, 0, 0;
    // 67.4 + 9.9 MHz = 0.0773 / ns
    CHECK(derivative(m, p, false)[kE0] == doctest::Approx(-0.0773).epsilon(1e-9));
  }
}

TEST_CASE("evolve") {
  const RateModel m = nv1_at(50.0);

  SUBCASE("rejects unstable step") {
    Populations p;
    p << 1, 0, 0, 0, 0;
    CHECK_THROWS_AS(evolve(m, p, 10.0, 10.0, true), InvalidParameterError);
  }

  SUBCASE("steady state stays constant") {
    const Populations ss = steady_state(m);
    const auto traj = evolve(m, ss, 500.0, 0.1, true);
    for (const auto& p : traj) CHECK((p - ss).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("dark decay of e0 follows exp(-t / t0)") {
    Populations p0;
    p0 << 0, 0, 1, 0, 0;
    const double dt = 0.1;
    const auto traj = evolve(m, p0, 40.0, dt, false);
    const double t0 = m.lifetime_ms0();
    for (std::size_t i = 0; i < traj.size(); i += 50) {
      const double t = static_cast<double>(i) * dt;
      CHECK(traj[i][kE0] ==
            doctest::Approx(std::exp(-t / t0)).epsilon(1e-6));
    }
  }

  SUBCASE("long evolution reaches the analytic steady state") {
    Populations p0;
    p0 << 0.5, 0.5, 0, 0, 0;
    const Populations end = evolve(m, p0, 20000.0, 0.2, true).back();
    CHECK((end - steady_state(m)).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("population conserved along the trajectory") {
    Populations p0;
    p0 << 0.5, 0.5, 0, 0, 0;
    for (const auto& p : evolve(m, p0, 2000.0, 0.1, true))
      CHECK(std::abs(p.sum() - 1.0) < 1e-9);
  }

  SUBCASE("halving the step is already converged") {
    Populations p0;
    p0 << 0.6, 0.4, 0, 0, 0;
    const Populations a = evolve(m, p0, 200.0, 0.2, true).back();
    const Populations b = evolve(m, p0, 200.0, 0.1, true).back();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("steady_state") {
  SUBCASE("normalized and non-negative") {
    const Populations p = steady_state(nv1_at(30.0));
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.minCoeff() >= 0.0);
  }

  SUBCASE("spin symmetry when shelving and deshelving match") {
    RateModel m = preset("NV1").with_excitation(40.0);
    m.shelving_ms1 = m.shelving_ms0;
    m.deshelving_ms1 = m.deshelving_ms0;
    const Populations p = steady_state(m);
    CHECK(p[kG0] + p[kE0] == doctest::Approx(p[kG1] + p[kE1]).epsilon(1e-12));
  }

  SUBCASE("requires excitation") {
    CHECK_THROWS_AS(steady_state(preset("NV1")), InvalidParameterError);
  }

  SUBCASE("singlet trap is degenerate") {
    RateModel m = preset("NV1").with_excitation(30.0);
    m.deshelving_ms0 = m.deshelving_ms1 = 0.0;
    CHECK_THROWS_AS(steady_state(m), DegenerateModelError);
  }
}

TEST_CASE("pumped initial condition has support only on the ground sublevels") {
  const RateModel m = nv1_at(55.0);
  const Populations p = pumped_initial_condition(m);
  CHECK(p[kE0] < 1e-9);
  CHECK(p[kE1] < 1e-9);
  CHECK(p[kSinglet] < 1e-9);
  CHECK(p[kG0] + p[kG1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ground polarization drops from ~90% to ~80% with power") {
  const RateModel base = preset("NV1");
  const double r_sat = saturation_rate(base);
  const double low = ground_polarization(base.with_excitation(0.1 * r_sat));
  const double high = ground_polarization(base.with_excitation(10.0 * r_sat));
  CHECK(low == doctest::Approx(0.90).epsilon(0.02));
  CHECK(high == doctest::Approx(0.80).epsilon(0.02));
  CHECK(low > high);
}

TEST_CASE("fluorescence traces") {
  const RateModel base = preset("NV1");
  const double r2 = 2.0 * saturation_rate(base);
  const RateModel m = base.with_excitation(r2);

  SUBCASE("zero detection gives a zero trace") {
    RateModel dark = m;
    dark.detection = 0.0;
    const auto trace = fluorescence_trace(dark, SpinPrep::ms0, 30, 8.33);
    CHECK(trace.bins.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("ms0 brighter than ms1 early, converged late") {
    const auto t0 = fluorescence_trace(m, SpinPrep::ms0, 240, 8.33);
    const auto t1 = fluorescence_trace(m, SpinPrep::ms1, 240, 8.33);
    for (int i = 0; i < 20; ++i) CHECK(t0.bins[i] > t1.bins[i]);
    // >= 1 us: spin information has decayed, rates agree within 1%
    for (int i = 121; i < 240; ++i)
      CHECK(t0.bins[i] == doctest::Approx(t1.bins[i]).epsilon(0.01));
  }

  SUBCASE("225 ns window at 2 I_sat collects ~0.06 photons with the preset detection") {
    const auto trace = fluorescence_trace(m, SpinPrep::ms0, 27, 8.33);
    CHECK(trace.bins.sum() == doctest::Approx(0.06).epsilon(0.02));
  }

  SUBCASE("swapping the spin branches and relabeling leaves observables alone") {
    // Under the relabeling g0<->g1 both preparations map onto themselves
    // (the pumped state swaps along with the rates), so each trace is
    // invariant.
    RateModel swapped = m;
    std::swap(swapped.shelving_ms0, swapped.shelving_ms1);
    std::swap(swapped.deshelving_ms0, swapped.deshelving_ms1);
    for (auto prep : {SpinPrep::ms0, SpinPrep::ms1}) {
      const auto a = fluorescence_trace(m, prep, 60, 8.33);
      const auto b = fluorescence_trace(swapped, prep, 60, 8.33);
      CHECK((a.bins - b.bins).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("mono-exponential lifetime recovery from dark decay") {
    // Fit log(e0) over a short dark window; slope gives 1/(gamma + S0).
    Populations p0;
    p0 << 0, 0, 1, 0, 0;
    const double dt = 0.05;
    const auto traj = evolve(m, p0, 10.0, dt, false);
    const double slope =
        (std::log(traj.back()[kE0]) - std::log(traj.front()[kE0])) /
        (static_cast<double>(traj.size() - 1) * dt);
    CHECK(-1.0 / slope == doctest::Approx(m.lifetime_ms0()).epsilon(0.001));
  }
}

TEST_CASE("saturation") {
  const RateModel m = preset("NV1");
  const double r_sat = saturation_rate(m);

  SUBCASE("definition: half the limiting fluorescence") {
    const double limit = steady_fluorescence(m.with_excitation(1e12));
    const double at_sat = steady_fluorescence(m.with_excitation(r_sat));
    CHECK(at_sat / limit == doctest::Approx(0.5).epsilon(1e-5));
  }

  SUBCASE("fluorescence grows monotonically below saturation") {
    CHECK(steady_fluorescence(m.with_excitation(r_sat / 10)) <
          steady_fluorescence(m.with_excitation(r_sat)));
  }

  SUBCASE("intensity map is linear through R_sat") {
    CHECK(intensity_to_rate(0.0, m) == 0.0);
    CHECK(intensity_to_rate(1.0, m) == doctest::Approx(r_sat));
    CHECK(intensity_to_rate(2.0, m) == doctest::Approx(2.0 * r_sat));
  }

  SUBCASE("two-level-like 2/3 rule at twice saturation") {
    // Holds approximately for the 5-level system; loose tolerance.
    const double limit = steady_fluorescence(m.with_excitation(1e12));
    const double at_2sat = steady_fluorescence(m.with_excitation(2.0 * r_sat));
    CHECK(at_2sat / limit == doctest::Approx(2.0 / 3.0).epsilon(0.05));
  }
}

TEST_CASE("model validation") {
  RateModel m = preset("NV1");
  m.radiative = 0.0;
  CHECK_THROWS_AS(m.validate(), InvalidParameterError);
  m = preset("NV1");
  m.detection = 1.5;
  CHECK_THROWS_AS(m.validate(), InvalidParameterError);
  m = preset("NV1");
  m.shelving_ms0 = -1.0;
  CHECK_THROWS_AS(m.validate(), InvalidParameterError);
}
