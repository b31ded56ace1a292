#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nv/photophysics.hpp"

namespace nv {

/// One laser intensity: a pair of measured mean-photon traces for the two
/// calibration preparations, plus the averaging count (sets Poisson weights).
struct FitDataset {
  std::string label;
  double intensity = 0.0;       // nominal, in units of I_sat (not fitted)
  double n_meas = 1.0;          // measurements averaged into the traces
  FluorescenceTrace ms0, ms1;
};

struct LifetimeConstraint {
  double value_ns = 0.0;
  double sigma_ns = 0.0;
};

struct FitProblem {
  std::vector<FitDataset> datasets;
  LifetimeConstraint lifetime_ms0;  // measured t0 = 1/(gamma + S0)
  LifetimeConstraint lifetime_ms1;  // measured t1 = 1/(gamma + S1)
  bool poisson_weights = true;
  double dt_solver = 0.25;          // ns, for model trace evaluation

  void validate() const;
  Eigen::Index residual_count() const;
};

/// Shared photophysics parameters plus one excitation rate per dataset.
struct FitParams {
  double radiative = 66.0;
  double shelving_ms0 = 10.0;
  double shelving_ms1 = 90.0;
  double deshelving_ms0 = 5.0;
  double deshelving_ms1 = 2.0;
  double detection = 0.01;
  std::vector<double> excitation;  // MHz, one per dataset

  RateModel model_for(std::size_t dataset) const;
  Eigen::Index size() const { return 6 + static_cast<Eigen::Index>(excitation.size()); }
};

struct FitResult {
  FitParams params;
  FitParams standard_errors;
  double reduced_chi_square = 0.0;
  double cost = 0.0;          // sum of squared weighted residuals
  bool converged = false;
  int iterations = 0;
  std::string message;
};

/// Default initial guess: Table-scale magnitudes, per-dataset R ramped with
/// the nominal intensity labels.
FitParams default_guess(const FitProblem& problem);

/// Weighted residual vector: all datasets, both preparations, then the two
/// lifetime penalty residuals scaled by their measurement uncertainties.
Eigen::VectorXd residuals(const FitProblem& problem, const FitParams& params);

/// Damped Gauss-Newton (Levenberg-Marquardt) minimization over
/// log-parameters; positivity is automatic. Standard errors come from the
/// pseudo-inverse of J^T J scaled by the reduced chi-square.
FitResult fit(const FitProblem& problem, const FitParams& initial_guess, int max_iterations = 500);

struct GoodnessReport {
  double overall_reduced_chi_square = 0.0;
  std::vector<double> per_dataset_chi_square;  // reduced, per dataset
  std::vector<std::string> labels;
};

GoodnessReport goodness_report(const FitResult& result, const FitProblem& problem);

}  // namespace nv
