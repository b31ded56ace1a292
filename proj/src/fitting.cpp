#include "nv/fitting.hpp"

#include <cmath>

namespace nv {

void FitProblem::validate() const {
  if (datasets.empty()) throw InvalidParameterError("FitProblem: need at least one dataset");
  const double dt = datasets.front().ms0.dt;
  for (const auto& d : datasets) {
    if (d.ms0.dt != dt || d.ms1.dt != dt)
      throw InvalidParameterError("FitProblem: all traces must share the bin width");
    if (d.ms0.bins.size() == 0 || d.ms1.bins.size() == 0)
      throw InvalidParameterError("FitProblem: empty trace in dataset " + d.label);
    if (d.n_meas < 1) throw InvalidParameterError("FitProblem: n_meas must be >= 1");
  }
  if (lifetime_ms0.value_ns <= 0 || lifetime_ms1.value_ns <= 0 ||
      lifetime_ms0.sigma_ns <= 0 || lifetime_ms1.sigma_ns <= 0)
    throw InvalidParameterError("FitProblem: lifetime constraints must be positive");
}

Eigen::Index FitProblem::residual_count() const {
  Eigen::Index n = 2;  // lifetime penalties
  for (const auto& d : datasets) n += d.ms0.bins.size() + d.ms1.bins.size();
  return n;
}

RateModel FitParams::model_for(std::size_t dataset) const {
  RateModel m;
  m.excitation = excitation.at(dataset);
  m.radiative = radiative;
  m.shelving_ms0 = shelving_ms0;
  m.shelving_ms1 = shelving_ms1;
  m.deshelving_ms0 = deshelving_ms0;
  m.deshelving_ms1 = deshelving_ms1;
  m.detection = detection;
  return m;
}

FitParams default_guess(const FitProblem& problem) {
  FitParams guess;
  guess.excitation.reserve(problem.datasets.size());
  for (const auto& d : problem.datasets)
    guess.excitation.push_back(30.0 * std::max(d.intensity, 0.1));
  return guess;
}

namespace {

Eigen::VectorXd pack(const FitParams& p) {
  Eigen::VectorXd x(p.size());
  x[0] = std::log(p.radiative);
  x[1] = std::log(p.shelving_ms0);
  x[2] = std::log(p.shelving_ms1);
  x[3] = std::log(p.deshelving_ms0);
  x[4] = std::log(p.deshelving_ms1);
  x[5] = std::log(p.detection);
  for (std::size_t i = 0; i < p.excitation.size(); ++i) x[6 + i] = std::log(p.excitation[i]);
  return x;
}

FitParams unpack(const Eigen::VectorXd& x, std::size_t n_datasets) {
  FitParams p;
  p.radiative = std::exp(x[0]);
  p.shelving_ms0 = std::exp(x[1]);
  p.shelving_ms1 = std::exp(x[2]);
  p.deshelving_ms0 = std::exp(x[3]);
  p.deshelving_ms1 = std::exp(x[4]);
  p.detection = std::exp(x[5]);
  p.excitation.resize(n_datasets);
  for (std::size_t i = 0; i < n_datasets; ++i) p.excitation[i] = std::exp(x[6 + i]);
  return p;
}

void append_trace_residuals(const FitDataset& dataset, const FluorescenceTrace& model_trace,
                            const Eigen::VectorXd& data, bool poisson, Eigen::VectorXd& out,
                            Eigen::Index& offset) {
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    double weight = 1.0;
    if (poisson) {
      // sigma of a mean over n_meas Poisson measurements; floor at one count.
      const double counts = std::max(dataset.n_meas * data[i], 1.0);
      weight = dataset.n_meas / std::sqrt(counts);
    }
    out[offset++] = weight * (model_trace.bins[i] - data[i]);
  }
}

}  // namespace

Eigen::VectorXd residuals(const FitProblem& problem, const FitParams& params) {
  problem.validate();
  if (params.excitation.size() != problem.datasets.size())
    throw InvalidParameterError("residuals: one excitation rate per dataset required");
  for (double r : {params.radiative, params.shelving_ms0, params.shelving_ms1,
                   params.deshelving_ms0, params.deshelving_ms1, params.detection})
    if (!(r > 0) || !std::isfinite(r))
      throw InvalidParameterError("residuals: parameters must be positive and finite");

  Eigen::VectorXd r(problem.residual_count());
  Eigen::Index offset = 0;
  for (std::size_t d = 0; d < problem.datasets.size(); ++d) {
    const FitDataset& ds = problem.datasets[d];
    const RateModel model = params.model_for(d);
    const int n0 = static_cast<int>(ds.ms0.bins.size());
    const int n1 = static_cast<int>(ds.ms1.bins.size());
    const auto trace0 =
        fluorescence_trace(model, SpinPrep::ms0, n0, ds.ms0.dt, problem.dt_solver);
    const auto trace1 =
        fluorescence_trace(model, SpinPrep::ms1, n1, ds.ms1.dt, problem.dt_solver);
    append_trace_residuals(ds, trace0, ds.ms0.bins, problem.poisson_weights, r, offset);
    append_trace_residuals(ds, trace1, ds.ms1.bins, problem.poisson_weights, r, offset);
  }
  const double t0_model = 1e3 / (params.radiative + params.shelving_ms0);
  const double t1_model = 1e3 / (params.radiative + params.shelving_ms1);
  r[offset++] = (t0_model - problem.lifetime_ms0.value_ns) / problem.lifetime_ms0.sigma_ns;
  r[offset++] = (t1_model - problem.lifetime_ms1.value_ns) / problem.lifetime_ms1.sigma_ns;
  return r;
}

FitResult fit(const FitProblem& problem, const FitParams& initial_guess, int max_iterations) {
  problem.validate();
  const std::size_t n_datasets = problem.datasets.size();
  const Eigen::Index n_params = initial_guess.size();
  const Eigen::Index n_res = problem.residual_count();

  Eigen::VectorXd x = pack(initial_guess);
  Eigen::VectorXd r = residuals(problem, unpack(x, n_datasets));
  double cost = r.squaredNorm();

  const double fd_step = 1e-6;  // absolute on log-params = relative on params
  const auto jacobian = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& r0) {
    Eigen::MatrixXd j(n_res, n_params);
    for (Eigen::Index k = 0; k < n_params; ++k) {
      Eigen::VectorXd xk = at;
      xk[k] += fd_step;
      j.col(k) = (residuals(problem, unpack(xk, n_datasets)) - r0) / fd_step;
    }
    return j;
  };

  FitResult result;
  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;
  for (; iter < max_iterations && !converged; ++iter) {
    const Eigen::MatrixXd j = jacobian(x, r);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd jtr = j.transpose() * r;

    bool stepped = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd x_new = x + step;
      Eigen::VectorXd r_new;
      try {
        r_new = residuals(problem, unpack(x_new, n_datasets));
      } catch (const InvalidParameterError&) {
        lambda *= 10;
        continue;
      }
      const double cost_new = r_new.squaredNorm();
      if (cost_new <= cost) {
        const double rel_drop = (cost - cost_new) / std::max(cost, 1e-300);
        converged = rel_drop < 1e-10 || step.norm() < 1e-10;
        x = x_new;
        r = std::move(r_new);
        cost = cost_new;
        lambda = std::max(lambda * 0.1, 1e-12);
        stepped = true;
        break;
      }
      lambda *= 10;
    }
    if (!stepped) {
      converged = true;  // damping exhausted; already at a minimum
      break;
    }
  }

  result.params = unpack(x, n_datasets);
  result.converged = converged;
  result.iterations = iter;
  result.cost = cost;
  result.message = converged ? "converged" : "max iterations reached; best-so-far returned";

  const Eigen::Index dof = std::max<Eigen::Index>(n_res - n_params, 1);
  result.reduced_chi_square = cost / static_cast<double>(dof);

  // Standard errors: delta method through the log-parameterization.
  const Eigen::MatrixXd j = jacobian(x, r);
  const Eigen::MatrixXd jtj = j.transpose() * j;
  const Eigen::MatrixXd cov =
      jtj.completeOrthogonalDecomposition().pseudoInverse() * result.reduced_chi_square;
  Eigen::VectorXd sigma_log = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd sigma_param = sigma_log.array() * x.array().exp();
  result.standard_errors = unpack(Eigen::VectorXd::Zero(n_params), n_datasets);
  result.standard_errors.radiative = sigma_param[0];
  result.standard_errors.shelving_ms0 = sigma_param[1];
  result.standard_errors.shelving_ms1 = sigma_param[2];
  result.standard_errors.deshelving_ms0 = sigma_param[3];
  result.standard_errors.deshelving_ms1 = sigma_param[4];
  result.standard_errors.detection = sigma_param[5];
  for (std::size_t i = 0; i < n_datasets; ++i)
    result.standard_errors.excitation[i] = sigma_param[6 + i];
  return result;
}

GoodnessReport goodness_report(const FitResult& result, const FitProblem& problem) {
  const Eigen::VectorXd r = residuals(problem, result.params);
  GoodnessReport report;
  report.overall_reduced_chi_square =
      r.squaredNorm() /
      static_cast<double>(std::max<Eigen::Index>(r.size() - result.params.size(), 1));
  Eigen::Index offset = 0;
  for (const auto& d : problem.datasets) {
    const Eigen::Index n = d.ms0.bins.size() + d.ms1.bins.size();
    report.per_dataset_chi_square.push_back(r.segment(offset, n).squaredNorm() /
                                            static_cast<double>(n));
    report.labels.push_back(d.label);
    offset += n;
  }
  return report;
}

}  // namespace nv
