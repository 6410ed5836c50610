#ifndef MSCHEME_FITTING_HPP
#define MSCHEME_FITTING_HPP

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mscheme/experiments.hpp"

namespace mscheme {

//
// Dip detection for broad-range line searches and nonlinear least squares
// for the three fitted models: exponential decay, one-color loss line, and
// the three-level dark resonance.
//

struct DipCandidate {
  double center = 0.0;          // grid units
  double depth = 0.0;           // relative to the local baseline, in (0, 1]
  double width_estimate = 0.0;  // grid units
  int first_index = 0, last_index = 0;
};

// Baseline = running median over baseline_window points; a dip is a maximal
// run with survival < threshold * baseline. Candidates sorted by depth,
// ties broken by smaller center.
std::vector<DipCandidate> detect_dips(const Spectrum& spectrum,
                                      int baseline_window, double threshold);

struct FitResult {
  std::vector<std::string> parameter_names;
  Eigen::VectorXd values;
  Eigen::VectorXd standard_errors;  // from the Gauss-Newton curvature
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;

  double value(const std::string& name) const;
  double standard_error(const std::string& name) const;
};

struct Bounds {
  Eigen::VectorXd lower, upper;
};

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;   // on |J^T r|_inf / (1 + |r|)
  double jacobian_relative_step = 1e-6;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Levenberg-Marquardt with a central-difference Jacobian and box bounds.
// Accepted steps never increase the residual norm. Non-convergence is a
// flag, not an exception; NaN residuals abort with NumericalError.
FitResult least_squares(const ResidualFunction& residual,
                        const std::vector<std::string>& names,
                        const Eigen::VectorXd& initial, const Bounds& bounds,
                        const FitOptions& options = {});

// A exp(-t/tau) on a time-axis spectrum; parameters {amplitude, tau_us}.
FitResult fit_exponential(const Spectrum& decay);

enum class LossLineModel {
  rate_equation,    // survival = exp(-R(Delta) wait), R = Omega^2 Gamma / (Gamma^2 + 4 Delta^2)
  master_equation,  // full two-level propagation per evaluation
};

// Extracts {gamma_2pi_mhz, omega_norm_2pi_khz, center_2pi_mhz} from a
// one-color loss line.
FitResult fit_loss_line(const Spectrum& spectrum, double wait_us,
                        double intensity_mw_cm2,
                        LossLineModel model = LossLineModel::rate_equation);

struct ModelSpec {
  enum class Kind { exponential_decay, loss_line, dark_resonance };
  struct FreeParameter {
    std::string name;
    double initial = 0.0, lower = 0.0, upper = 0.0;
  };

  Kind kind = Kind::dark_resonance;
  std::map<std::string, double> fixed;
  std::vector<FreeParameter> free;

  void validate() const;  // free/fixed disjoint, bounds contain initials
};

// Fits a dark-resonance scan by re-running dark_resonance_scan over the data
// grid per evaluation. Free parameters among {omega3_norm_2pi_khz,
// omega4_norm_2pi_khz, gamma_2pi_mhz, linewidth_2pi_khz}; fixed values and
// the scan geometry (delta4, wait, per-laser intensities) come from
// ModelSpec.fixed, falling back to the spectrum metadata.
FitResult fit_dark_resonance(const Spectrum& spectrum, const ModelSpec& model);

}  // namespace mscheme

#endif
