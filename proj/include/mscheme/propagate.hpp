#ifndef MSCHEME_PROPAGATE_HPP
#define MSCHEME_PROPAGATE_HPP

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mscheme/errors.hpp"
#include "mscheme/master_equation.hpp"
#include "mscheme/scheme.hpp"

namespace mscheme {

struct Trajectory {
  std::vector<double> times_us;
  std::vector<ComplexMatrix> states;
  std::vector<std::string> level_labels;
  // level populations, one row per level, one column per sample time
  Eigen::MatrixXd populations;

  double population(int level, int sample) const {
    return populations(level, sample);
  }
  double final_population(int level) const {
    return populations(level, populations.cols() - 1);
  }
};

struct PropagationOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  long max_steps = 50'000'000;
};

// Carries the last state the integrator could certify.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double t_us, ComplexMatrix state)
      : NumericalError(what), t_us(t_us), state(std::move(state)) {}
  double t_us;
  ComplexMatrix state;
};

// Adaptive Dormand-Prince 5(4) propagation of the Lindblad equation.
// Samples are recorded exactly at the requested times (the integrator steps
// onto them); envelope kinks are never stepped across. The state is
// re-hermitized after every accepted step.
Trajectory propagate(const ComplexMatrix& rho0, const DynamicalScheme& scheme,
                     const std::vector<LaserField>& lasers, double t_begin_us,
                     double t_end_us, std::span<const double> sample_times_us,
                     const PropagationOptions& options = {});

// Uniform sampling convenience overload (n_samples >= 2, endpoints included).
Trajectory propagate(const ComplexMatrix& rho0, const DynamicalScheme& scheme,
                     const std::vector<LaserField>& lasers, double t_begin_us,
                     double t_end_us, int n_samples,
                     const PropagationOptions& options = {});

// Pure state |psi><psi| on the scheme's levels from amplitudes.
ComplexMatrix density_from_amplitudes(const Eigen::VectorXcd& amplitudes,
                                      int dimension);

// |level><level|
ComplexMatrix basis_density(int level, int dimension);

}  // namespace mscheme

#endif
