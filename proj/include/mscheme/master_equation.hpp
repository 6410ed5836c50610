#ifndef MSCHEME_MASTER_EQUATION_HPP
#define MSCHEME_MASTER_EQUATION_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "mscheme/scheme.hpp"

namespace mscheme {

//
// Rotating-wave Hamiltonian and Lindblad dissipators for a laser-coupled
// chain. All matrices are in rad/us; times in us.
//
// Rotating frame: the chain root sits at zero; walking a coupling from a
// level with cumulative detuning D, the far level gets D - Delta_i going up
// and D + Delta_i going down. For the M chain this gives the diagonal
//   |1> -> 0, |2> -> -D1, |3> -> -(D1-D2), |4> -> -(D1-D2+D3),
//   |5> -> -(D1-D2+D3-D4), sink -> 0,
// and for the Lambda sub-scheme the usual two-photon form with
// delta = D3 - D4 on the far ground level.
//

using ComplexMatrix = Eigen::MatrixXcd;

// Rotating-frame diagonal (rad/us), one entry per level; sink entries are 0.
Eigen::VectorXd cumulative_detunings(const DynamicalScheme& scheme,
                                     const std::vector<LaserField>& lasers);

// H(t): cumulative detunings on the diagonal, Omega_i(t)/2 on each coupled
// pair. Hermitian by construction. Throws ConfigError on a coupling whose
// laser_index has no LaserField.
ComplexMatrix build_rotating_hamiltonian(const DynamicalScheme& scheme,
                                         const std::vector<LaserField>& lasers,
                                         double t_us);

// Collapse operators:
//   - decay:  sqrt(Gamma_k) |sink><k| for every decaying level k
//   - laser phase noise: sqrt(2 gamma_i) P_i, with P_i the projector onto
//     the levels reached from the chain root through laser i. The pair
//     coherence driven by laser i then dephases at gamma_i, and a coherence
//     separated by several lasers at the sum of their linewidths.
std::vector<ComplexMatrix> collapse_operators(
    const DynamicalScheme& scheme, const std::vector<LaserField>& lasers);

// -i[H, rho] + sum_c (c rho c^dag - 1/2 {c^dag c, rho})
ComplexMatrix lindblad_derivative(const ComplexMatrix& hamiltonian,
                                  const std::vector<ComplexMatrix>& collapse,
                                  const ComplexMatrix& rho);

// (Omega4 |3> - Omega3 |5>) / sqrt(Omega3^2 + Omega4^2); amplitudes on
// {|3>, |5>}. Any common unit for the two Rabi frequencies.
Eigen::Vector2d dark_state(double omega3, double omega4);

// Density-matrix diagnostics used by the propagation invariants.
double hermiticity_defect(const ComplexMatrix& rho);
double trace_defect(const ComplexMatrix& rho);
double min_eigenvalue(const ComplexMatrix& rho);

//
// Time-dependent Lindblad right-hand side with precomputed structure;
// this is what the integrator actually calls. Equivalent to
// lindblad_derivative(build_rotating_hamiltonian(...), collapse_operators(...), rho).
//
class LindbladGenerator {
 public:
  LindbladGenerator(const DynamicalScheme& scheme,
                    const std::vector<LaserField>& lasers);

  int dimension() const { return dim_; }

  void derivative(double t_us, const ComplexMatrix& rho,
                  ComplexMatrix& drho) const;

  // Envelope kinks of all drives (unsorted, unfiltered).
  std::vector<double> breakpoints() const;

 private:
  struct Drive {
    int a = 0, b = 0;
    double peak_rad_per_us = 0.0;  // normalized_rabi * sqrt(I), rad/us
    PulseEnvelope envelope;
  };
  struct Decay {
    int from = 0;
    double rate = 0.0;  // rad/us
  };

  int dim_ = 0;
  int sink_ = -1;
  Eigen::VectorXd diag_;     // rotating-frame detunings, rad/us
  Eigen::VectorXd damping_;  // diagonal of sum c^dag c, rad/us
  std::vector<Drive> drives_;
  std::vector<Decay> decays_;
  // per dephasing laser: rate 2*gamma and level membership mask
  struct Dephasing {
    double two_gamma = 0.0;
    std::vector<char> in_set;
  };
  std::vector<Dephasing> dephasings_;
};

}  // namespace mscheme

#endif
