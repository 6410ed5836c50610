#ifndef MSCHEME_DVR_HPP
#define MSCHEME_DVR_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace mscheme::dvr {

//
// Sinc-DVR bound-state solver on a uniform radial grid, for one channel and
// for two spin-orbit-coupled channels. Energies in cm^-1, lengths in
// Angstrom, masses in amu. Grid points are interior points; the implicit
// hard walls sit one spacing outside [r_min, r_max].
//

struct RadialGrid {
  double r_min_angstrom = 3.0;
  double r_max_angstrom = 15.0;
  int n_points = 512;

  double spacing() const {
    return (r_max_angstrom - r_min_angstrom) / (n_points - 1);
  }
  Eigen::VectorXd points() const;
  void validate() const;
  bool matches(const RadialGrid& other) const;
};

struct MorseParameters {
  double d_e_cm = 1000.0;
  double a_per_angstrom = 0.9;
  double r_e_angstrom = 4.5;
  double t_e_cm = 0.0;
};

class ChannelPotential {
 public:
  static ChannelPotential morse(const RadialGrid& grid, const MorseParameters& p);
  static ChannelPotential harmonic(const RadialGrid& grid,
                                   double k_cm_per_angstrom2,
                                   double r_e_angstrom, double t_e_cm = 0.0);
  static ChannelPotential tabulated(const RadialGrid& grid,
                                    Eigen::VectorXd values_cm,
                                    std::optional<double> asymptote_cm = {});
  static ChannelPotential constant(const RadialGrid& grid, double value_cm);
  static ChannelPotential gaussian_bump(const RadialGrid& grid,
                                        double amplitude_cm,
                                        double center_angstrom,
                                        double width_angstrom);
  // CSV columns r_angstrom,v_cm on its own radial mesh; linearly
  // interpolated onto the grid, which the mesh must cover.
  static ChannelPotential from_csv(const RadialGrid& grid,
                                   const std::string& path);

  const Eigen::VectorXd& values_cm() const { return values_; }
  double asymptote_cm() const { return asymptote_; }

 private:
  ChannelPotential(Eigen::VectorXd values, double asymptote)
      : values_(std::move(values)), asymptote_(asymptote) {}
  Eigen::VectorXd values_;
  double asymptote_;
};

struct CoupledSystem {
  ChannelPotential v_a;         // A-like (singlet) channel
  ChannelPotential v_b;         // b-like (triplet) channel
  ChannelPotential coupling_w;  // spin-orbit coupling W(R)
  double reduced_mass_amu = 66.4527;
  int j_total = 0;
};

struct Assignment {
  char character = '?';  // 'A' or 'b'
  int progression_index = -1;
  int coupled_v = -1;
  bool ambiguous = false;
};

struct BoundLevel {
  double energy_cm = 0.0;
  double fraction_a = 1.0;
  double fraction_b = 0.0;
  RadialGrid grid;
  // DVR coefficient vectors, together normalized to 1; psi_b is zero for
  // single-channel levels
  Eigen::VectorXd psi_a, psi_b;
  Assignment assignment;
};

// Colbert-Miller sinc-DVR kinetic matrix, scaled by hbar^2/(2 mu), cm^-1.
Eigen::MatrixXd kinetic_matrix(const RadialGrid& grid, double reduced_mass_amu);

// Centrifugal term hbar^2 J(J+1) / (2 mu R^2) on the grid.
Eigen::VectorXd centrifugal_term(const RadialGrid& grid,
                                 double reduced_mass_amu, int j_total);

// Eigenpairs of K + diag(V + centrifugal) below the channel asymptote,
// energy-ordered. Empty when nothing is bound.
std::vector<BoundLevel> solve_single_channel(const ChannelPotential& potential,
                                             const RadialGrid& grid,
                                             double reduced_mass_amu,
                                             int j_total);

// Eigenpairs of the 2N x 2N matrix [[K+V_A+cent, W], [W, K+V_b+cent]] below
// min(asymptote_A, asymptote_b), with channel fractions and character
// assignments filled in.
std::vector<BoundLevel> solve_coupled(const CoupledSystem& system,
                                      const RadialGrid& grid);

// character = A when fraction_a > 1/2; progression indices count within
// each character class in energy order, coupled_v over all levels. Ties at
// fraction_a = 1/2 (within 1e-6) are flagged ambiguous and assigned to A.
void assign_character(std::vector<BoundLevel>& levels);

// Radial overlap of a single-channel level with the A-channel component of
// a coupled level (constant-dipole Franck-Condon approximation).
double overlap(const BoundLevel& level_x, const BoundLevel& level_e);

}  // namespace mscheme::dvr

#endif
