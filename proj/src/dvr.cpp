#include "mscheme/dvr.hpp"

#include <cmath>
#include <iostream>

#include "mscheme/csv.hpp"
#include "mscheme/errors.hpp"
#include "mscheme/units.hpp"

namespace mscheme::dvr {

Eigen::VectorXd RadialGrid::points() const {
  validate();
  Eigen::VectorXd r(n_points);
  const double h = spacing();
  for (int i = 0; i < n_points; ++i) r[i] = r_min_angstrom + i * h;
  return r;
}

void RadialGrid::validate() const {
  if (!(r_max_angstrom > r_min_angstrom) || !(r_min_angstrom > 0.0))
    throw ConfigError("radial grid requires r_max > r_min > 0");
  if (n_points < 16) throw ConfigError("radial grid needs at least 16 points");
}

bool RadialGrid::matches(const RadialGrid& other) const {
  return n_points == other.n_points &&
         std::abs(r_min_angstrom - other.r_min_angstrom) < 1e-12 &&
         std::abs(r_max_angstrom - other.r_max_angstrom) < 1e-12;
}

ChannelPotential ChannelPotential::morse(const RadialGrid& grid,
                                         const MorseParameters& p) {
  const Eigen::VectorXd r = grid.points();
  Eigen::VectorXd v(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double x = 1.0 - std::exp(-p.a_per_angstrom * (r[i] - p.r_e_angstrom));
    v[i] = p.t_e_cm + p.d_e_cm * x * x;
  }
  return ChannelPotential(std::move(v), p.t_e_cm + p.d_e_cm);
}

ChannelPotential ChannelPotential::harmonic(const RadialGrid& grid,
                                            double k_cm_per_angstrom2,
                                            double r_e_angstrom, double t_e_cm) {
  const Eigen::VectorXd r = grid.points();
  Eigen::VectorXd v(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double x = r[i] - r_e_angstrom;
    v[i] = t_e_cm + 0.5 * k_cm_per_angstrom2 * x * x;
  }
  // the walls end the well before the parabola does
  const double edge = std::min(v[0], v[r.size() - 1]);
  return ChannelPotential(std::move(v), edge);
}

ChannelPotential ChannelPotential::tabulated(const RadialGrid& grid,
                                             Eigen::VectorXd values_cm,
                                             std::optional<double> asymptote_cm) {
  if (values_cm.size() != grid.n_points)
    throw ConfigError("tabulated potential size does not match the grid");
  if (!values_cm.allFinite())
    throw ConfigError("tabulated potential contains non-finite values");
  const double asym = asymptote_cm.value_or(values_cm[values_cm.size() - 1]);
  return ChannelPotential(std::move(values_cm), asym);
}

ChannelPotential ChannelPotential::constant(const RadialGrid& grid,
                                            double value_cm) {
  return ChannelPotential(Eigen::VectorXd::Constant(grid.n_points, value_cm),
                          value_cm);
}

ChannelPotential ChannelPotential::gaussian_bump(const RadialGrid& grid,
                                                 double amplitude_cm,
                                                 double center_angstrom,
                                                 double width_angstrom) {
  const Eigen::VectorXd r = grid.points();
  Eigen::VectorXd v(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double x = (r[i] - center_angstrom) / width_angstrom;
    v[i] = amplitude_cm * std::exp(-x * x);
  }
  return ChannelPotential(std::move(v), 0.0);
}

ChannelPotential ChannelPotential::from_csv(const RadialGrid& grid,
                                            const std::string& path) {
  const CsvFile file = read_csv(path);
  if (file.header != std::vector<std::string>{"r_angstrom", "v_cm"})
    throw ConfigError("potential CSV " + path +
                      ": expected header r_angstrom,v_cm");
  std::vector<std::pair<double, double>> samples;
  for (const CsvRow& row : file.rows) {
    if (row.fields.size() != 2)
      throw ConfigError("potential CSV line " + std::to_string(row.line_number) +
                        ": expected two columns");
    try {
      samples.emplace_back(std::stod(row.fields[0]), std::stod(row.fields[1]));
    } catch (const std::exception&) {
      throw ConfigError("potential CSV line " + std::to_string(row.line_number) +
                        ": malformed numeric field");
    }
  }
  if (samples.size() < 2)
    throw ConfigError("potential CSV " + path + ": needs at least 2 samples");
  for (size_t i = 1; i < samples.size(); ++i)
    if (samples[i].first <= samples[i - 1].first)
      throw ConfigError("potential CSV " + path + ": r must increase");

  const Eigen::VectorXd r = grid.points();
  if (r[0] < samples.front().first || r[r.size() - 1] > samples.back().first)
    throw ConfigError("potential CSV " + path + ": does not cover the grid");
  Eigen::VectorXd v(r.size());
  size_t k = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    while (k + 2 < samples.size() && samples[k + 1].first < r[i]) ++k;
    const auto& [r0, v0] = samples[k];
    const auto& [r1, v1] = samples[k + 1];
    v[i] = v0 + (v1 - v0) * (r[i] - r0) / (r1 - r0);
  }
  return tabulated(grid, std::move(v));
}

Eigen::MatrixXd kinetic_matrix(const RadialGrid& grid, double reduced_mass_amu) {
  grid.validate();
  if (reduced_mass_amu <= 0.0)
    throw ConfigError("kinetic_matrix: reduced mass must be positive");
  const int n = grid.n_points;
  const double h = grid.spacing();
  const double scale =
      kinetic_scale_cm_amu_angstrom2 / reduced_mass_amu / (h * h);
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = scale * M_PI * M_PI / 3.0;
    for (int j = 0; j < i; ++j) {
      const int d = i - j;
      const double value =
          scale * 2.0 * (d % 2 == 0 ? 1.0 : -1.0) / (static_cast<double>(d) * d);
      k(i, j) = value;
      k(j, i) = value;
    }
  }
  return k;
}

Eigen::VectorXd centrifugal_term(const RadialGrid& grid,
                                 double reduced_mass_amu, int j_total) {
  const Eigen::VectorXd r = grid.points();
  const double scale = kinetic_scale_cm_amu_angstrom2 / reduced_mass_amu *
                       static_cast<double>(j_total) * (j_total + 1);
  return scale * r.array().square().inverse().matrix();
}

namespace {

// deterministic sign: largest-magnitude component positive
void fix_sign(Eigen::VectorXd& psi) {
  Eigen::Index at = 0;
  psi.cwiseAbs().maxCoeff(&at);
  if (psi[at] < 0.0) psi = -psi;
}

}  // namespace

std::vector<BoundLevel> solve_single_channel(const ChannelPotential& potential,
                                             const RadialGrid& grid,
                                             double reduced_mass_amu,
                                             int j_total) {
  if (potential.values_cm().size() != grid.n_points)
    throw ConfigError("solve_single_channel: potential/grid mismatch");
  if (j_total < 0) throw ConfigError("solve_single_channel: J must be >= 0");

  Eigen::MatrixXd h = kinetic_matrix(grid, reduced_mass_amu);
  h.diagonal() += potential.values_cm() +
                  centrifugal_term(grid, reduced_mass_amu, j_total);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw NumericalError("solve_single_channel: eigensolver failed");

  std::vector<BoundLevel> levels;
  for (int i = 0; i < grid.n_points; ++i) {
    const double energy = solver.eigenvalues()[i];
    if (energy >= potential.asymptote_cm()) break;
    BoundLevel level;
    level.energy_cm = energy;
    level.fraction_a = 1.0;
    level.fraction_b = 0.0;
    level.grid = grid;
    level.psi_a = solver.eigenvectors().col(i);
    fix_sign(level.psi_a);
    level.psi_b = Eigen::VectorXd::Zero(grid.n_points);
    level.assignment.character = 'A';
    level.assignment.progression_index = static_cast<int>(levels.size());
    level.assignment.coupled_v = static_cast<int>(levels.size());
    levels.push_back(std::move(level));
  }
  return levels;
}

std::vector<BoundLevel> solve_coupled(const CoupledSystem& system,
                                      const RadialGrid& grid) {
  const int n = grid.n_points;
  if (system.v_a.values_cm().size() != n || system.v_b.values_cm().size() != n ||
      system.coupling_w.values_cm().size() != n)
    throw ConfigError("solve_coupled: channel/grid mismatch");

  const Eigen::MatrixXd kinetic = kinetic_matrix(grid, system.reduced_mass_amu);
  const Eigen::VectorXd cent =
      centrifugal_term(grid, system.reduced_mass_amu, system.j_total);

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  h.topLeftCorner(n, n) = kinetic;
  h.bottomRightCorner(n, n) = kinetic;
  h.topLeftCorner(n, n).diagonal() += system.v_a.values_cm() + cent;
  h.bottomRightCorner(n, n).diagonal() += system.v_b.values_cm() + cent;
  h.topRightCorner(n, n).diagonal() = system.coupling_w.values_cm();
  h.bottomLeftCorner(n, n).diagonal() = system.coupling_w.values_cm();
  if ((h - h.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw NumericalError("solve_coupled: assembled matrix not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw NumericalError("solve_coupled: eigensolver failed");

  const double cutoff =
      std::min(system.v_a.asymptote_cm(), system.v_b.asymptote_cm());
  std::vector<BoundLevel> levels;
  for (int i = 0; i < 2 * n; ++i) {
    const double energy = solver.eigenvalues()[i];
    if (energy >= cutoff) break;
    BoundLevel level;
    level.energy_cm = energy;
    level.grid = grid;
    Eigen::VectorXd full = solver.eigenvectors().col(i);
    level.psi_a = full.head(n);
    level.psi_b = full.tail(n);
    level.fraction_a = level.psi_a.squaredNorm();
    level.fraction_b = level.psi_b.squaredNorm();
    // deterministic overall sign via the dominant channel
    if (level.fraction_a >= level.fraction_b) {
      Eigen::Index at = 0;
      level.psi_a.cwiseAbs().maxCoeff(&at);
      if (level.psi_a[at] < 0.0) {
        level.psi_a = -level.psi_a;
        level.psi_b = -level.psi_b;
      }
    } else {
      Eigen::Index at = 0;
      level.psi_b.cwiseAbs().maxCoeff(&at);
      if (level.psi_b[at] < 0.0) {
        level.psi_a = -level.psi_a;
        level.psi_b = -level.psi_b;
      }
    }
    levels.push_back(std::move(level));
  }
  assign_character(levels);
  return levels;
}

void assign_character(std::vector<BoundLevel>& levels) {
  int next_a = 0, next_b = 0;
  for (size_t i = 0; i < levels.size(); ++i) {
    BoundLevel& level = levels[i];
    level.assignment.coupled_v = static_cast<int>(i);
    level.assignment.ambiguous = std::abs(level.fraction_a - 0.5) <= 1e-6;
    if (level.assignment.ambiguous)
      std::cerr << "mscheme: warning: level " << i
                << " has near-equal channel fractions; assigning A\n";
    if (level.fraction_a > 0.5 || level.assignment.ambiguous) {
      level.assignment.character = 'A';
      level.assignment.progression_index = next_a++;
    } else {
      level.assignment.character = 'b';
      level.assignment.progression_index = next_b++;
    }
  }
}

double overlap(const BoundLevel& level_x, const BoundLevel& level_e) {
  if (!level_x.grid.matches(level_e.grid))
    throw ConfigError("overlap: levels live on different grids");
  return level_x.psi_a.dot(level_e.psi_a);
}

}  // namespace mscheme::dvr
