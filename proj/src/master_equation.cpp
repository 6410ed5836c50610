#include "mscheme/master_equation.hpp"

#include <cmath>
#include <map>

#include "mscheme/errors.hpp"
#include "mscheme/units.hpp"

namespace mscheme {

namespace {

const LaserField& field_for(const std::vector<LaserField>& lasers,
                            int laser_index) {
  for (const LaserField& l : lasers)
    if (l.laser_index == laser_index) return l;
  throw ConfigError("no LaserField supplied for laser " +
                    std::to_string(laser_index));
}

// Levels reached from the root by crossing the given coupling. Used both for
// the rotating-frame bookkeeping and for the dephasing projectors.
std::vector<char> downstream_of(const DynamicalScheme& scheme,
                                const Coupling& edge) {
  const int n = scheme.dimension();
  const int root = scheme.root_index();
  std::vector<char> reached(n, 0);
  // BFS from the far side of the edge without crossing the edge itself.
  const int start = [&] {
    // the endpoint further from the root
    std::vector<char> seen(n, 0);
    std::vector<int> stack = {root};
    seen[root] = 1;
    while (!stack.empty()) {
      int at = stack.back();
      stack.pop_back();
      if (at == edge.lower || at == edge.upper) {
        return at == edge.lower ? edge.upper : edge.lower;
      }
      for (const Coupling& c : scheme.couplings) {
        if (&c == &edge) continue;
        int other = -1;
        if (c.lower == at) other = c.upper;
        if (c.upper == at) other = c.lower;
        if (other >= 0 && !seen[other]) {
          seen[other] = 1;
          stack.push_back(other);
        }
      }
    }
    throw ConfigError("coupling unreachable from the chain root");
  }();
  reached[start] = 1;
  std::vector<int> stack = {start};
  while (!stack.empty()) {
    int at = stack.back();
    stack.pop_back();
    for (const Coupling& c : scheme.couplings) {
      if (&c == &edge) continue;
      int other = -1;
      if (c.lower == at) other = c.upper;
      if (c.upper == at) other = c.lower;
      if (other >= 0 && !reached[other]) {
        reached[other] = 1;
        stack.push_back(other);
      }
    }
  }
  return reached;
}

}  // namespace

Eigen::VectorXd cumulative_detunings(const DynamicalScheme& scheme,
                                     const std::vector<LaserField>& lasers) {
  scheme.validate();
  const int n = scheme.dimension();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  std::vector<char> assigned(n, 0);
  const int root = scheme.root_index();
  assigned[root] = 1;
  std::vector<int> stack = {root};
  while (!stack.empty()) {
    int at = stack.back();
    stack.pop_back();
    for (const Coupling& c : scheme.couplings) {
      const double delta =
          rad_per_us_from_2pi_mhz(field_for(lasers, c.laser_index).detuning_2pi_mhz);
      int other = -1;
      double shift = 0.0;
      if (c.lower == at) {
        other = c.upper;
        shift = -delta;  // stepping up the chain
      } else if (c.upper == at) {
        other = c.lower;
        shift = +delta;  // stepping down
      }
      if (other >= 0 && !assigned[other]) {
        diag[other] = diag[at] + shift;
        assigned[other] = 1;
        stack.push_back(other);
      }
    }
  }
  return diag;
}

ComplexMatrix build_rotating_hamiltonian(const DynamicalScheme& scheme,
                                         const std::vector<LaserField>& lasers,
                                         double t_us) {
  const int n = scheme.dimension();
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  h.diagonal() = cumulative_detunings(scheme, lasers).cast<std::complex<double>>();
  for (const Coupling& c : scheme.couplings) {
    const LaserField& laser = field_for(lasers, c.laser_index);
    const double omega = rad_per_us_from_2pi_khz(laser.rabi_2pi_khz(t_us));
    h(c.lower, c.upper) += 0.5 * omega;
    h(c.upper, c.lower) += 0.5 * omega;
  }
  return h;
}

std::vector<ComplexMatrix> collapse_operators(
    const DynamicalScheme& scheme, const std::vector<LaserField>& lasers) {
  scheme.validate();
  const int n = scheme.dimension();
  const int sink = scheme.sink_index();
  std::vector<ComplexMatrix> ops;

  for (int k = 0; k < n; ++k) {
    const double gamma = scheme.levels[k].decay_rate_2pi_mhz;
    if (gamma <= 0.0) continue;
    if (sink < 0) throw ConfigError("decay present but the scheme has no sink");
    ComplexMatrix c = ComplexMatrix::Zero(n, n);
    c(sink, k) = std::sqrt(rad_per_us_from_2pi_mhz(gamma));
    ops.push_back(std::move(c));
  }

  for (const Coupling& edge : scheme.couplings) {
    const LaserField& laser = field_for(lasers, edge.laser_index);
    const double gamma = rad_per_us_from_2pi_khz(laser.linewidth_2pi_khz);
    if (gamma <= 0.0) continue;
    const std::vector<char> set = downstream_of(scheme, edge);
    ComplexMatrix c = ComplexMatrix::Zero(n, n);
    for (int j = 0; j < n; ++j)
      if (set[j]) c(j, j) = std::sqrt(2.0 * gamma);
    ops.push_back(std::move(c));
  }
  return ops;
}

ComplexMatrix lindblad_derivative(const ComplexMatrix& hamiltonian,
                                  const std::vector<ComplexMatrix>& collapse,
                                  const ComplexMatrix& rho) {
  if (hamiltonian.rows() != rho.rows() || hamiltonian.cols() != rho.cols())
    throw ConfigError("lindblad_derivative: dimension mismatch");
  const std::complex<double> minus_i(0.0, -1.0);
  ComplexMatrix drho = minus_i * (hamiltonian * rho - rho * hamiltonian);
  for (const ComplexMatrix& c : collapse) {
    if (c.rows() != rho.rows())
      throw ConfigError("lindblad_derivative: collapse dimension mismatch");
    const ComplexMatrix cdc = c.adjoint() * c;
    drho += c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
  }
  return drho;
}

Eigen::Vector2d dark_state(double omega3, double omega4) {
  const double norm = std::hypot(omega3, omega4);
  if (norm == 0.0) throw ConfigError("dark_state: both Rabi frequencies zero");
  return Eigen::Vector2d(omega4 / norm, -omega3 / norm);
}

double hermiticity_defect(const ComplexMatrix& rho) {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double trace_defect(const ComplexMatrix& rho) {
  return std::abs(rho.trace() - std::complex<double>(1.0, 0.0));
}

double min_eigenvalue(const ComplexMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(
      0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

LindbladGenerator::LindbladGenerator(const DynamicalScheme& scheme,
                                     const std::vector<LaserField>& lasers) {
  scheme.validate();
  dim_ = scheme.dimension();
  sink_ = scheme.sink_index();
  diag_ = cumulative_detunings(scheme, lasers);
  damping_ = Eigen::VectorXd::Zero(dim_);

  for (int k = 0; k < dim_; ++k) {
    const double gamma = scheme.levels[k].decay_rate_2pi_mhz;
    if (gamma <= 0.0) continue;
    if (sink_ < 0) throw ConfigError("decay present but the scheme has no sink");
    const double rate = rad_per_us_from_2pi_mhz(gamma);
    decays_.push_back({k, rate});
    damping_[k] += rate;
  }

  for (const Coupling& c : scheme.couplings) {
    const LaserField& laser = field_for(lasers, c.laser_index);
    if (laser.envelope.peak < 0.0 || laser.envelope.peak > 1.0)
      throw ConfigError("envelope peak must lie in [0, 1]");
    Drive d;
    d.a = c.lower;
    d.b = c.upper;
    d.peak_rad_per_us = rad_per_us_from_2pi_khz(rabi_from_intensity(
        laser.normalized_rabi_2pi_khz, laser.intensity_mw_cm2));
    d.envelope = laser.envelope;
    drives_.push_back(d);

    const double gamma = rad_per_us_from_2pi_khz(laser.linewidth_2pi_khz);
    if (gamma > 0.0) {
      Dephasing deph;
      deph.two_gamma = 2.0 * gamma;
      deph.in_set = downstream_of(scheme, c);
      for (int j = 0; j < dim_; ++j)
        if (deph.in_set[j]) damping_[j] += deph.two_gamma;
      dephasings_.push_back(std::move(deph));
    }
  }
}

void LindbladGenerator::derivative(double t_us, const ComplexMatrix& rho,
                                   ComplexMatrix& drho) const {
  const int n = dim_;
  drho.resize(n, n);

  // -i [H, rho] with H = diag + sparse drives, written out elementwise
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l)
      drho(j, l) = std::complex<double>(0.0, -(diag_[j] - diag_[l])) * rho(j, l);

  for (const Drive& d : drives_) {
    const double omega = d.peak_rad_per_us * d.envelope(t_us);
    if (omega == 0.0) continue;
    const std::complex<double> half(0.0, -0.5 * omega);
    // H has entries omega/2 at (a,b) and (b,a)
    for (int l = 0; l < n; ++l) {
      const std::complex<double> hr_a = rho(d.b, l);  // (H rho)(a, l) term
      const std::complex<double> hr_b = rho(d.a, l);
      drho(d.a, l) += half * hr_a;
      drho(d.b, l) += half * hr_b;
    }
    for (int j = 0; j < n; ++j) {
      drho(j, d.a) -= half * rho(j, d.b);
      drho(j, d.b) -= half * rho(j, d.a);
    }
  }

  // anticommutator with sum c^dag c (diagonal)
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      const double g = 0.5 * (damping_[j] + damping_[l]);
      if (g != 0.0) drho(j, l) -= g * rho(j, l);
    }

  // feeding terms: decay into the sink, and P rho P for each dephasing
  for (const Decay& d : decays_) drho(sink_, sink_) += d.rate * rho(d.from, d.from);
  for (const Dephasing& deph : dephasings_)
    for (int j = 0; j < n; ++j) {
      if (!deph.in_set[j]) continue;
      for (int l = 0; l < n; ++l)
        if (deph.in_set[l]) drho(j, l) += deph.two_gamma * rho(j, l);
    }
}

std::vector<double> LindbladGenerator::breakpoints() const {
  std::vector<double> pts;
  for (const Drive& d : drives_)
    for (double t : d.envelope.breakpoints()) pts.push_back(t);
  return pts;
}

}  // namespace mscheme
