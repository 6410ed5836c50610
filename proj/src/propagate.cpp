#include "mscheme/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mscheme {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187,
                 A53 = 64448.0 / 6561, A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                 B5 = -2187.0 / 6784, B6 = 11.0 / 84;
// b - b_hat, including the last stage evaluated at the 5th-order solution
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;
constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;

// Scaled max-norm error: max |e| / (atol + rtol * max(|y0|, |y1|)).
// Elements that stay exactly zero contribute nothing, so embedding a
// sub-scheme into a larger one with zero couplings reproduces the exact
// same step sequence.
double error_norm(const ComplexMatrix& err, const ComplexMatrix& y0,
                  const ComplexMatrix& y1, double atol, double rtol) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < err.rows(); ++j)
    for (Eigen::Index l = 0; l < err.cols(); ++l) {
      const double scale =
          atol + rtol * std::max(std::abs(y0(j, l)), std::abs(y1(j, l)));
      worst = std::max(worst, std::abs(err(j, l)) / scale);
    }
  return worst;
}

struct StopPoint {
  double t;
  bool is_sample;
};

}  // namespace

ComplexMatrix density_from_amplitudes(const Eigen::VectorXcd& amplitudes,
                                      int dimension) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dimension);
  psi.head(amplitudes.size()) = amplitudes;
  psi.normalize();
  return psi * psi.adjoint();
}

ComplexMatrix basis_density(int level, int dimension) {
  ComplexMatrix rho = ComplexMatrix::Zero(dimension, dimension);
  rho(level, level) = 1.0;
  return rho;
}

Trajectory propagate(const ComplexMatrix& rho0, const DynamicalScheme& scheme,
                     const std::vector<LaserField>& lasers, double t_begin_us,
                     double t_end_us, std::span<const double> sample_times_us,
                     const PropagationOptions& options) {
  if (t_end_us < t_begin_us)
    throw ConfigError("propagate: t_end must be >= t_begin");
  const LindbladGenerator gen(scheme, lasers);
  const int n = gen.dimension();
  if (rho0.rows() != n || rho0.cols() != n)
    throw ConfigError("propagate: initial state dimension mismatch");

  // Stop points: requested samples plus envelope kinks inside the span.
  std::vector<StopPoint> stops;
  for (double t : sample_times_us) {
    if (t < t_begin_us - 1e-12 || t > t_end_us + 1e-12)
      throw ConfigError("propagate: sample time outside the integration span");
    stops.push_back({std::clamp(t, t_begin_us, t_end_us), true});
  }
  if (!std::is_sorted(stops.begin(), stops.end(),
                      [](auto& a, auto& b) { return a.t < b.t; }))
    throw ConfigError("propagate: sample times must be nondecreasing");
  for (double t : gen.breakpoints())
    if (t > t_begin_us && t < t_end_us) stops.push_back({t, false});
  std::stable_sort(stops.begin(), stops.end(),
                   [](auto& a, auto& b) { return a.t < b.t; });

  Trajectory traj;
  for (const SchemeLevel& level : scheme.levels)
    traj.level_labels.push_back(level.label);

  ComplexMatrix y = 0.5 * (rho0 + rho0.adjoint());
  double t = t_begin_us;

  auto record = [&](double at) {
    // one state per time: collapse duplicate sample times
    if (!traj.times_us.empty() && traj.times_us.back() == at) return;
    traj.times_us.push_back(at);
    traj.states.push_back(y);
  };

  // k-stage workspaces
  ComplexMatrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), k5(n, n), k6(n, n),
      k7(n, n), ytmp(n, n), ynew(n, n), err(n, n);

  long steps = 0;
  double h = 0.0;

  size_t next_stop = 0;
  // samples exactly at t_begin are recorded immediately
  while (next_stop < stops.size() && stops[next_stop].t <= t_begin_us) {
    if (stops[next_stop].is_sample) record(t_begin_us);
    ++next_stop;
  }

  while (next_stop < stops.size() || t < t_end_us) {
    const double segment_end =
        next_stop < stops.size() ? stops[next_stop].t : t_end_us;
    if (segment_end > t) {
      // initial step guess for this segment
      gen.derivative(t, y, k1);
      if (h <= 0.0) {
        const double f0 = k1.cwiseAbs().maxCoeff();
        h = f0 > 0.0 ? std::min(0.1 / f0, segment_end - t)
                     : (segment_end - t);
      }
      while (t < segment_end) {
        if (segment_end - t <= 4e-15 * std::max(1.0, std::abs(segment_end)))
          break;  // snap to the stop point instead of grinding tiny steps
        h = std::min(h, segment_end - t);
        if (++steps > options.max_steps)
          throw IntegrationError("propagate: step budget exhausted", t, y);

        gen.derivative(t, y, k1);
        ytmp = y + h * (A21 * k1);
        gen.derivative(t + C2 * h, ytmp, k2);
        ytmp = y + h * (A31 * k1 + A32 * k2);
        gen.derivative(t + C3 * h, ytmp, k3);
        ytmp = y + h * (A41 * k1 + A42 * k2 + A43 * k3);
        gen.derivative(t + C4 * h, ytmp, k4);
        ytmp = y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4);
        gen.derivative(t + C5 * h, ytmp, k5);
        ytmp = y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5);
        gen.derivative(t + h, ytmp, k6);
        ynew = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        gen.derivative(t + h, ynew, k7);
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);

        const double norm = error_norm(err, y, ynew, options.atol, options.rtol);
        if (!std::isfinite(norm)) {
          h *= 0.1;
          if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw IntegrationError("propagate: non-finite derivative", t, y);
          continue;
        }
        if (norm <= 1.0) {
          t += h;
          y = 0.5 * (ynew + ynew.adjoint());
          const double grow =
              norm > 0.0 ? 0.9 * std::pow(norm, -0.2) : 5.0;
          h *= std::clamp(grow, 0.2, 5.0);
        } else {
          h *= std::max(0.9 * std::pow(norm, -0.2), 0.1);
          if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw IntegrationError("propagate: step size underflow", t, y);
        }
      }
      t = segment_end;
    }
    while (next_stop < stops.size() &&
           stops[next_stop].t <= segment_end) {
      if (stops[next_stop].is_sample) record(segment_end);
      ++next_stop;
    }
    if (next_stop >= stops.size() && t >= t_end_us) break;
  }

  traj.populations.resize(n, traj.times_us.size());
  for (size_t s = 0; s < traj.states.size(); ++s)
    for (int j = 0; j < n; ++j)
      traj.populations(j, s) = traj.states[s](j, j).real();
  return traj;
}

Trajectory propagate(const ComplexMatrix& rho0, const DynamicalScheme& scheme,
                     const std::vector<LaserField>& lasers, double t_begin_us,
                     double t_end_us, int n_samples,
                     const PropagationOptions& options) {
  if (n_samples < 2) throw ConfigError("propagate: need at least two samples");
  std::vector<double> samples(n_samples);
  for (int i = 0; i < n_samples; ++i)
    samples[i] = t_begin_us +
                 (t_end_us - t_begin_us) * static_cast<double>(i) /
                     static_cast<double>(n_samples - 1);
  samples.back() = t_end_us;
  return propagate(rho0, scheme, lasers, t_begin_us, t_end_us, samples, options);
}

}  // namespace mscheme
