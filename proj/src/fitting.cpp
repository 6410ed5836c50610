#include "mscheme/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mscheme/errors.hpp"
#include "mscheme/units.hpp"

namespace mscheme {

double FitResult::value(const std::string& name) const {
  for (size_t i = 0; i < parameter_names.size(); ++i)
    if (parameter_names[i] == name) return values[static_cast<Eigen::Index>(i)];
  throw ConfigError("fit has no parameter '" + name + "'");
}

double FitResult::standard_error(const std::string& name) const {
  for (size_t i = 0; i < parameter_names.size(); ++i)
    if (parameter_names[i] == name)
      return standard_errors[static_cast<Eigen::Index>(i)];
  throw ConfigError("fit has no parameter '" + name + "'");
}

namespace {

double running_median(const std::vector<double>& values, int at, int window) {
  const int n = static_cast<int>(values.size());
  const int half = window / 2;
  const int lo = std::max(0, at - half);
  const int hi = std::min(n - 1, at + half);
  std::vector<double> slice(values.begin() + lo, values.begin() + hi + 1);
  std::sort(slice.begin(), slice.end());
  const size_t m = slice.size();
  return m % 2 == 1 ? slice[m / 2] : 0.5 * (slice[m / 2 - 1] + slice[m / 2]);
}

Eigen::VectorXd clamp_to(const Eigen::VectorXd& p, const Bounds& b) {
  return p.cwiseMax(b.lower).cwiseMin(b.upper);
}

}  // namespace

std::vector<DipCandidate> detect_dips(const Spectrum& spectrum,
                                      int baseline_window, double threshold) {
  const int n = static_cast<int>(spectrum.survival.size());
  if (n < baseline_window)
    throw ConfigError("detect_dips: spectrum shorter than the baseline window");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ConfigError("detect_dips: threshold must be in (0, 1)");

  const std::vector<double>& s = spectrum.survival;
  std::vector<double> baseline(n);
  for (int i = 0; i < n; ++i)
    baseline[i] = running_median(s, i, baseline_window);

  std::vector<DipCandidate> candidates;
  int run_start = -1;
  auto close_run = [&](int run_end) {
    DipCandidate dip;
    dip.first_index = run_start;
    dip.last_index = run_end;
    double best = std::numeric_limits<double>::infinity();
    int best_at = run_start;
    for (int i = run_start; i <= run_end; ++i) {
      const double rel = baseline[i] > 0.0 ? s[i] / baseline[i] : 1.0;
      if (rel < best) {
        best = rel;
        best_at = i;
      }
    }
    dip.center = spectrum.grid.points[best_at];
    dip.depth = std::min(1.0, std::max(0.0, 1.0 - best));
    dip.width_estimate =
        run_end > run_start
            ? spectrum.grid.points[run_end] - spectrum.grid.points[run_start]
            : (spectrum.grid.points.back() - spectrum.grid.points.front()) /
                  static_cast<double>(n - 1);
    candidates.push_back(dip);
    run_start = -1;
  };

  for (int i = 0; i < n; ++i) {
    const bool below = s[i] < threshold * baseline[i];
    if (below && run_start < 0) run_start = i;
    if (!below && run_start >= 0) close_run(i - 1);
  }
  if (run_start >= 0) close_run(n - 1);

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const DipCandidate& a, const DipCandidate& b) {
                     if (a.depth != b.depth) return a.depth > b.depth;
                     return a.center < b.center;
                   });
  return candidates;
}

FitResult least_squares(const ResidualFunction& residual,
                        const std::vector<std::string>& names,
                        const Eigen::VectorXd& initial, const Bounds& bounds,
                        const FitOptions& options) {
  const Eigen::Index np = initial.size();
  if (bounds.lower.size() != np || bounds.upper.size() != np)
    throw ConfigError("least_squares: bounds dimension mismatch");
  if (static_cast<Eigen::Index>(names.size()) != np)
    throw ConfigError("least_squares: one name per parameter required");
  for (Eigen::Index i = 0; i < np; ++i)
    if (initial[i] < bounds.lower[i] || initial[i] > bounds.upper[i])
      throw ConfigError("least_squares: initial guess outside bounds for " +
                        names[i]);

  auto eval = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r = residual(p);
    if (!r.allFinite())
      throw NumericalError("least_squares: residual contains NaN/Inf");
    return r;
  };

  Eigen::VectorXd p = initial;
  Eigen::VectorXd r = eval(p);
  if (r.size() < np)
    throw ConfigError("least_squares: fewer residuals than parameters");

  FitResult result;
  result.parameter_names = names;

  const auto jacobian = [&](const Eigen::VectorXd& at) {
    Eigen::MatrixXd jac(r.size(), np);
    for (Eigen::Index i = 0; i < np; ++i) {
      const double h =
          options.jacobian_relative_step * std::max(std::abs(at[i]), 1.0);
      Eigen::VectorXd fwd = at, bwd = at;
      fwd[i] = std::min(at[i] + h, bounds.upper[i]);
      bwd[i] = std::max(at[i] - h, bounds.lower[i]);
      const double span = fwd[i] - bwd[i];
      if (span <= 0.0) {
        jac.col(i).setZero();
        continue;
      }
      jac.col(i) = (eval(fwd) - eval(bwd)) / span;
    }
    return jac;
  };

  double lambda = 1e-3;
  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd jac = jacobian(p);
    const Eigen::VectorXd gradient = jac.transpose() * r;

    // projected gradient: components pushing against an active bound do
    // not count
    double gnorm = 0.0;
    for (Eigen::Index i = 0; i < np; ++i) {
      const bool at_lower = p[i] <= bounds.lower[i] && gradient[i] > 0.0;
      const bool at_upper = p[i] >= bounds.upper[i] && gradient[i] < 0.0;
      if (!at_lower && !at_upper)
        gnorm = std::max(gnorm, std::abs(gradient[i]));
    }
    if (gnorm < options.gradient_tolerance * (1.0 + r.norm())) {
      converged = true;
      break;
    }

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    bool improved = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index i = 0; i < np; ++i)
        damped(i, i) += lambda * std::max(jtj(i, i), 1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      const Eigen::VectorXd trial = clamp_to(p + step, bounds);
      const Eigen::VectorXd r_trial = eval(trial);
      if (r_trial.norm() < r.norm()) {
        p = trial;
        r = r_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e14) break;
    }
    if (!improved) {
      result.message = "trust region collapsed";
      break;
    }
  }

  result.values = p;
  result.residual_norm = r.norm();
  result.converged = converged;
  result.iterations = iter;

  // curvature-based standard errors (approximate)
  const Eigen::MatrixXd jac = jacobian(p);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const Eigen::Index dof = r.size() - np;
  const double sigma2 = dof > 0 ? r.squaredNorm() / static_cast<double>(dof) : 0.0;
  Eigen::MatrixXd cov =
      jtj.ldlt().solve(Eigen::MatrixXd::Identity(np, np)) * sigma2;
  result.standard_errors.resize(np);
  for (Eigen::Index i = 0; i < np; ++i)
    result.standard_errors[i] = std::sqrt(std::max(cov(i, i), 0.0));

  for (Eigen::Index i = 0; i < np; ++i) {
    const double scale = std::max(1.0, std::abs(p[i]));
    if (p[i] <= bounds.lower[i] + 1e-12 * scale ||
        p[i] >= bounds.upper[i] - 1e-12 * scale) {
      if (!result.message.empty()) result.message += "; ";
      result.message += "parameter " + names[i] + " at bound";
    }
  }
  return result;
}

FitResult fit_exponential(const Spectrum& decay) {
  if (decay.grid.axis != ScanGrid::Axis::time)
    throw ConfigError("fit_exponential expects a time-axis spectrum");
  const int n = static_cast<int>(decay.survival.size());
  if (n < 4) throw ConfigError("fit_exponential needs at least 4 points");

  const std::vector<double>& t = decay.grid.points;
  const std::vector<double>& s = decay.survival;

  // initial guesses from the endpoints
  const double a0 = std::clamp(s.front(), 1e-6, 2.0);
  double tau0 = t.back() - t.front();
  if (s.front() > 1e-12 && s.back() > 1e-12 && s.back() < s.front()) {
    tau0 = (t.back() - t.front()) / std::log(s.front() / s.back());
  }
  tau0 = std::clamp(tau0, 1e-3, 1e6);

  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i)
      r[i] = p[0] * std::exp(-t[i] / p[1]) - s[i];
    return r;
  };
  Bounds bounds;
  bounds.lower = Eigen::Vector2d(0.0, 1e-3);
  bounds.upper = Eigen::Vector2d(2.0, 1e6);
  FitResult fit = least_squares(residual, {"amplitude", "tau_us"},
                                Eigen::Vector2d(a0, tau0), bounds);
  if (fit.message.find("tau_us at bound") != std::string::npos)
    fit.converged = false;
  return fit;
}

namespace {

double loss_rate_rad_per_us(double gamma_rad, double omega_rad,
                            double delta_rad) {
  const double g2 = gamma_rad * gamma_rad;
  return omega_rad * omega_rad * gamma_rad / (g2 + 4.0 * delta_rad * delta_rad);
}

}  // namespace

FitResult fit_loss_line(const Spectrum& spectrum, double wait_us,
                        double intensity_mw_cm2, LossLineModel model) {
  if (spectrum.grid.axis != ScanGrid::Axis::detuning_delta3)
    throw ConfigError("fit_loss_line expects a detuning_delta3 spectrum");
  const int n = static_cast<int>(spectrum.survival.size());
  if (n < 5) throw ConfigError("fit_loss_line needs at least 5 points");
  const std::vector<double>& x = spectrum.grid.points;
  const std::vector<double>& s = spectrum.survival;

  FitResult fit;
  const double s_max = *std::max_element(s.begin(), s.end());
  const double s_min = *std::min_element(s.begin(), s.end());
  if (s_max - s_min < 1e-3) {
    fit.parameter_names = {"gamma_2pi_mhz", "omega_norm_2pi_khz",
                           "center_2pi_mhz"};
    fit.values = Eigen::Vector3d::Zero();
    fit.standard_errors = Eigen::Vector3d::Zero();
    fit.converged = false;
    fit.message = "no contrast in spectrum";
    return fit;
  }

  const int i_min =
      static_cast<int>(std::min_element(s.begin(), s.end()) - s.begin());
  const double center0 = x[i_min];

  // width at half depth as the Gamma seed
  const double half_level = 0.5 * (s_max + s_min);
  double left = x.front(), right = x.back();
  for (int i = i_min; i >= 0; --i)
    if (s[i] > half_level) {
      left = x[i];
      break;
    }
  for (int i = i_min; i < n; ++i)
    if (s[i] > half_level) {
      right = x[i];
      break;
    }
  const double gamma0 = std::max(0.05, right - left);

  // resonance depth gives the Rabi seed through R0 = Omega^2 / Gamma
  const double r0 = -std::log(std::max(s_min, 1e-6)) / wait_us;
  const double omega0_rad = std::sqrt(r0 * rad_per_us_from_2pi_mhz(gamma0));
  const double omega_norm0 =
      omega0_rad / two_pi * 1e3 / std::sqrt(std::max(intensity_mw_cm2, 1e-12));

  auto residual = [&](const Eigen::VectorXd& p) {
    const double gamma = p[0], omega_norm = p[1], center = p[2];
    Eigen::VectorXd r(n);
    if (model == LossLineModel::rate_equation) {
      const double gamma_rad = rad_per_us_from_2pi_mhz(gamma);
      const double omega_rad = rad_per_us_from_2pi_khz(
          rabi_from_intensity(omega_norm, intensity_mw_cm2));
      for (int i = 0; i < n; ++i) {
        const double delta_rad = rad_per_us_from_2pi_mhz(x[i] - center);
        r[i] = std::exp(-loss_rate_rad_per_us(gamma_rad, omega_rad, delta_rad) *
                        wait_us) -
               s[i];
      }
    } else {
      ScanGrid shifted = spectrum.grid;
      for (int i = 0; i < n; ++i) shifted.points[i] = x[i] - center;
      const Spectrum model_spectrum = loss_spectrum(
          shifted, intensity_mw_cm2, wait_us, gamma, omega_norm);
      for (int i = 0; i < n; ++i) r[i] = model_spectrum.survival[i] - s[i];
    }
    return r;
  };

  Bounds bounds;
  bounds.lower = Eigen::Vector3d(1e-3, 0.0, x.front());
  bounds.upper = Eigen::Vector3d(1e3, 1e6, x.back());
  Eigen::Vector3d init(std::clamp(gamma0, 1e-3, 1e3),
                       std::clamp(omega_norm0, 0.0, 1e6),
                       std::clamp(center0, x.front(), x.back()));
  fit = least_squares(residual,
                      {"gamma_2pi_mhz", "omega_norm_2pi_khz", "center_2pi_mhz"},
                      init, bounds);

  const double span = x.back() - x.front();
  if (span < 3.0 * fit.value("gamma_2pi_mhz")) {
    fit.converged = false;
    if (!fit.message.empty()) fit.message += "; ";
    fit.message += "grid spans fewer than 3 linewidths";
  }
  return fit;
}

void ModelSpec::validate() const {
  for (const FreeParameter& f : free) {
    if (fixed.count(f.name))
      throw ConfigError("ModelSpec: parameter '" + f.name +
                        "' is both free and fixed");
    if (f.initial < f.lower || f.initial > f.upper)
      throw ConfigError("ModelSpec: initial guess outside bounds for '" +
                        f.name + "'");
  }
}

FitResult fit_dark_resonance(const Spectrum& spectrum, const ModelSpec& model) {
  if (model.kind != ModelSpec::Kind::dark_resonance)
    throw ConfigError("fit_dark_resonance requires a dark_resonance ModelSpec");
  model.validate();
  if (spectrum.grid.axis != ScanGrid::Axis::detuning_delta3)
    throw ConfigError("fit_dark_resonance expects a detuning_delta3 spectrum");

  // scan geometry: explicit fixed values win over the spectrum metadata
  auto lookup = [&](const std::string& key, double fallback) {
    auto it = model.fixed.find(key);
    if (it != model.fixed.end()) return it->second;
    if (spectrum.metadata.contains(key))
      return spectrum.metadata[key].get<double>();
    return fallback;
  };
  const double delta4 = lookup("delta4_2pi_mhz", 0.0);
  const double wait = lookup("wait_us", 100.0);
  const double intensity3 = lookup("intensity_l3_mw_cm2", 1.0);
  const double intensity4 = lookup("intensity_l4_mw_cm2", 1.0);

  const int n = static_cast<int>(spectrum.survival.size());
  const std::vector<double>& s = spectrum.survival;

  FitResult fit;

  // with omega4 pinned to zero the model degenerates to the one-color loss
  // line and no two-photon feature is expected
  const auto pinned_omega4 = model.fixed.find("omega4_norm_2pi_khz");
  const bool expect_revival =
      pinned_omega4 == model.fixed.end() || pinned_omega4->second != 0.0;

  // require the narrow revival inside the broad dip: some interior point
  // must sit above the survival minimum on both of its sides, i.e. the scan
  // is not a plain monotone-down-then-up loss line
  if (expect_revival) {
    constexpr double eps = 1e-3;
    std::vector<double> min_left(n), min_right(n);
    min_left[0] = s[0];
    for (int i = 1; i < n; ++i) min_left[i] = std::min(min_left[i - 1], s[i]);
    min_right[n - 1] = s[n - 1];
    for (int i = n - 2; i >= 0; --i)
      min_right[i] = std::min(min_right[i + 1], s[i]);
    bool revival = false;
    for (int m = 1; m + 1 < n; ++m)
      if (min_left[m - 1] < s[m] - eps && min_right[m + 1] < s[m] - eps)
        revival = true;
    if (!revival) {
      fit.converged = false;
      fit.message = "no two-photon feature";
      for (const ModelSpec::FreeParameter& f : model.free)
        fit.parameter_names.push_back(f.name);
      fit.values = Eigen::VectorXd::Zero(model.free.size());
      fit.standard_errors = Eigen::VectorXd::Zero(model.free.size());
      return fit;
    }
  }

  std::vector<std::string> names;
  Eigen::VectorXd init(model.free.size());
  Bounds bounds;
  bounds.lower.resize(model.free.size());
  bounds.upper.resize(model.free.size());
  for (size_t i = 0; i < model.free.size(); ++i) {
    names.push_back(model.free[i].name);
    init[static_cast<Eigen::Index>(i)] = model.free[i].initial;
    bounds.lower[static_cast<Eigen::Index>(i)] = model.free[i].lower;
    bounds.upper[static_cast<Eigen::Index>(i)] = model.free[i].upper;
  }

  const bool shared_linewidth =
      model.fixed.count("linewidth_2pi_khz") ||
      std::any_of(model.free.begin(), model.free.end(),
                  [](const ModelSpec::FreeParameter& f) {
                    return f.name == "linewidth_2pi_khz";
                  });

  auto residual = [&](const Eigen::VectorXd& p) {
    // free parameter, else fixed value, else spectrum metadata, else default
    auto param = [&](const std::string& key, double fallback) {
      for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == key) return p[static_cast<Eigen::Index>(i)];
      return lookup(key, fallback);
    };
    const double omega3_norm = param("omega3_norm_2pi_khz", 6.0);
    const double omega4_norm = param("omega4_norm_2pi_khz", 5.0);
    const double gamma = param("gamma_2pi_mhz", 2.0);
    const double linewidth = param("linewidth_2pi_khz", 0.0);
    // an explicitly controlled shared linewidth beats the per-laser
    // metadata values
    const double lw3 =
        model.fixed.count("linewidth3_2pi_khz") || !shared_linewidth
            ? param("linewidth3_2pi_khz", linewidth)
            : linewidth;
    const double lw4 =
        model.fixed.count("linewidth4_2pi_khz") || !shared_linewidth
            ? param("linewidth4_2pi_khz", linewidth)
            : linewidth;
    const Spectrum scan = dark_resonance_scan(
        spectrum.grid, delta4,
        rabi_from_intensity(omega3_norm, intensity3),
        rabi_from_intensity(omega4_norm, intensity4), gamma, lw3, lw4, wait);
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = scan.survival[i] - s[i];
    return r;
  };

  return least_squares(residual, names, init, bounds);
}

}  // namespace mscheme
