#include <doctest.h>

#include <cmath>

#include "mscheme/fitting.hpp"
#include "mscheme/units.hpp"

using namespace mscheme;

namespace {

// rate-model loss line used as the synthetic-data generator
Spectrum synthetic_line(const ScanGrid& grid, double center_2pi_mhz,
                        double gamma_2pi_mhz, double omega_rad_per_us,
                        double wait_us) {
  Spectrum s;
  s.grid = grid;
  const double gamma_rad = rad_per_us_from_2pi_mhz(gamma_2pi_mhz);
  for (double x : grid.points) {
    const double delta_rad = rad_per_us_from_2pi_mhz(x - center_2pi_mhz);
    const double rate = omega_rad_per_us * omega_rad_per_us * gamma_rad /
                        (gamma_rad * gamma_rad + 4.0 * delta_rad * delta_rad);
    s.survival.push_back(std::exp(-rate * wait_us));
  }
  return s;
}

}  // namespace

TEST_CASE("least squares: linear models converge in one step") {
  auto residual = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(3);
    r[0] = p[0] + 2.0 * p[1] - 5.0;
    r[1] = 3.0 * p[0] - p[1] - 1.0;
    r[2] = p[0] + p[1] - 3.2;
    return r;
  };
  Bounds b;
  b.lower = Eigen::Vector2d(-100, -100);
  b.upper = Eigen::Vector2d(100, 100);
  FitResult f =
      least_squares(residual, {"a", "b"}, Eigen::Vector2d(0.0, 0.0), b);
  CHECK(f.converged);
  CHECK(f.iterations <= 3);
}

TEST_CASE("least squares: Rosenbrock valley") {
  auto residual = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(2);
    r[0] = 10.0 * (p[1] - p[0] * p[0]);
    r[1] = 1.0 - p[0];
    return r;
  };
  Bounds b;
  b.lower = Eigen::Vector2d(-10, -10);
  b.upper = Eigen::Vector2d(10, 10);
  FitResult f =
      least_squares(residual, {"x", "y"}, Eigen::Vector2d(-1.2, 1.0), b);
  CHECK(f.converged);
  CHECK(f.values[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(f.values[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("least squares: truth outside the bounds lands on the boundary") {
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 50.0, 26);
  std::vector<double> data;
  for (double t : tg.points) data.push_back(std::exp(-t / 50.0));
  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(26);
    for (int i = 0; i < 26; ++i)
      r[i] = p[0] * std::exp(-tg.points[i] / p[1]) - data[i];
    return r;
  };
  Bounds b;
  b.lower = Eigen::Vector2d(0.0, 1.0);
  b.upper = Eigen::Vector2d(2.0, 30.0);
  FitResult f = least_squares(residual, {"amplitude", "tau_us"},
                              Eigen::Vector2d(1.0, 10.0), b);
  CHECK(f.value("tau_us") == doctest::Approx(30.0));
  CHECK(f.message.find("tau_us at bound") != std::string::npos);
}

TEST_CASE("least squares: contract violations") {
  auto nan_residual = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(3, std::nan("")).eval();
  };
  Bounds b;
  b.lower = Eigen::VectorXd::Constant(1, -1.0);
  b.upper = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(least_squares(nan_residual, {"p"},
                                Eigen::VectorXd::Zero(1), b),
                  NumericalError);
  // initial guess outside bounds
  auto ok = [](const Eigen::VectorXd& p) { return p; };
  CHECK_THROWS_AS(least_squares(ok, {"p"}, Eigen::VectorXd::Constant(1, 5.0), b),
                  ConfigError);
}

TEST_CASE("fit_exponential recovers noiseless decay constants") {
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 50.0, 26);
  Spectrum s;
  s.grid = tg;
  for (double t : tg.points) s.survival.push_back(std::exp(-t / 26.0));
  FitResult f = fit_exponential(s);
  CHECK(f.converged);
  CHECK(f.value("tau_us") == doctest::Approx(26.0).epsilon(1e-3));
  CHECK(f.value("amplitude") == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("fit_exponential flags constant data") {
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 50.0, 26);
  Spectrum s;
  s.grid = tg;
  for (size_t i = 0; i < tg.points.size(); ++i) s.survival.push_back(0.8);
  FitResult f = fit_exponential(s);
  CHECK_FALSE(f.converged);
  CHECK(f.value("tau_us") == doctest::Approx(1e6));
}

TEST_CASE("fit_exponential on simulated decay matches Gamma/Omega^2") {
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 50.0, 26);
  Spectrum s = decay_curve(570.0, tg, 2.0, 6.0);
  FitResult f = fit_exponential(s);
  const double omega_rad = rad_per_us_from_2pi_khz(6.0 * std::sqrt(570.0));
  const double tau_expected =
      rad_per_us_from_2pi_mhz(2.0) / (omega_rad * omega_rad);
  CHECK(f.converged);
  CHECK(f.value("tau_us") == doctest::Approx(tau_expected).epsilon(0.05));
}

TEST_CASE("fitted tau scales as 1/intensity over a ladder") {
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 80.0, 21);
  double previous_product = -1.0;
  for (double intensity : {100.0, 200.0, 400.0}) {
    Spectrum s = decay_curve(intensity, tg, 2.0, 6.0);
    FitResult f = fit_exponential(s);
    REQUIRE(f.converged);
    const double product = f.value("tau_us") * intensity;
    if (previous_product > 0.0)
      CHECK(product == doctest::Approx(previous_product).epsilon(0.05));
    previous_product = product;
  }
}

TEST_CASE("fit_loss_line round trips on rate-model data") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 81);
  const double omega_rad = rad_per_us_from_2pi_khz(6.0 * std::sqrt(711.0));
  Spectrum s = synthetic_line(grid, 0.35, 2.0, omega_rad, 20.0);
  FitResult f = fit_loss_line(s, 20.0, 711.0);
  CHECK(f.converged);
  CHECK(f.value("gamma_2pi_mhz") == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(f.value("omega_norm_2pi_khz") == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(f.value("center_2pi_mhz") == doctest::Approx(0.35).epsilon(1e-6));
}

TEST_CASE("rate-model fit of master-equation data stays within 5%") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 81);
  Spectrum s = loss_spectrum(grid, 711.0, 20.0, 2.0, 6.0);  // survival_res ~ 0.2
  FitResult f = fit_loss_line(s, 20.0, 711.0);
  CHECK(f.converged);
  CHECK(f.value("gamma_2pi_mhz") == doctest::Approx(2.0).epsilon(0.05));
  CHECK(f.value("omega_norm_2pi_khz") == doctest::Approx(6.0).epsilon(0.05));
}

TEST_CASE("master-equation fit of master-equation data is exact") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 41);
  Spectrum s = loss_spectrum(grid, 711.0, 20.0, 2.0, 6.0);
  FitResult f = fit_loss_line(s, 20.0, 711.0, LossLineModel::master_equation);
  CHECK(f.converged);
  CHECK(f.value("gamma_2pi_mhz") == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(f.value("omega_norm_2pi_khz") == doctest::Approx(6.0).epsilon(1e-4));
}

TEST_CASE("fit_loss_line flags zero contrast") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 21);
  Spectrum s;
  s.grid = grid;
  for (size_t i = 0; i < grid.points.size(); ++i) s.survival.push_back(1.0);
  FitResult f = fit_loss_line(s, 20.0, 711.0);
  CHECK_FALSE(f.converged);
  CHECK(f.message.find("contrast") != std::string::npos);
}

TEST_CASE("fit_loss_line flags insufficient span") {
  // narrow grid over a broad line: fitted width exceeds a third of the span
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -1.5, 1.5, 31);
  const double omega_rad = rad_per_us_from_2pi_khz(6.0 * std::sqrt(711.0));
  Spectrum s = synthetic_line(grid, 0.0, 2.0, omega_rad, 20.0);
  FitResult f = fit_loss_line(s, 20.0, 711.0);
  CHECK_FALSE(f.converged);
  CHECK(f.message.find("linewidths") != std::string::npos);
}

TEST_CASE("detect_dips: single synthetic resonance on a 20 MHz grid") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, 0.0, 4000.0, 201);
  const double omega_rad = rad_per_us_from_2pi_khz(6.0 * std::sqrt(5e4));
  Spectrum s = synthetic_line(grid, 317.0, 2.0, omega_rad, 1000.0);
  auto dips = detect_dips(s, 51, 0.5);
  REQUIRE(dips.size() == 1);
  CHECK(std::abs(dips[0].center - 317.0) <= 20.0);
  CHECK(dips[0].depth > 0.9);
  CHECK(dips[0].first_index <= dips[0].last_index);
}

TEST_CASE("detect_dips: two resonances, deeper first") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, 0.0, 4000.0, 201);
  const double strong = rad_per_us_from_2pi_khz(6.0 * std::sqrt(5e4));
  const double weak = rad_per_us_from_2pi_khz(15.0);  // about half depth
  Spectrum s = synthetic_line(grid, 800.0, 2.0, strong, 1000.0);
  Spectrum second = synthetic_line(grid, 2600.0, 2.0, weak, 1000.0);
  for (size_t i = 0; i < s.survival.size(); ++i)
    s.survival[i] *= second.survival[i];
  auto dips = detect_dips(s, 51, 0.5);
  REQUIRE(dips.size() == 2);
  CHECK(std::abs(dips[0].center - 800.0) <= 20.0);
  CHECK(std::abs(dips[1].center - 2600.0) <= 20.0);
  CHECK(dips[0].depth > dips[1].depth);
}

TEST_CASE("detect_dips: flat input, rescaling invariance, bad arguments") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, 0.0, 4000.0, 201);
  Spectrum flat;
  flat.grid = grid;
  for (size_t i = 0; i < grid.points.size(); ++i) flat.survival.push_back(1.0);
  CHECK(detect_dips(flat, 51, 0.5).empty());

  const double omega_rad = rad_per_us_from_2pi_khz(6.0 * std::sqrt(5e4));
  Spectrum s = synthetic_line(grid, 317.0, 2.0, omega_rad, 1000.0);
  auto reference = detect_dips(s, 51, 0.5);
  Spectrum scaled = s;
  for (double& v : scaled.survival) v *= 0.43;
  auto rescaled = detect_dips(scaled, 51, 0.5);
  REQUIRE(reference.size() == rescaled.size());
  CHECK(reference[0].center == rescaled[0].center);

  CHECK_THROWS_AS(detect_dips(s, 500, 0.5), ConfigError);
  CHECK_THROWS_AS(detect_dips(s, 51, 1.5), ConfigError);
}

TEST_CASE("fit_dark_resonance recovers the generator coefficients") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -4.0, 4.0, 41);
  const double intensity3 = 1000.0, intensity4 = 5e4;
  Spectrum data = dark_resonance_scan(grid, 0.0, 6.0 * std::sqrt(intensity3),
                                      4.0 * std::sqrt(intensity4), 2.0, 1.0,
                                      1.0, 20.0);
  data.metadata["intensity_l3_mw_cm2"] = intensity3;
  data.metadata["intensity_l4_mw_cm2"] = intensity4;

  ModelSpec spec;
  spec.kind = ModelSpec::Kind::dark_resonance;
  spec.fixed = {{"gamma_2pi_mhz", 2.0}, {"linewidth_2pi_khz", 1.0}};
  spec.free = {{"omega3_norm_2pi_khz", 6.0 * 1.3, 0.5, 60.0},
               {"omega4_norm_2pi_khz", 4.0 * 0.7, 0.5, 40.0}};
  FitResult f = fit_dark_resonance(data, spec);
  CHECK(f.converged);
  CHECK(f.value("omega3_norm_2pi_khz") == doctest::Approx(6.0).epsilon(0.05));
  CHECK(f.value("omega4_norm_2pi_khz") == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("weak driving: fitted rate matches Omega^2/Gamma within 2%") {
  // Omega = Gamma/20 on resonance
  const double intensity = std::pow(100.0 / 6.0, 2.0);  // Omega = 2pi x 100 kHz
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 50.0, 26);
  FitResult f = fit_exponential(decay_curve(intensity, tg, 2.0, 6.0));
  const double omega_rad = rad_per_us_from_2pi_khz(6.0 * std::sqrt(intensity));
  const double expected_rate =
      omega_rad * omega_rad / rad_per_us_from_2pi_mhz(2.0);
  REQUIRE(f.converged);
  CHECK(1.0 / f.value("tau_us") ==
        doctest::Approx(expected_rate).epsilon(0.02));
}

TEST_CASE("fit_dark_resonance with omega4 pinned to zero is a loss-line fit") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 41);
  const double omega3 = 6.0 * std::sqrt(711.0);
  Spectrum data = dark_resonance_scan(grid, 0.0, omega3, 0.0, 2.0, 0.0, 0.0, 20.0);
  data.metadata["intensity_l3_mw_cm2"] = 711.0;
  data.metadata["intensity_l4_mw_cm2"] = 1.0;

  ModelSpec spec;
  spec.kind = ModelSpec::Kind::dark_resonance;
  spec.fixed = {{"omega4_norm_2pi_khz", 0.0},
                {"gamma_2pi_mhz", 2.0},
                {"linewidth_2pi_khz", 0.0}};
  spec.free = {{"omega3_norm_2pi_khz", 4.5, 0.5, 60.0}};
  FitResult f = fit_dark_resonance(data, spec);
  CHECK(f.converged);
  CHECK(f.value("omega3_norm_2pi_khz") == doctest::Approx(6.0).epsilon(1e-3));
  // and the plain loss-line fit agrees on the same data
  FitResult loss = fit_loss_line(data, 20.0, 711.0);
  CHECK(loss.value("omega_norm_2pi_khz") ==
        doctest::Approx(f.value("omega3_norm_2pi_khz")).epsilon(0.05));
}

TEST_CASE("fit_dark_resonance reports a missing two-photon feature") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -4.0, 4.0, 41);
  Spectrum plain = dark_resonance_scan(grid, 0.0, 6.0 * std::sqrt(1000.0), 0.0,
                                       2.0, 0.0, 0.0, 20.0);
  plain.metadata["intensity_l3_mw_cm2"] = 1000.0;
  plain.metadata["intensity_l4_mw_cm2"] = 5e4;
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::dark_resonance;
  spec.fixed = {{"gamma_2pi_mhz", 2.0}};
  spec.free = {{"omega3_norm_2pi_khz", 6.0, 0.5, 60.0},
               {"omega4_norm_2pi_khz", 4.0, 0.5, 40.0}};
  FitResult f = fit_dark_resonance(plain, spec);
  CHECK_FALSE(f.converged);
  CHECK(f.message == "no two-photon feature");
}

TEST_CASE("ModelSpec validation") {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::dark_resonance;
  spec.fixed = {{"gamma_2pi_mhz", 2.0}};
  spec.free = {{"gamma_2pi_mhz", 2.0, 1.0, 3.0}};
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // free and fixed overlap
  spec.free = {{"omega3_norm_2pi_khz", 10.0, 0.5, 6.0}};
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // init outside bounds
}
