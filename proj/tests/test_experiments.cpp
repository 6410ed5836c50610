#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mscheme/experiments.hpp"
#include "mscheme/units.hpp"

using namespace mscheme;

namespace {

// linear interpolation of the full width at half depth
double measure_fwhm(const Spectrum& s) {
  const std::vector<double>& x = s.grid.points;
  const std::vector<double>& y = s.survival;
  const int n = static_cast<int>(y.size());
  const double min = *std::min_element(y.begin(), y.end());
  const double half = 1.0 - 0.5 * (1.0 - min);
  double lo = x.front(), hi = x.back();
  for (int i = 0; i + 1 < n; ++i) {
    if (y[i] > half && y[i + 1] <= half)
      lo = x[i] + (x[i + 1] - x[i]) * (y[i] - half) / (y[i] - y[i + 1]);
    if (y[i] <= half && y[i + 1] > half)
      hi = x[i] + (x[i + 1] - x[i]) * (half - y[i]) / (y[i + 1] - y[i]);
  }
  return hi - lo;
}

void check_bounds(const Spectrum& s) {
  for (double v : s.survival) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

}  // namespace

TEST_CASE("loss spectrum: dip at resonance, symmetric, bounded") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 161);
  // intensity tuned so resonance survival is about 0.2 after 20 us
  Spectrum s = loss_spectrum(grid, 711.0, 20.0, 2.0, 6.0);
  check_bounds(s);

  const int n = static_cast<int>(s.survival.size());
  int imin = static_cast<int>(
      std::min_element(s.survival.begin(), s.survival.end()) -
      s.survival.begin());
  CHECK(grid.points[imin] == doctest::Approx(0.0));
  CHECK(s.survival[imin] == doctest::Approx(0.20).epsilon(0.05));

  for (int i = 0; i < n; ++i)
    CHECK(std::abs(s.survival[i] - s.survival[n - 1 - i]) < 1e-6);

  // saturated width exceeds Gamma but stays near it
  const double fwhm = measure_fwhm(s);
  CHECK(fwhm >= 2.0);
  CHECK(fwhm <= 3.2);
}

TEST_CASE("loss spectrum: weak-drive width approaches Gamma") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 161);
  Spectrum s = loss_spectrum(grid, 45.0, 20.0, 2.0, 6.0);  // depth ~0.1
  CHECK(measure_fwhm(s) / 2.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("loss spectrum: zero drive and far detuning survive") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -2.0, 2.0, 5);
  Spectrum off = loss_spectrum(grid, 711.0, 20.0, 2.0, 0.0);
  for (double v : off.survival) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  ScanGrid far = ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, 50.0, 60.0, 2);
  Spectrum f = loss_spectrum(far, 711.0, 20.0, 2.0, 6.0);
  CHECK(f.survival[0] > 0.999);
}

TEST_CASE("decay curve starts at one and scales inversely with intensity") {
  ScanGrid tg = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 50.0, 26);
  Spectrum d270 = decay_curve(270.0, tg, 2.0, 6.0);
  Spectrum d570 = decay_curve(570.0, tg, 2.0, 6.0);
  check_bounds(d270);
  CHECK(d270.survival[0] == doctest::Approx(1.0).epsilon(1e-10));

  // log-slope decay constants; tau proportional to 1/I within a few percent
  const double tau270 = -tg.points[20] / std::log(d270.survival[20]);
  const double tau570 = -tg.points[20] / std::log(d570.survival[20]);
  CHECK(tau270 / tau570 == doctest::Approx(570.0 / 270.0).epsilon(0.05));
  CHECK(tau270 == doctest::Approx(32.75).epsilon(0.05));
}

TEST_CASE("dark resonance scan: revival at two-photon resonance") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -4.0, 4.0, 41);
  const double omega3 = 6.0 * std::sqrt(1000.0);
  const double omega4 = 4.0 * std::sqrt(5e4);
  Spectrum s = dark_resonance_scan(grid, 0.0, omega3, omega4, 2.0, 1.0, 1.0, 20.0);
  check_bounds(s);

  const double revival = s.survival[20];  // center of the symmetric grid
  double shoulder = 1.0;
  for (int i = 0; i < 41; ++i)
    if (std::abs(grid.points[i]) > 0.2 && std::abs(grid.points[i]) < 1.5)
      shoulder = std::min(shoulder, s.survival[i]);
  CHECK(revival > 5.0 * shoulder);
  CHECK(revival > 0.5);

  // two-photon symmetry about Delta3 = Delta4
  for (int i = 0; i < 41; ++i)
    CHECK(std::abs(s.survival[i] - s.survival[40 - i]) < 1e-6);
}

TEST_CASE("dark resonance revival grows with omega4/omega3") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -4.0, 4.0, 41);
  const double omega3 = 6.0 * std::sqrt(300.0);
  double previous = -1.0;
  for (double factor : {0.5, 1.0, 2.0}) {
    Spectrum s = dark_resonance_scan(grid, 0.0, omega3, factor * omega3, 2.0,
                                     0.0, 0.0, 100.0);
    const double revival = s.survival[20];
    CHECK(revival > previous);
    previous = revival;
  }
}

TEST_CASE("dark resonance scan with omega4 = 0 is the loss spectrum") {
  ScanGrid grid =
      ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -8.0, 8.0, 41);
  const double omega3 = 6.0 * std::sqrt(711.0);
  Spectrum base = loss_spectrum(grid, 1.0, 20.0, 2.0, omega3);
  Spectrum dark = dark_resonance_scan(grid, 0.0, omega3, 0.0, 2.0, 0.0, 0.0, 20.0);
  for (int i = 0; i < 41; ++i)
    CHECK(std::abs(base.survival[i] - dark.survival[i]) < 1e-10);
}

TEST_CASE("STIRAP transfers efficiently at the reference drive parameters") {
  StirapConfig config;  // defaults: 2pi x 3 / 2pi x 6 MHz, 10 us pulses
  EfficiencyResult result = simulate_stirap(config);
  CHECK(result.efficiency >= 0.95);
  CHECK(result.efficiency ==
        doctest::Approx(result.trajectory.final_population(2)));
  // trace conserved along the pulse sequence
  const Eigen::VectorXd totals =
      result.trajectory.populations.colwise().sum();
  CHECK((totals.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("STIRAP moves nothing without light") {
  StirapConfig config;
  config.omega_peak1_2pi_mhz = 0.0;
  config.omega_peak2_2pi_mhz = 0.0;
  EfficiencyResult result = simulate_stirap(config);
  CHECK(result.efficiency == doctest::Approx(0.0));
  CHECK(result.trajectory.final_population(0) == doctest::Approx(1.0));
}

TEST_CASE("STIRAP efficiency grows with pulse area") {
  StirapConfig config;
  config.trajectory_samples = 2;
  double previous = 0.0;
  for (double scale : {1.0, 2.0, 4.0}) {
    StirapConfig scaled = config;
    scaled.omega_peak1_2pi_mhz *= scale;
    scaled.omega_peak2_2pi_mhz *= scale;
    const double eff = simulate_stirap(scaled).efficiency;
    CHECK(eff >= previous);
    previous = eff;
  }
}

TEST_CASE("STIRAP efficiency collapses when adiabaticity is lost") {
  StirapConfig fast;
  fast.trajectory_samples = 2;
  fast.pulse_width_us = 10.0 / 32.0;  // Omega1 * width about 6 rad
  fast.pulse_delay_us = 10.0 / 32.0;
  const double eff_fast = simulate_stirap(fast).efficiency;
  StirapConfig slow;
  slow.trajectory_samples = 2;
  const double eff_slow = simulate_stirap(slow).efficiency;
  CHECK(eff_fast < eff_slow - 0.2);
  CHECK(eff_fast < 0.8);
}

TEST_CASE("round trip composes the one-way efficiencies") {
  StirapConfig config;
  config.trajectory_samples = 51;
  RoundTripResult rt = double_stirap_roundtrip(config, 20.0);
  CHECK(rt.survival ==
        doctest::Approx(rt.forward_efficiency * rt.forward_efficiency)
            .epsilon(0.01));
}

TEST_CASE("hold losses multiply the round trip by the exponential factor") {
  StirapConfig config;
  config.trajectory_samples = 51;
  const double with = double_stirap_roundtrip(config, 20.0, 1.0 / 26.0).survival;
  const double without = double_stirap_roundtrip(config, 20.0, 0.0).survival;
  CHECK(with / without == doctest::Approx(std::exp(-20.0 / 26.0)).epsilon(0.02));
}

TEST_CASE("round trip with kHz dephasing lands in the observed bracket") {
  StirapConfig config;
  config.trajectory_samples = 11;
  config.linewidth1_2pi_khz = 1.5;
  config.linewidth2_2pi_khz = 1.5;
  const double survival = double_stirap_roundtrip(config, 20.0).survival;
  CHECK(survival >= 0.5);
  CHECK(survival <= 0.9);
}

TEST_CASE("scan grid validation") {
  CHECK_THROWS_AS(ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 1.0, 1),
                  ConfigError);
  ScanGrid bad;
  bad.axis = ScanGrid::Axis::time;
  bad.points = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  ScanGrid wrong = ScanGrid::linspace(ScanGrid::Axis::time, 0.0, 1.0, 4);
  CHECK_THROWS_AS(loss_spectrum(wrong, 1.0, 1.0, 2.0, 1.0), ConfigError);
  ScanGrid ok = ScanGrid::linspace(ScanGrid::Axis::detuning_delta3, -1, 1, 3);
  CHECK_THROWS_AS(loss_spectrum(ok, 1.0, 0.0, 2.0, 1.0), ConfigError);
}
