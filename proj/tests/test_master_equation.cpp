#include <doctest.h>

#include <cmath>
#include <random>

#include "mscheme/errors.hpp"
#include "mscheme/master_equation.hpp"
#include "mscheme/units.hpp"
#include "test_helpers.hpp"

using namespace mscheme;

TEST_CASE("rabi_from_intensity") {
  CHECK(rabi_from_intensity(6.0, 270.0) == doctest::Approx(98.590060).epsilon(1e-8));
  CHECK(rabi_from_intensity(123.0, 0.0) == 0.0);
  CHECK(rabi_from_intensity(5.0, 1.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(rabi_from_intensity(-1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(rabi_from_intensity(1.0, -1.0), ConfigError);
}

namespace {

std::vector<LaserField> m_scheme_lasers(double d1, double d2, double d3,
                                        double d4, double omega_khz) {
  std::vector<LaserField> lasers;
  for (int i = 1; i <= 4; ++i) {
    LaserField l;
    l.laser_index = i;
    l.normalized_rabi_2pi_khz = omega_khz;
    l.intensity_mw_cm2 = 1.0;
    lasers.push_back(l);
  }
  lasers[0].detuning_2pi_mhz = d1;
  lasers[1].detuning_2pi_mhz = d2;
  lasers[2].detuning_2pi_mhz = d3;
  lasers[3].detuning_2pi_mhz = d4;
  return lasers;
}

}  // namespace

TEST_CASE("rotating frame diagonal follows the M-chain geometry") {
  const DynamicalScheme scheme = make_m_scheme(2.0, 2.0);
  const double d1 = 0.7, d2 = -1.3, d3 = 2.1, d4 = 0.4;
  const Eigen::VectorXd diag =
      cumulative_detunings(scheme, m_scheme_lasers(d1, d2, d3, d4, 100.0));
  const double u = two_pi;  // 2pi*MHz -> rad/us
  CHECK(diag[0] == doctest::Approx(0.0));
  CHECK(diag[1] == doctest::Approx(-d1 * u));
  CHECK(diag[2] == doctest::Approx(-(d1 - d2) * u));
  CHECK(diag[3] == doctest::Approx(-(d1 - d2 + d3) * u));
  CHECK(diag[4] == doctest::Approx(-(d1 - d2 + d3 - d4) * u));
  CHECK(diag[5] == doctest::Approx(0.0));  // sink
}

TEST_CASE("resonant Hamiltonian has zero diagonal and Omega/2 couplings") {
  const DynamicalScheme scheme = make_m_scheme(2.0, 2.0);
  const auto lasers = m_scheme_lasers(0.0, 0.0, 0.0, 0.0, 500.0);
  const ComplexMatrix h = build_rotating_hamiltonian(scheme, lasers, 0.0);
  CHECK(h.diagonal().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  const double omega_rad = rad_per_us_from_2pi_khz(500.0);
  CHECK(h(0, 1).real() == doctest::Approx(0.5 * omega_rad));
  CHECK(h(2, 1).real() == doctest::Approx(0.5 * omega_rad));
  CHECK(h(2, 3).real() == doctest::Approx(0.5 * omega_rad));
  CHECK(h(4, 3).real() == doctest::Approx(0.5 * omega_rad));
  CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  // nothing couples to the sink
  CHECK(h.row(5).cwiseAbs().sum() == doctest::Approx(0.0));
}

TEST_CASE("Lambda sub-scheme reduces to the two-photon form") {
  const DynamicalScheme lambda = make_lambda_scheme(2.0);
  std::vector<LaserField> lasers(2);
  lasers[0].laser_index = 3;
  lasers[0].detuning_2pi_mhz = 1.7;
  lasers[0].normalized_rabi_2pi_khz = 100.0;
  lasers[0].intensity_mw_cm2 = 1.0;
  lasers[1].laser_index = 4;
  lasers[1].detuning_2pi_mhz = 1.7;  // two-photon resonance
  lasers[1].normalized_rabi_2pi_khz = 80.0;
  lasers[1].intensity_mw_cm2 = 1.0;
  const Eigen::VectorXd diag = cumulative_detunings(lambda, lasers);
  // |3> and |5> degenerate in the rotating frame at two-photon resonance
  CHECK(diag[0] == doctest::Approx(0.0));
  CHECK(diag[2] == doctest::Approx(0.0).epsilon(1e-14));
  // away from two-photon resonance the splitting is delta = D3 - D4
  lasers[1].detuning_2pi_mhz = 0.9;
  const Eigen::VectorXd diag2 = cumulative_detunings(lambda, lasers);
  CHECK(diag2[2] == doctest::Approx(-(1.7 - 0.9) * two_pi));
}

TEST_CASE("STIRAP settings leave |3> near zero detuning") {
  const DynamicalScheme scheme = make_m_scheme(2.0, 2.0);
  const Eigen::VectorXd diag =
      cumulative_detunings(scheme, m_scheme_lasers(0.0, 0.0, 1.0, 0.5, 100.0));
  CHECK(diag[2] == doctest::Approx(0.0));
}

TEST_CASE("dangling laser index is a configuration error") {
  const DynamicalScheme scheme = make_loss_scheme(2.0);
  LaserField wrong;
  wrong.laser_index = 7;
  CHECK_THROWS_AS(build_rotating_hamiltonian(scheme, {wrong}, 0.0), ConfigError);
}

TEST_CASE("collapse operators: decay and dephasing structure") {
  SUBCASE("single decay channel at 2pi x 2 MHz") {
    const DynamicalScheme scheme = make_loss_scheme(2.0);
    std::vector<LaserField> lasers(1);
    lasers[0].laser_index = 3;
    const auto ops = collapse_operators(scheme, lasers);
    REQUIRE(ops.size() == 1);
    // sqrt(Gamma) |sink><4|
    CHECK(std::norm(ops[0](2, 1)) == doctest::Approx(rad_per_us_from_2pi_mhz(2.0)));
    CHECK(ops[0].cwiseAbs().sum() ==
          doctest::Approx(std::sqrt(rad_per_us_from_2pi_mhz(2.0))));
  }

  SUBCASE("no decay, no linewidth: empty list") {
    DynamicalScheme scheme = make_loss_scheme(0.0);
    std::vector<LaserField> lasers(1);
    lasers[0].laser_index = 3;
    CHECK(collapse_operators(scheme, lasers).empty());
  }

  SUBCASE("decay without sink is a configuration error") {
    DynamicalScheme scheme;
    scheme.levels = {{"g", 0.0, false}, {"e", 1.0, false}};
    scheme.couplings = {{0, 1, 1}};
    std::vector<LaserField> lasers(1);
    lasers[0].laser_index = 1;
    CHECK_THROWS_AS(collapse_operators(scheme, lasers), ConfigError);
  }

  SUBCASE("Lambda linewidths give one projector per laser") {
    const DynamicalScheme lambda = make_lambda_scheme(0.0);
    std::vector<LaserField> lasers(2);
    lasers[0].laser_index = 3;
    lasers[0].linewidth_2pi_khz = 1.0;
    lasers[1].laser_index = 4;
    lasers[1].linewidth_2pi_khz = 1.0;
    const auto ops = collapse_operators(lambda, lasers);
    REQUIRE(ops.size() == 2);
    const double g = rad_per_us_from_2pi_khz(1.0);
    // L3 projector covers {|4>, |5>}, L4 projector covers {|5>}
    CHECK(std::norm(ops[0](1, 1)) == doctest::Approx(2.0 * g));
    CHECK(std::norm(ops[0](2, 2)) == doctest::Approx(2.0 * g));
    CHECK(std::abs(ops[0](0, 0)) == doctest::Approx(0.0));
    CHECK(std::norm(ops[1](2, 2)) == doctest::Approx(2.0 * g));
    CHECK(std::abs(ops[1](1, 1)) == doctest::Approx(0.0));
  }
}

TEST_CASE("lindblad_derivative oracles") {
  SUBCASE("free evolution of nothing") {
    const ComplexMatrix h = ComplexMatrix::Zero(3, 3);
    ComplexMatrix rho = ComplexMatrix::Zero(3, 3);
    rho(0, 0) = 1.0;
    CHECK(lindblad_derivative(h, {}, rho).cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0));
  }

  SUBCASE("pure decay empties the excited level at Gamma") {
    const double gamma_rad = rad_per_us_from_2pi_mhz(2.0);
    ComplexMatrix c = ComplexMatrix::Zero(2, 2);
    c(0, 1) = std::sqrt(gamma_rad);
    ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
    rho(1, 1) = 1.0;
    const ComplexMatrix drho =
        lindblad_derivative(ComplexMatrix::Zero(2, 2), {c}, rho);
    CHECK(drho(1, 1).real() == doctest::Approx(-gamma_rad));
    CHECK(drho(0, 0).real() == doctest::Approx(gamma_rad));
  }

  SUBCASE("derivative is traceless and matches the generator") {
    std::mt19937 rng(2026);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
      auto [scheme, lasers] = testing::random_chain(rng);
      const int n = scheme.dimension();
      // random hermitian unit-trace state
      ComplexMatrix a = ComplexMatrix::Random(n, n);
      ComplexMatrix rho = a * a.adjoint();
      rho /= rho.trace();

      const double t = 3.0 * unit(rng);
      const ComplexMatrix h = build_rotating_hamiltonian(scheme, lasers, t);
      const auto ops = collapse_operators(scheme, lasers);
      const ComplexMatrix reference = lindblad_derivative(h, ops, rho);
      CHECK(std::abs(reference.trace()) < 1e-12);

      LindbladGenerator gen(scheme, lasers);
      ComplexMatrix fast(n, n);
      gen.derivative(t, rho, fast);
      CHECK((fast - reference).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(lindblad_derivative(ComplexMatrix::Zero(2, 2), {},
                                        ComplexMatrix::Zero(3, 3)),
                    ConfigError);
  }

  SUBCASE("closed two-level steady state") {
    // resonant drive with decay back to the ground level:
    // rho_ee -> (Omega^2/Gamma^2) / (1 + 2 Omega^2/Gamma^2)
    const double omega = 4.0, gamma = 6.5;  // rad/us
    ComplexMatrix h = ComplexMatrix::Zero(2, 2);
    h(0, 1) = h(1, 0) = 0.5 * omega;
    ComplexMatrix c = ComplexMatrix::Zero(2, 2);
    c(0, 1) = std::sqrt(gamma);
    ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    // fixed-step RK4 long past any transient
    const double dt = 1e-3;
    for (int step = 0; step < 20000; ++step) {
      const ComplexMatrix k1 = lindblad_derivative(h, {c}, rho);
      const ComplexMatrix k2 = lindblad_derivative(h, {c}, rho + 0.5 * dt * k1);
      const ComplexMatrix k3 = lindblad_derivative(h, {c}, rho + 0.5 * dt * k2);
      const ComplexMatrix k4 = lindblad_derivative(h, {c}, rho + dt * k3);
      rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double ratio2 = omega * omega / (gamma * gamma);
    const double expected = ratio2 / (1.0 + 2.0 * ratio2);
    CHECK(rho(1, 1).real() == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("pulse envelopes") {
  SUBCASE("constant ignores center and width, clips to the window") {
    PulseEnvelope env = PulseEnvelope::constant(0.8);
    env.center_time_us = 123.0;
    env.width_us = 0.001;
    env.t_on_us = 1.0;
    env.t_off_us = 2.0;
    CHECK(env(1.5) == doctest::Approx(0.8));
    CHECK(env(0.5) == 0.0);
    CHECK(env(2.5) == 0.0);
  }

  SUBCASE("gaussian width is the 1/e^2 half-width of the intensity") {
    PulseEnvelope env = PulseEnvelope::gaussian(1.0, 10.0, 3.0, 0.0, 20.0);
    CHECK(env(10.0) == doctest::Approx(1.0));
    const double at_width = env(13.0);
    CHECK(at_width * at_width == doctest::Approx(std::exp(-2.0)));
  }

  SUBCASE("sine_squared spans one period, width is the half-period") {
    PulseEnvelope env = PulseEnvelope::sine_squared(1.0, 5.0, 2.0);
    CHECK(env(5.0) == doctest::Approx(1.0));
    CHECK(env(4.0) == doctest::Approx(0.5));
    CHECK(env(3.0) == doctest::Approx(0.0));
    CHECK(env(2.9) == 0.0);
    CHECK(env(7.1) == 0.0);
    const auto breaks = env.breakpoints();
    CHECK(std::count(breaks.begin(), breaks.end(), 3.0) >= 1);
    CHECK(std::count(breaks.begin(), breaks.end(), 7.0) >= 1);
  }

  SUBCASE("peak outside [0, 1] is rejected at generator construction") {
    DynamicalScheme scheme = make_loss_scheme(2.0);
    LaserField l3;
    l3.laser_index = 3;
    l3.envelope.peak = 1.5;
    CHECK_THROWS_AS(LindbladGenerator(scheme, {l3}), ConfigError);
  }
}

TEST_CASE("dark state") {
  const Eigen::Vector2d equal = dark_state(1.0, 1.0);
  CHECK(equal[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(equal[1] == doctest::Approx(-1.0 / std::sqrt(2.0)));

  const Eigen::Vector2d limit = dark_state(1.0, 0.0);
  CHECK(std::abs(limit[1]) == doctest::Approx(1.0));
  CHECK(limit[0] == doctest::Approx(0.0));

  // the measured Cs2 line-strength pair: normalize (5, -6)
  const Eigen::Vector2d cs2 = dark_state(6.0, 5.0);
  CHECK(cs2[0] == doctest::Approx(0.640184).epsilon(1e-5));
  CHECK(cs2[1] == doctest::Approx(-0.768221).epsilon(1e-5));

  CHECK_THROWS_AS(dark_state(0.0, 0.0), ConfigError);

  // annihilated by the Lambda Hamiltonian at two-photon resonance
  const DynamicalScheme lambda = make_lambda_scheme(2.0);
  std::vector<LaserField> lasers(2);
  lasers[0].laser_index = 3;
  lasers[0].normalized_rabi_2pi_khz = 6.0;
  lasers[0].intensity_mw_cm2 = 1.0;
  lasers[0].detuning_2pi_mhz = 0.8;
  lasers[1].laser_index = 4;
  lasers[1].normalized_rabi_2pi_khz = 5.0;
  lasers[1].intensity_mw_cm2 = 1.0;
  lasers[1].detuning_2pi_mhz = 0.8;
  const ComplexMatrix h = build_rotating_hamiltonian(lambda, lasers, 0.0);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
  const Eigen::Vector2d d = dark_state(6.0, 5.0);
  psi[0] = d[0];
  psi[2] = d[1];
  const Eigen::VectorXcd hpsi = h * psi;
  CHECK(std::abs(hpsi[1]) <= 1e-12);  // no amplitude reaches |4>
}

TEST_CASE("scheme validation rejects broken wiring") {
  DynamicalScheme scheme;
  scheme.levels = {{"a", 0.0, false}, {"b", 0.0, false}, {"sink", 0.0, true}};
  scheme.couplings = {{0, 1, 1}, {1, 0, 2}};  // same pair twice
  CHECK_THROWS_AS(scheme.validate(), ConfigError);

  scheme.couplings = {{0, 1, 1}, {0, 1, 1}};  // same laser twice
  CHECK_THROWS_AS(scheme.validate(), ConfigError);

  scheme.couplings = {{0, 2, 1}};  // coupled sink
  CHECK_THROWS_AS(scheme.validate(), ConfigError);

  scheme.couplings = {};
  scheme.levels[0].decay_rate_2pi_mhz = 1.0;
  scheme.levels[2].is_sink = false;  // decay without sink
  CHECK_THROWS_AS(scheme.validate(), ConfigError);

  // disconnected active levels
  DynamicalScheme split;
  split.levels = {{"a", 0.0, false}, {"b", 0.0, false}, {"c", 0.0, false}};
  split.couplings = {{0, 1, 1}};
  CHECK_THROWS_AS(split.validate(), ConfigError);
}
