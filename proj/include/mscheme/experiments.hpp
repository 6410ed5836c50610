#ifndef MSCHEME_EXPERIMENTS_HPP
#define MSCHEME_EXPERIMENTS_HPP

#include <json.hpp>
#include <vector>

#include "mscheme/propagate.hpp"
#include "mscheme/scheme.hpp"

namespace mscheme {

//
// Scan drivers for the three measurement types: one-color loss
// spectroscopy, two-color dark-resonance spectroscopy, and (double-)STIRAP
// transfer. Grid points are evaluated independently and in parallel;
// assembly is ordered by grid index.
//

struct ScanGrid {
  enum class Axis { detuning_delta3, detuning_delta4, time, intensity };

  Axis axis = Axis::detuning_delta3;
  // 2pi*MHz for detunings, us for time, mW/cm^2 for intensity;
  // strictly increasing, at least two points
  std::vector<double> points;

  static ScanGrid linspace(Axis axis, double lo, double hi, int n);
  void validate() const;
  static const char* axis_name(Axis axis);
  static const char* axis_unit(Axis axis);
};

struct Spectrum {
  ScanGrid grid;
  std::vector<double> survival;
  std::vector<double> survival_err;  // optional, empty when noiseless
  nlohmann::json metadata;           // generator parameter snapshot
};

// Two-level {|3>,|4>}+sink loss line: survival in |3> after `wait` versus
// the detuning of L3.
Spectrum loss_spectrum(const ScanGrid& delta3_grid_2pi_mhz,
                       double intensity_mw_cm2, double wait_us,
                       double gamma_2pi_mhz, double omega_norm_2pi_khz);

// On-resonance survival versus irradiation time.
Spectrum decay_curve(double intensity_mw_cm2, const ScanGrid& time_grid_us,
                     double gamma_2pi_mhz, double omega_norm_2pi_khz);

// Three-level Lambda + sink scan of Delta3 at fixed Delta4. omega3/omega4
// are the effective Rabi frequencies in 2pi*kHz. A broad loss dip with a
// narrow survival revival at two-photon resonance Delta3 = Delta4.
Spectrum dark_resonance_scan(const ScanGrid& delta3_grid_2pi_mhz,
                             double delta4_2pi_mhz, double omega3_2pi_khz,
                             double omega4_2pi_khz, double gamma_2pi_mhz,
                             double linewidth3_2pi_khz,
                             double linewidth4_2pi_khz, double wait_us);

struct StirapConfig {
  double omega_peak1_2pi_mhz = 3.0;
  double omega_peak2_2pi_mhz = 6.0;
  double pulse_width_us = 10.0;  // Gaussian 1/e^2 half-width
  double pulse_delay_us = 10.0;  // L2 precedes L1 by this much
  double delta1_2pi_mhz = 0.0;
  double delta2_2pi_mhz = 0.0;
  double excited_decay_2pi_mhz = 2.0;
  double linewidth1_2pi_khz = 0.0;
  double linewidth2_2pi_khz = 0.0;
  int trajectory_samples = 201;

  void validate() const;
};

struct EfficiencyResult {
  double efficiency = 0.0;  // final |3> population
  Trajectory trajectory;
};

// |1> -> |3> transfer with counterintuitive Gaussian pulses (L2 first).
// Warns on stderr when the pulses do not overlap but still simulates.
EfficiencyResult simulate_stirap(const StirapConfig& config);

// Forward transfer, hold (optionally with extra loss on |3> at
// hold_loss_rate_per_us), reverse transfer; returns the trajectory of the
// full sequence. Survival is the final |1> population.
struct RoundTripResult {
  double survival = 0.0;
  double forward_efficiency = 0.0;
  Trajectory trajectory;
};
RoundTripResult double_stirap_roundtrip(const StirapConfig& config,
                                        double wait_us,
                                        double hold_loss_rate_per_us = 0.0);

}  // namespace mscheme

#endif
