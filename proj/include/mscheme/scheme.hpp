#ifndef MSCHEME_SCHEME_HPP
#define MSCHEME_SCHEME_HPP

#include <string>
#include <vector>

#include "mscheme/pulse.hpp"

namespace mscheme {

//
// Laser-coupled level chains: the 5-level distorted M configuration and its
// sub-schemes. Levels are listed in chain order; the first non-sink level is
// the root of the rotating frame. Decay routes population to an explicit
// sink level so that the trace stays conserved and survival is
// 1 - sink population.
//

struct SchemeLevel {
  std::string label;
  double decay_rate_2pi_mhz = 0.0;
  bool is_sink = false;
};

// One laser drives exactly one level pair.
struct Coupling {
  int lower = -1;
  int upper = -1;
  int laser_index = 0;
};

struct DynamicalScheme {
  std::vector<SchemeLevel> levels;
  std::vector<Coupling> couplings;

  int dimension() const { return static_cast<int>(levels.size()); }
  int sink_index() const;  // -1 when absent
  int root_index() const;  // first non-sink level

  // Throws ConfigError unless the coupling graph is a connected acyclic
  // chain/M over the non-sink levels, each laser drives exactly one pair,
  // sinks are uncoupled and decay-free, and decay implies a single sink.
  void validate() const;

  int level_index(const std::string& label) const;
};

struct LaserField {
  int laser_index = 0;
  double detuning_2pi_mhz = 0.0;        // red detuning = negative
  double normalized_rabi_2pi_khz = 0.0; // per sqrt(mW/cm^2)
  double intensity_mw_cm2 = 0.0;
  double linewidth_2pi_khz = 0.0;       // Markovian phase-diffusion rate
  PulseEnvelope envelope;

  // normalized_rabi * sqrt(intensity) * envelope(t), in 2pi*kHz
  double rabi_2pi_khz(double t_us) const;
};

// normalized_rabi * sqrt(intensity); throws ConfigError on negative input.
double rabi_from_intensity(double normalized_rabi_2pi_khz,
                           double intensity_mw_cm2);

// Scheme factories. Level order follows the M-chain numbering; a sink is
// always appended last.
DynamicalScheme make_loss_scheme(double gamma_2pi_mhz);    // {|3>, |4>, sink}
DynamicalScheme make_lambda_scheme(double gamma_2pi_mhz);  // {|3>, |4>, |5>, sink}
DynamicalScheme make_stirap_scheme(double gamma_2pi_mhz);  // {|1>, |2>, |3>, sink}
// {|1>..|5>, sink} with decay on both excited levels |2> and |4>
DynamicalScheme make_m_scheme(double gamma2_2pi_mhz, double gamma4_2pi_mhz);

}  // namespace mscheme

#endif
