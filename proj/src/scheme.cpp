#include "mscheme/scheme.hpp"

#include <cmath>
#include <set>

#include "mscheme/errors.hpp"

namespace mscheme {

double PulseEnvelope::operator()(double t_us) const {
  if (t_us < t_on_us || t_us > t_off_us) return 0.0;
  switch (shape) {
    case Shape::constant:
      return peak;
    case Shape::gaussian: {
      const double x = (t_us - center_time_us) / width_us;
      return peak * std::exp(-x * x);
    }
    case Shape::sine_squared: {
      const double x = t_us - center_time_us;
      if (std::abs(x) >= width_us) return 0.0;
      const double c = std::cos(0.5 * M_PI * x / width_us);
      return peak * c * c;
    }
  }
  return 0.0;
}

std::vector<double> PulseEnvelope::breakpoints() const {
  std::vector<double> pts;
  if (std::isfinite(t_on_us)) pts.push_back(t_on_us);
  if (std::isfinite(t_off_us)) pts.push_back(t_off_us);
  if (shape == Shape::sine_squared) {
    pts.push_back(center_time_us - width_us);
    pts.push_back(center_time_us + width_us);
  }
  return pts;
}

PulseEnvelope PulseEnvelope::constant(double peak) {
  PulseEnvelope env;
  env.shape = Shape::constant;
  env.peak = peak;
  return env;
}

PulseEnvelope PulseEnvelope::gaussian(double peak, double center_us,
                                      double width_us, double t_on_us,
                                      double t_off_us) {
  PulseEnvelope env;
  env.shape = Shape::gaussian;
  env.peak = peak;
  env.center_time_us = center_us;
  env.width_us = width_us;
  env.t_on_us = t_on_us;
  env.t_off_us = t_off_us;
  return env;
}

PulseEnvelope PulseEnvelope::sine_squared(double peak, double center_us,
                                          double width_us) {
  PulseEnvelope env;
  env.shape = Shape::sine_squared;
  env.peak = peak;
  env.center_time_us = center_us;
  env.width_us = width_us;
  env.t_on_us = center_us - width_us;
  env.t_off_us = center_us + width_us;
  return env;
}

int DynamicalScheme::sink_index() const {
  for (int i = 0; i < dimension(); ++i)
    if (levels[i].is_sink) return i;
  return -1;
}

int DynamicalScheme::root_index() const {
  for (int i = 0; i < dimension(); ++i)
    if (!levels[i].is_sink) return i;
  throw ConfigError("scheme has no non-sink level");
}

int DynamicalScheme::level_index(const std::string& label) const {
  for (int i = 0; i < dimension(); ++i)
    if (levels[i].label == label) return i;
  throw ConfigError("scheme has no level labelled '" + label + "'");
}

void DynamicalScheme::validate() const {
  const int n = dimension();
  if (n < 1) throw ConfigError("scheme needs at least one level");

  int sinks = 0;
  bool any_decay = false;
  for (const SchemeLevel& level : levels) {
    if (level.decay_rate_2pi_mhz < 0.0)
      throw ConfigError("negative decay rate on level " + level.label);
    if (level.is_sink) {
      ++sinks;
      if (level.decay_rate_2pi_mhz != 0.0)
        throw ConfigError("sink level must not decay");
    }
    if (level.decay_rate_2pi_mhz > 0.0) any_decay = true;
  }
  if (any_decay && sinks != 1)
    throw ConfigError("decay requires exactly one sink level");
  if (sinks > 1) throw ConfigError("at most one sink level is supported");

  std::set<int> laser_indices;
  std::set<std::pair<int, int>> pairs;
  std::vector<int> degree(n, 0);
  for (const Coupling& c : couplings) {
    if (c.lower < 0 || c.lower >= n || c.upper < 0 || c.upper >= n ||
        c.lower == c.upper)
      throw ConfigError("coupling references an invalid level pair");
    if (levels[c.lower].is_sink || levels[c.upper].is_sink)
      throw ConfigError("sink levels cannot be laser-coupled");
    if (!laser_indices.insert(c.laser_index).second)
      throw ConfigError("laser " + std::to_string(c.laser_index) +
                        " drives more than one pair");
    auto pair = std::minmax(c.lower, c.upper);
    if (!pairs.insert({pair.first, pair.second}).second)
      throw ConfigError("level pair driven by more than one laser");
    ++degree[c.lower];
    ++degree[c.upper];
  }

  // connected and acyclic over the non-sink levels
  int active = 0;
  for (const SchemeLevel& level : levels)
    if (!level.is_sink) ++active;
  if (active > 1) {
    if (static_cast<int>(couplings.size()) != active - 1)
      throw ConfigError("coupling graph must be an acyclic chain/M");
    std::vector<int> component(n, -1);
    std::vector<int> stack = {root_index()};
    component[root_index()] = 0;
    while (!stack.empty()) {
      int at = stack.back();
      stack.pop_back();
      for (const Coupling& c : couplings) {
        int other = -1;
        if (c.lower == at) other = c.upper;
        if (c.upper == at) other = c.lower;
        if (other >= 0 && component[other] < 0) {
          component[other] = 0;
          stack.push_back(other);
        }
      }
    }
    for (int i = 0; i < n; ++i)
      if (!levels[i].is_sink && component[i] < 0)
        throw ConfigError("coupling graph is not connected");
  }
}

double LaserField::rabi_2pi_khz(double t_us) const {
  return rabi_from_intensity(normalized_rabi_2pi_khz, intensity_mw_cm2) *
         envelope(t_us);
}

double rabi_from_intensity(double normalized_rabi_2pi_khz,
                           double intensity_mw_cm2) {
  if (normalized_rabi_2pi_khz < 0.0 || intensity_mw_cm2 < 0.0)
    throw ConfigError("rabi_from_intensity: arguments must be >= 0");
  return normalized_rabi_2pi_khz * std::sqrt(intensity_mw_cm2);
}

DynamicalScheme make_loss_scheme(double gamma_2pi_mhz) {
  DynamicalScheme s;
  s.levels = {{"3", 0.0, false}, {"4", gamma_2pi_mhz, false}, {"sink", 0.0, true}};
  s.couplings = {{0, 1, 3}};
  s.validate();
  return s;
}

DynamicalScheme make_lambda_scheme(double gamma_2pi_mhz) {
  DynamicalScheme s;
  s.levels = {{"3", 0.0, false},
              {"4", gamma_2pi_mhz, false},
              {"5", 0.0, false},
              {"sink", 0.0, true}};
  s.couplings = {{0, 1, 3}, {2, 1, 4}};
  s.validate();
  return s;
}

DynamicalScheme make_stirap_scheme(double gamma_2pi_mhz) {
  DynamicalScheme s;
  s.levels = {{"1", 0.0, false},
              {"2", gamma_2pi_mhz, false},
              {"3", 0.0, false},
              {"sink", 0.0, true}};
  s.couplings = {{0, 1, 1}, {2, 1, 2}};
  s.validate();
  return s;
}

DynamicalScheme make_m_scheme(double gamma2_2pi_mhz, double gamma4_2pi_mhz) {
  DynamicalScheme s;
  s.levels = {{"1", 0.0, false},         {"2", gamma2_2pi_mhz, false},
              {"3", 0.0, false},         {"4", gamma4_2pi_mhz, false},
              {"5", 0.0, false},         {"sink", 0.0, true}};
  s.couplings = {{0, 1, 1}, {2, 1, 2}, {2, 3, 3}, {4, 3, 4}};
  s.validate();
  return s;
}

}  // namespace mscheme
