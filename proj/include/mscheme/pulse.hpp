#ifndef MSCHEME_PULSE_HPP
#define MSCHEME_PULSE_HPP

#include <limits>
#include <vector>

namespace mscheme {

// Dimensionless drive envelope in [0, 1], multiplying sqrt(intensity).
// Zero outside [t_on_us, t_off_us].
//
// gaussian:     peak * exp(-((t - center)/width)^2); width is the 1/e^2
//               half-width of the squared envelope (the intensity).
// sine_squared: peak * cos^2(pi (t - center) / (2 width)) on
//               [center - width, center + width]; width is the half-period.
struct PulseEnvelope {
  enum class Shape { constant, gaussian, sine_squared };

  Shape shape = Shape::constant;
  double peak = 1.0;
  double center_time_us = 0.0;
  double width_us = 1.0;
  double t_on_us = -std::numeric_limits<double>::infinity();
  double t_off_us = std::numeric_limits<double>::infinity();

  double operator()(double t_us) const;

  // Times where the envelope has a kink or jump; the integrator never
  // steps across these.
  std::vector<double> breakpoints() const;

  static PulseEnvelope constant(double peak = 1.0);
  static PulseEnvelope gaussian(double peak, double center_us, double width_us,
                                double t_on_us, double t_off_us);
  static PulseEnvelope sine_squared(double peak, double center_us,
                                    double width_us);
};

}  // namespace mscheme

#endif
