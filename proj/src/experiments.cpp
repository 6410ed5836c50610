#include "mscheme/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

#include "mscheme/parallel.hpp"
#include "mscheme/units.hpp"

namespace mscheme {

int scan_thread_count() {
  if (const char* env = std::getenv("MSCHEME_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(scan_thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (std::thread& th : pool) th.join();
  for (int i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
}

ScanGrid ScanGrid::linspace(Axis axis, double lo, double hi, int n) {
  ScanGrid grid;
  grid.axis = axis;
  grid.points.resize(n);
  for (int i = 0; i < n; ++i)
    grid.points[i] = lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(n - 1);
  grid.validate();
  return grid;
}

void ScanGrid::validate() const {
  if (points.size() < 2) throw ConfigError("scan grid needs at least 2 points");
  for (size_t i = 1; i < points.size(); ++i)
    if (points[i] <= points[i - 1])
      throw ConfigError("scan grid must be strictly increasing");
}

const char* ScanGrid::axis_name(Axis axis) {
  switch (axis) {
    case Axis::detuning_delta3: return "detuning_delta3";
    case Axis::detuning_delta4: return "detuning_delta4";
    case Axis::time: return "time";
    case Axis::intensity: return "intensity";
  }
  return "?";
}

const char* ScanGrid::axis_unit(Axis axis) {
  switch (axis) {
    case Axis::detuning_delta3:
    case Axis::detuning_delta4: return "2pi_mhz";
    case Axis::time: return "us";
    case Axis::intensity: return "mw_cm2";
  }
  return "?";
}

namespace {

// Runs one propagation per grid point; any failure is reported with the
// offending grid value.
template <typename PointFn>
std::vector<double> scan_points(const ScanGrid& grid, const char* name,
                                PointFn&& fn) {
  const int n = static_cast<int>(grid.points.size());
  std::vector<double> out(n, 0.0);
  try {
    parallel_for(n, [&](int i) { out[i] = fn(grid.points[i]); });
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw NumericalError(std::string(name) + ": " + e.what());
  }
  return out;
}

}  // namespace

Spectrum loss_spectrum(const ScanGrid& delta3_grid_2pi_mhz,
                       double intensity_mw_cm2, double wait_us,
                       double gamma_2pi_mhz, double omega_norm_2pi_khz) {
  delta3_grid_2pi_mhz.validate();
  if (delta3_grid_2pi_mhz.axis != ScanGrid::Axis::detuning_delta3)
    throw ConfigError("loss_spectrum expects a detuning_delta3 grid");
  if (wait_us <= 0.0) throw ConfigError("loss_spectrum: wait must be > 0");

  const DynamicalScheme scheme = make_loss_scheme(gamma_2pi_mhz);
  Spectrum spectrum;
  spectrum.grid = delta3_grid_2pi_mhz;
  spectrum.survival = scan_points(
      delta3_grid_2pi_mhz, "loss_spectrum", [&](double delta3) {
        LaserField l3;
        l3.laser_index = 3;
        l3.detuning_2pi_mhz = delta3;
        l3.normalized_rabi_2pi_khz = omega_norm_2pi_khz;
        l3.intensity_mw_cm2 = intensity_mw_cm2;
        try {
          Trajectory traj =
              propagate(basis_density(0, scheme.dimension()), scheme, {l3},
                        0.0, wait_us, std::vector<double>{wait_us});
          return traj.final_population(0);
        } catch (const IntegrationError& e) {
          throw NumericalError("propagation failed at delta3 = " +
                               std::to_string(delta3) + " 2pi MHz: " + e.what());
        }
      });
  spectrum.metadata = {{"experiment", "loss_spectrum"},
                       {"intensity_mw_cm2", intensity_mw_cm2},
                       {"wait_us", wait_us},
                       {"gamma_2pi_mhz", gamma_2pi_mhz},
                       {"omega_norm_2pi_khz", omega_norm_2pi_khz}};
  return spectrum;
}

Spectrum decay_curve(double intensity_mw_cm2, const ScanGrid& time_grid_us,
                     double gamma_2pi_mhz, double omega_norm_2pi_khz) {
  time_grid_us.validate();
  if (time_grid_us.axis != ScanGrid::Axis::time)
    throw ConfigError("decay_curve expects a time grid");
  if (time_grid_us.points.front() < 0.0)
    throw ConfigError("decay_curve: negative times");

  const DynamicalScheme scheme = make_loss_scheme(gamma_2pi_mhz);
  LaserField l3;
  l3.laser_index = 3;
  l3.detuning_2pi_mhz = 0.0;  // on resonance
  l3.normalized_rabi_2pi_khz = omega_norm_2pi_khz;
  l3.intensity_mw_cm2 = intensity_mw_cm2;

  // one trajectory, sampled on the requested grid
  const std::vector<double>& samples = time_grid_us.points;
  Trajectory traj = propagate(basis_density(0, scheme.dimension()), scheme,
                              {l3}, 0.0, samples.back(), samples);

  Spectrum spectrum;
  spectrum.grid = time_grid_us;
  spectrum.survival.resize(samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    spectrum.survival[i] = traj.populations(0, i);
  spectrum.metadata = {{"experiment", "decay_curve"},
                       {"intensity_mw_cm2", intensity_mw_cm2},
                       {"gamma_2pi_mhz", gamma_2pi_mhz},
                       {"omega_norm_2pi_khz", omega_norm_2pi_khz}};
  return spectrum;
}

Spectrum dark_resonance_scan(const ScanGrid& delta3_grid_2pi_mhz,
                             double delta4_2pi_mhz, double omega3_2pi_khz,
                             double omega4_2pi_khz, double gamma_2pi_mhz,
                             double linewidth3_2pi_khz,
                             double linewidth4_2pi_khz, double wait_us) {
  delta3_grid_2pi_mhz.validate();
  if (delta3_grid_2pi_mhz.axis != ScanGrid::Axis::detuning_delta3)
    throw ConfigError("dark_resonance_scan expects a detuning_delta3 grid");
  if (wait_us <= 0.0) throw ConfigError("dark_resonance_scan: wait must be > 0");

  const DynamicalScheme scheme = make_lambda_scheme(gamma_2pi_mhz);
  Spectrum spectrum;
  spectrum.grid = delta3_grid_2pi_mhz;
  spectrum.survival = scan_points(
      delta3_grid_2pi_mhz, "dark_resonance_scan", [&](double delta3) {
        LaserField l3;
        l3.laser_index = 3;
        l3.detuning_2pi_mhz = delta3;
        l3.normalized_rabi_2pi_khz = omega3_2pi_khz;
        l3.intensity_mw_cm2 = 1.0;
        l3.linewidth_2pi_khz = linewidth3_2pi_khz;
        LaserField l4;
        l4.laser_index = 4;
        l4.detuning_2pi_mhz = delta4_2pi_mhz;
        l4.normalized_rabi_2pi_khz = omega4_2pi_khz;
        l4.intensity_mw_cm2 = 1.0;
        l4.linewidth_2pi_khz = linewidth4_2pi_khz;
        try {
          Trajectory traj =
              propagate(basis_density(0, scheme.dimension()), scheme, {l3, l4},
                        0.0, wait_us, std::vector<double>{wait_us});
          return traj.final_population(0);
        } catch (const IntegrationError& e) {
          throw NumericalError("propagation failed at delta3 = " +
                               std::to_string(delta3) + " 2pi MHz: " + e.what());
        }
      });
  spectrum.metadata = {{"experiment", "dark_resonance_scan"},
                       {"delta4_2pi_mhz", delta4_2pi_mhz},
                       {"omega3_2pi_khz", omega3_2pi_khz},
                       {"omega4_2pi_khz", omega4_2pi_khz},
                       {"gamma_2pi_mhz", gamma_2pi_mhz},
                       {"linewidth3_2pi_khz", linewidth3_2pi_khz},
                       {"linewidth4_2pi_khz", linewidth4_2pi_khz},
                       {"wait_us", wait_us}};
  return spectrum;
}

void StirapConfig::validate() const {
  if (pulse_width_us <= 0.0 || pulse_delay_us <= 0.0)
    throw ConfigError("stirap: pulse width and delay must be > 0");
  if (omega_peak1_2pi_mhz < 0.0 || omega_peak2_2pi_mhz < 0.0)
    throw ConfigError("stirap: peak Rabi frequencies must be >= 0");
  if (pulse_delay_us >= 2.0 * pulse_width_us)
    std::cerr << "mscheme: warning: STIRAP pulses barely overlap "
                 "(delay >= 2 width); simulating anyway\n";
}

namespace {

// Gaussian tails are clipped four widths out, where the envelope is
// below 1.2e-7.
constexpr double kPulsePadWidths = 4.0;

struct StirapPulseTiming {
  double stokes_center, pump_center, t_end;
};

StirapPulseTiming forward_timing(const StirapConfig& c) {
  const double t0 = kPulsePadWidths * c.pulse_width_us;
  return {t0, t0 + c.pulse_delay_us,
          t0 + c.pulse_delay_us + kPulsePadWidths * c.pulse_width_us};
}

std::vector<LaserField> stirap_fields(const StirapConfig& c,
                                      double pump_center, double stokes_center,
                                      double t_end) {
  LaserField l1;  // pump: |1> - |2>
  l1.laser_index = 1;
  l1.detuning_2pi_mhz = c.delta1_2pi_mhz;
  l1.normalized_rabi_2pi_khz = 1e3 * c.omega_peak1_2pi_mhz;
  l1.intensity_mw_cm2 = 1.0;
  l1.linewidth_2pi_khz = c.linewidth1_2pi_khz;
  l1.envelope =
      PulseEnvelope::gaussian(1.0, pump_center, c.pulse_width_us, 0.0, t_end);
  LaserField l2 = l1;  // Stokes: |2> - |3>
  l2.laser_index = 2;
  l2.detuning_2pi_mhz = c.delta2_2pi_mhz;
  l2.normalized_rabi_2pi_khz = 1e3 * c.omega_peak2_2pi_mhz;
  l2.linewidth_2pi_khz = c.linewidth2_2pi_khz;
  l2.envelope =
      PulseEnvelope::gaussian(1.0, stokes_center, c.pulse_width_us, 0.0, t_end);
  return {l1, l2};
}

}  // namespace

EfficiencyResult simulate_stirap(const StirapConfig& config) {
  config.validate();
  const DynamicalScheme scheme = make_stirap_scheme(config.excited_decay_2pi_mhz);
  const StirapPulseTiming timing = forward_timing(config);
  const std::vector<LaserField> lasers =
      stirap_fields(config, timing.pump_center, timing.stokes_center,
                    timing.t_end);
  Trajectory traj =
      propagate(basis_density(0, scheme.dimension()), scheme, lasers, 0.0,
                timing.t_end, config.trajectory_samples);
  EfficiencyResult result;
  result.trajectory = std::move(traj);
  result.efficiency = result.trajectory.final_population(2);
  return result;
}

RoundTripResult double_stirap_roundtrip(const StirapConfig& config,
                                        double wait_us,
                                        double hold_loss_rate_per_us) {
  config.validate();
  if (wait_us < 0.0) throw ConfigError("roundtrip: wait must be >= 0");
  if (hold_loss_rate_per_us < 0.0)
    throw ConfigError("roundtrip: hold loss rate must be >= 0");

  const DynamicalScheme scheme = make_stirap_scheme(config.excited_decay_2pi_mhz);
  const int dim = scheme.dimension();
  const StirapPulseTiming fwd = forward_timing(config);

  RoundTripResult result;
  Trajectory forward =
      propagate(basis_density(0, dim), scheme, stirap_fields(
                    config, fwd.pump_center, fwd.stokes_center, fwd.t_end),
                0.0, fwd.t_end, config.trajectory_samples);
  result.forward_efficiency = forward.final_population(2);

  // hold: fields off; optional resonant loss on |3> modeled as extra decay
  DynamicalScheme hold_scheme = scheme;
  hold_scheme.levels[2].decay_rate_2pi_mhz =
      hold_loss_rate_per_us / two_pi;  // rate in 1/us -> 2pi*MHz
  ComplexMatrix rho = forward.states.back();
  Trajectory hold;
  const double hold_end = fwd.t_end + wait_us;
  if (wait_us > 0.0) {
    LaserField l1, l2;
    l1.laser_index = 1;
    l2.laser_index = 2;
    l1.envelope = PulseEnvelope::constant(0.0);
    l2.envelope = PulseEnvelope::constant(0.0);
    hold = propagate(rho, hold_scheme, {l1, l2}, fwd.t_end, hold_end,
                     std::max(2, config.trajectory_samples / 4));
    rho = hold.states.back();
  }

  // reverse: |3> -> |1>, so L1 now plays the counterintuitive (first) role
  const double rev_first = hold_end + kPulsePadWidths * config.pulse_width_us;
  const double rev_second = rev_first + config.pulse_delay_us;
  const double rev_end = rev_second + kPulsePadWidths * config.pulse_width_us;
  Trajectory reverse = propagate(
      rho, scheme,
      stirap_fields(config, /*pump_center=*/rev_first,
                    /*stokes_center=*/rev_second, rev_end),
      hold_end, rev_end, config.trajectory_samples);
  result.survival = reverse.final_population(0);

  // stitch trajectories for export
  Trajectory& full = result.trajectory;
  full.level_labels = forward.level_labels;
  auto append = [&full](const Trajectory& part, bool skip_first) {
    for (size_t i = skip_first ? 1 : 0; i < part.times_us.size(); ++i) {
      full.times_us.push_back(part.times_us[i]);
      full.states.push_back(part.states[i]);
    }
  };
  append(forward, false);
  if (wait_us > 0.0) append(hold, true);
  append(reverse, true);
  full.populations.resize(dim, full.times_us.size());
  for (size_t s = 0; s < full.states.size(); ++s)
    for (int j = 0; j < dim; ++j)
      full.populations(j, s) = full.states[s](j, j).real();
  return result;
}

}  // namespace mscheme
