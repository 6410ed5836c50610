#ifndef MSCHEME_UNITS_HPP
#define MSCHEME_UNITS_HPP

// Unit conventions used throughout:
//   - time in microseconds (us)
//   - angular frequencies inside dynamics matrices in rad/us
//   - public parameters carry their unit in the name (gamma_2pi_mhz,
//     linewidth_2pi_khz, wait_us, intensity_mw_cm2, ...)
//   - spectroscopic energies in wavenumbers (cm^-1), lengths in Angstrom

namespace mscheme {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// "x in units of 2pi*MHz" -> rad/us  (1 MHz = 1/us)
constexpr double rad_per_us_from_2pi_mhz(double x) { return two_pi * x; }
constexpr double rad_per_us_from_2pi_khz(double x) { return two_pi * 1e-3 * x; }
constexpr double to_2pi_mhz(double rad_per_us) { return rad_per_us / two_pi; }

// SI constants (CODATA 2018; h is exact by definition)
inline constexpr double planck_h_js = 6.62607015e-34;
inline constexpr double speed_of_light_m_s = 299792458.0;
inline constexpr double atomic_mass_kg = 1.66053906660e-27;
inline constexpr double hbar_js = planck_h_js / two_pi;

// 1 cm^-1 expressed as a frequency in MHz (c * 100 / 1e6)
inline constexpr double mhz_per_wavenumber = speed_of_light_m_s * 1e-4;

// 1 cm^-1 in joule
inline constexpr double joule_per_wavenumber =
    planck_h_js * speed_of_light_m_s * 100.0;

// hbar^2 / (2 * 1 amu * 1 A^2) in cm^-1; divide by the reduced mass in amu
// to get the radial kinetic-energy scale of a diatomic.
inline constexpr double kinetic_scale_cm_amu_angstrom2 =
    hbar_js * hbar_js / (2.0 * atomic_mass_kg * 1e-20) / joule_per_wavenumber;

}  // namespace mscheme

#endif
