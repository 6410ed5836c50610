#ifndef MSCHEME_LEVELS_HPP
#define MSCHEME_LEVELS_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mscheme {

//
// Spectroscopic level records and the Cs2 0u+ level table: wavelength and
// energy conversions, rotational constants from J=1/J=3 pairs, and the
// self-consistency checks on the shipped dataset.
//
// All level energies are wavenumbers (cm^-1) above X(v=0, J=0).
// Wavelengths are vacuum wavelengths in nm; no air-index correction is
// applied anywhere.
//

enum class ElectronicState { x_ground, coupled_0u_plus };

// "A(7)" / "b(52)": dominant electronic character plus the running index
// within that progression.
struct LevelCharacter {
  char state = '?';  // 'A' or 'b'
  int progression = 0;
};

struct SpectroscopicLevel {
  ElectronicState electronic_state = ElectronicState::x_ground;
  int v = 0;
  int j = 0;
  std::optional<LevelCharacter> character;
  double energy_cm = 0.0;
  double energy_uncertainty_cm = 0.0;
  // false for table rows that were never searched for experimentally;
  // their energies come from the coupled-channel calculations.
  bool observed = true;

  std::string row_id() const;
};

// Endpoints are indices into LevelTable::levels.
struct TransitionRecord {
  int lower = -1;
  int upper = -1;
  double wavelength_nm = 0.0;
  double wavelength_uncertainty_nm = 0.0;
};

struct LevelTable {
  std::vector<SpectroscopicLevel> levels;
  std::vector<TransitionRecord> excitations;    // from X(v=73, J=2)
  std::vector<TransitionRecord> deexcitations;  // to X(v=0, J=0)

  // Term value of X(v=73, J=2), extracted at load time as the median of
  // (energy_cm - 1e7/lambda_exc) over all rows carrying both quantities.
  double reference_offset_cm = 0.0;
  // max - min of the per-row offsets; flagged if > 0.02 cm^-1.
  double reference_offset_spread_cm = 0.0;
  bool reference_consistent = true;

  int index_x00 = -1;   // X(v=0, J=0)
  int index_x732 = -1;  // X(v=73, J=2)

  // Loads the CSV format
  //   state,v,J,character,energy_cm,exc_wavelength_nm,deexc_wavelength_nm,observed
  // Empty fields mean "not measured".
  static LevelTable load_csv(const std::string& path);
};

// nu[cm^-1] = 1e7 / lambda[nm]. Throws ConfigError for lambda <= 0.
double wavelength_to_wavenumber(double lambda_nm);
double wavenumber_to_wavelength(double nu_cm);

// Energy of the upper level given the excitation wavelength and the lower
// level's term value.
double energy_from_excitation(double lambda_exc_nm, double lower_energy_cm);

// Rigid-rotor B from a J=1 / J=3 pair: (E_J3 - E_J1) / 10.
double rotational_constant(double e_j1_cm, double e_j3_cm);

struct ValidationEntry {
  std::string check;
  std::string row;
  double residual = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  bool all_pass() const;
};

// Checks, per row: de-excitation wavelengths against level energies
// (|1e7/lambda - E| <= 0.012 cm^-1), J=1/J=3 splittings within
// [0.085, 0.115] cm^-1, and per-row reference offsets within 0.02 cm^-1
// of the table median. Failures are report entries, never exceptions.
ValidationReport validate_table(const LevelTable& table);

// JSON array of {check, row, residual, pass}.
nlohmann::json to_json(const ValidationReport& report);

}  // namespace mscheme

#endif
