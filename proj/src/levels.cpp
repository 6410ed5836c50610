#include "mscheme/levels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mscheme/csv.hpp"
#include "mscheme/errors.hpp"

namespace mscheme {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  CsvFile file;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (file.header.empty()) {
      file.header = split_csv_line(line);
    } else {
      file.rows.push_back({line_number, split_csv_line(line)});
    }
  }
  return file;
}

double wavelength_to_wavenumber(double lambda_nm) {
  if (lambda_nm <= 0.0)
    throw ConfigError("wavelength_to_wavenumber: wavelength must be positive");
  return 1e7 / lambda_nm;
}

double wavenumber_to_wavelength(double nu_cm) {
  if (nu_cm <= 0.0)
    throw ConfigError("wavenumber_to_wavelength: wavenumber must be positive");
  return 1e7 / nu_cm;
}

double energy_from_excitation(double lambda_exc_nm, double lower_energy_cm) {
  return lower_energy_cm + wavelength_to_wavenumber(lambda_exc_nm);
}

double rotational_constant(double e_j1_cm, double e_j3_cm) {
  if (e_j3_cm <= e_j1_cm)
    throw ConfigError("rotational_constant: E(J=3) must exceed E(J=1)");
  // J(J+1): 3*4 - 1*2 = 10
  return (e_j3_cm - e_j1_cm) / 10.0;
}

std::string SpectroscopicLevel::row_id() const {
  std::string state =
      electronic_state == ElectronicState::x_ground ? "X" : "0u+";
  std::string id = state + " v=" + std::to_string(v) + " J=" + std::to_string(j);
  if (character) {
    id += " ";
    id += character->state;
    id += "(" + std::to_string(character->progression) + ")";
  }
  return id;
}

namespace {

int parse_int(const std::string& field, const std::string& what, long line) {
  try {
    size_t pos = 0;
    int value = std::stoi(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("level table line " + std::to_string(line) +
                      ": cannot parse " + what + " value '" + field + "'");
  }
}

std::optional<double> parse_optional(const std::string& field,
                                     const std::string& what, long line) {
  if (field.empty()) return std::nullopt;
  try {
    size_t pos = 0;
    double value = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("level table line " + std::to_string(line) +
                      ": cannot parse " + what + " value '" + field + "'");
  }
}

std::optional<LevelCharacter> parse_character(const std::string& field,
                                              long line) {
  if (field.empty()) return std::nullopt;
  if ((field[0] != 'A' && field[0] != 'b') || field.size() < 4 ||
      field[1] != '(' || field.back() != ')')
    throw ConfigError("level table line " + std::to_string(line) +
                      ": bad character tag '" + field + "' (expect A(n)/b(n))");
  LevelCharacter c;
  c.state = field[0];
  c.progression = parse_int(field.substr(2, field.size() - 3), "character index", line);
  return c;
}

}  // namespace

LevelTable LevelTable::load_csv(const std::string& path) {
  const CsvFile file = read_csv(path);
  const std::vector<std::string> expected = {
      "state", "v", "J", "character", "energy_cm",
      "exc_wavelength_nm", "deexc_wavelength_nm", "observed"};
  if (file.header != expected)
    throw ConfigError("level table " + path + ": unexpected header");

  LevelTable table;
  struct PendingRow {
    int level_index;
    std::optional<double> energy, exc, deexc;
  };
  std::vector<PendingRow> pending;

  for (const CsvRow& row : file.rows) {
    if (row.fields.size() != expected.size())
      throw ConfigError("level table line " + std::to_string(row.line_number) +
                        ": expected " + std::to_string(expected.size()) +
                        " fields");
    SpectroscopicLevel level;
    const std::string& state = row.fields[0];
    if (state == "X_ground")
      level.electronic_state = ElectronicState::x_ground;
    else if (state == "coupled_0u_plus")
      level.electronic_state = ElectronicState::coupled_0u_plus;
    else
      throw ConfigError("level table line " + std::to_string(row.line_number) +
                        ": unknown state '" + state + "'");
    level.v = parse_int(row.fields[1], "v", row.line_number);
    level.j = parse_int(row.fields[2], "J", row.line_number);
    level.character = parse_character(row.fields[3], row.line_number);
    level.observed = (row.fields[7] == "true" || row.fields[7] == "1");

    auto energy = parse_optional(row.fields[4], "energy_cm", row.line_number);
    auto exc = parse_optional(row.fields[5], "exc_wavelength_nm", row.line_number);
    auto deexc =
        parse_optional(row.fields[6], "deexc_wavelength_nm", row.line_number);

    if (level.j < 0)
      throw ConfigError("level table line " + std::to_string(row.line_number) +
                        ": J must be >= 0");
    // Observed rows obey the selection-rule parity: even J in the X state,
    // odd J in the excited 0u+ system. Unsearched rows are stored with the
    // published J=0 band origins and exempt from the parity check.
    if (level.observed) {
      const bool is_x = level.electronic_state == ElectronicState::x_ground;
      if (is_x && level.j % 2 != 0)
        throw ConfigError("level table line " + std::to_string(row.line_number) +
                          ": X-state rows must have even J");
      if (!is_x && level.j % 2 != 1)
        throw ConfigError("level table line " + std::to_string(row.line_number) +
                          ": observed 0u+ rows must have odd J");
    }

    level.energy_cm = energy.value_or(0.0);
    // Wavemeter accuracy for measured rows, coupled-channel model rms for
    // calculated rows.
    level.energy_uncertainty_cm = level.observed ? 0.011 : 0.02;

    const int index = static_cast<int>(table.levels.size());
    if (level.electronic_state == ElectronicState::x_ground) {
      if (level.v == 0 && level.j == 0) {
        if (energy.value_or(0.0) != 0.0)
          throw ConfigError("level table: X(v=0,J=0) must have energy 0");
        table.index_x00 = index;
      } else if (level.v == 73 && level.j == 2) {
        table.index_x732 = index;
      }
    }
    table.levels.push_back(level);
    pending.push_back({index, energy, exc, deexc});
  }

  if (table.index_x00 < 0)
    throw ConfigError("level table: missing X(v=0,J=0) reference row");
  if (table.index_x732 < 0)
    throw ConfigError("level table: missing X(v=73,J=2) reference row");

  // Extract the X(v=73,J=2) term value from all rows that carry both an
  // energy and an excitation wavelength, and check their mutual consistency.
  std::vector<double> offsets;
  for (const PendingRow& p : pending)
    if (p.energy && p.exc)
      offsets.push_back(*p.energy - wavelength_to_wavenumber(*p.exc));
  if (offsets.empty())
    throw ConfigError("level table: no row allows extracting the reference offset");
  std::sort(offsets.begin(), offsets.end());
  const size_t n = offsets.size();
  table.reference_offset_cm = n % 2 == 1
                                  ? offsets[n / 2]
                                  : 0.5 * (offsets[n / 2 - 1] + offsets[n / 2]);
  table.reference_offset_spread_cm = offsets.back() - offsets.front();
  table.reference_consistent = table.reference_offset_spread_cm <= 0.02;
  if (table.reference_offset_cm <= 0.0)
    throw ConfigError("level table: reference offset must be positive");
  table.levels[table.index_x732].energy_cm = table.reference_offset_cm;
  table.levels[table.index_x732].energy_uncertainty_cm = 0.001;

  for (const PendingRow& p : pending) {
    if (p.exc)
      table.excitations.push_back(
          {table.index_x732, p.level_index, *p.exc, 0.002});
    if (p.deexc)
      table.deexcitations.push_back(
          {table.index_x00, p.level_index, *p.deexc, 0.002});
  }
  for (const TransitionRecord& t : table.excitations)
    if (table.levels[t.upper].energy_cm <= table.levels[t.lower].energy_cm)
      throw ConfigError("level table: transition with non-increasing energy");
  return table;
}

bool ValidationReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const ValidationEntry& e) { return e.pass; });
}

ValidationReport validate_table(const LevelTable& table) {
  ValidationReport report;

  // De-excitation wavelengths against level energies. 0.012 cm^-1 =
  // 0.011 wavemeter + 0.001 from the X(v=73) reference energy.
  for (const TransitionRecord& t : table.deexcitations) {
    const SpectroscopicLevel& upper = table.levels[t.upper];
    ValidationEntry entry;
    entry.check = "deexcitation_energy";
    entry.row = upper.row_id();
    entry.residual =
        wavelength_to_wavenumber(t.wavelength_nm) - upper.energy_cm;
    entry.pass = std::abs(entry.residual) <= 0.012;
    report.entries.push_back(entry);
  }

  // J=1 / J=3 splitting for every v' carrying both rows.
  std::map<int, std::map<int, double>> by_v;
  for (const SpectroscopicLevel& level : table.levels)
    if (level.electronic_state == ElectronicState::coupled_0u_plus)
      by_v[level.v][level.j] = level.energy_cm;
  for (const auto& [v, js] : by_v) {
    auto j1 = js.find(1);
    auto j3 = js.find(3);
    if (j1 == js.end() || j3 == js.end()) continue;
    ValidationEntry entry;
    entry.check = "rotational_splitting";
    entry.row = "0u+ v=" + std::to_string(v);
    entry.residual = j3->second - j1->second;
    entry.pass = entry.residual >= 0.085 && entry.residual <= 0.115;
    report.entries.push_back(entry);
  }

  // Per-row reference offset against the table median.
  for (const TransitionRecord& t : table.excitations) {
    const SpectroscopicLevel& upper = table.levels[t.upper];
    ValidationEntry entry;
    entry.check = "reference_offset";
    entry.row = upper.row_id();
    entry.residual = upper.energy_cm -
                     wavelength_to_wavenumber(t.wavelength_nm) -
                     table.reference_offset_cm;
    entry.pass = std::abs(entry.residual) <= 0.02;
    report.entries.push_back(entry);
  }

  return report;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json array = nlohmann::json::array();
  for (const ValidationEntry& e : report.entries)
    array.push_back({{"check", e.check},
                     {"row", e.row},
                     {"residual", e.residual},
                     {"pass", e.pass}});
  return array;
}

}  // namespace mscheme
