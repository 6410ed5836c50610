#include "mscheme/io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "mscheme/csv.hpp"
#include "mscheme/dvr.hpp"
#include "mscheme/errors.hpp"
#include "mscheme/fitting.hpp"
#include "mscheme/levels.hpp"

namespace mscheme {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

//
// Config schema machinery. Each command owns a tree of typed keys with
// defaults; unknown keys are rejected with a nearest-key suggestion.
//

struct KeySchema;
using Schema = std::vector<std::pair<std::string, KeySchema>>;

struct KeySchema {
  enum class Kind { number, integer, boolean, string, grid, object };
  Kind kind = Kind::number;
  bool required = false;
  json default_value;  // null = no default
  Schema children;     // object members
  bool opaque = false; // object validated by the runner itself
};

KeySchema number_key(json def = nullptr) {
  KeySchema k;
  k.kind = KeySchema::Kind::number;
  k.default_value = std::move(def);
  return k;
}

KeySchema integer_key(json def = nullptr) {
  KeySchema k;
  k.kind = KeySchema::Kind::integer;
  k.default_value = std::move(def);
  return k;
}

KeySchema boolean_key(json def) {
  KeySchema k;
  k.kind = KeySchema::Kind::boolean;
  k.default_value = std::move(def);
  return k;
}

KeySchema string_key(bool required, json def = nullptr) {
  KeySchema k;
  k.kind = KeySchema::Kind::string;
  k.required = required;
  k.default_value = std::move(def);
  return k;
}

KeySchema grid_key(double lo, double hi, int points) {
  KeySchema k;
  k.kind = KeySchema::Kind::grid;
  k.default_value = {{"min", lo}, {"max", hi}, {"points", points}};
  return k;
}

KeySchema object_key(Schema children, bool required = false) {
  KeySchema k;
  k.kind = KeySchema::Kind::object;
  k.required = required;
  k.children = std::move(children);
  return k;
}

KeySchema opaque_object_key() {
  KeySchema k;
  k.kind = KeySchema::Kind::object;
  k.opaque = true;
  return k;
}

Schema stirap_schema() {
  return {
      {"omega_peak1_2pi_mhz", number_key(3.0)},
      {"omega_peak2_2pi_mhz", number_key(6.0)},
      {"pulse_width_us", number_key(10.0)},
      {"pulse_delay_us", number_key(10.0)},
      {"delta1_2pi_mhz", number_key(0.0)},
      {"delta2_2pi_mhz", number_key(0.0)},
      {"excited_decay_2pi_mhz", number_key(2.0)},
      {"linewidth1_2pi_khz", number_key(0.0)},
      {"linewidth2_2pi_khz", number_key(0.0)},
      {"trajectory_samples", integer_key(201)},
  };
}

Schema command_schema(const std::string& command) {
  Schema schema;
  if (command == "scan-loss") {
    schema = {
        {"delta3_grid_2pi_mhz", grid_key(-8.0, 8.0, 81)},
        {"intensity_mw_cm2", number_key(270.0)},
        {"wait_us", number_key(20.0)},
        {"gamma_2pi_mhz", number_key(2.0)},
        {"omega_norm_2pi_khz", number_key(6.0)},
    };
  } else if (command == "scan-decay") {
    schema = {
        {"time_grid_us", grid_key(0.0, 50.0, 26)},
        {"intensity_mw_cm2", number_key(270.0)},
        {"gamma_2pi_mhz", number_key(2.0)},
        {"omega_norm_2pi_khz", number_key(6.0)},
    };
  } else if (command == "scan-dark") {
    schema = {
        {"delta3_grid_2pi_mhz", grid_key(-4.0, 4.0, 81)},
        {"delta4_2pi_mhz", number_key(0.0)},
        {"omega3_norm_2pi_khz", number_key(6.0)},
        {"omega4_norm_2pi_khz", number_key(4.0)},
        {"intensity_l3_mw_cm2", number_key(300.0)},
        {"intensity_l4_mw_cm2", number_key(5e4)},
        {"gamma_2pi_mhz", number_key(2.0)},
        {"linewidth3_2pi_khz", number_key(1.0)},
        {"linewidth4_2pi_khz", number_key(1.0)},
        {"wait_us", number_key(100.0)},
    };
  } else if (command == "stirap") {
    schema = stirap_schema();
  } else if (command == "roundtrip") {
    schema = stirap_schema();
    schema.push_back({"wait_us", number_key(20.0)});
    schema.push_back({"hold_loss_rate_per_us", number_key(0.0)});
  } else if (command == "fit") {
    schema = {
        {"model", string_key(true)},
        {"input_csv", string_key(true)},
        {"loss_model", string_key(false, "rate")},
        {"wait_us", number_key()},
        {"intensity_mw_cm2", number_key()},
        {"fixed", opaque_object_key()},
        {"free", opaque_object_key()},
    };
  } else if (command == "dvr") {
    schema = {
        {"reduced_mass_amu", number_key(66.4527)},
        {"j_total", integer_key(0)},
        {"grid", object_key({{"r_min_angstrom", number_key(3.0)},
                             {"r_max_angstrom", number_key(15.0)},
                             {"n_points", integer_key(512)}})},
        {"channel_a", opaque_object_key()},
        {"channel_b", opaque_object_key()},
        {"coupling", opaque_object_key()},
        {"dump_wavefunctions", boolean_key(false)},
    };
    schema[3].second.required = true;
  } else if (command == "validate-table") {
    schema = {{"table_csv", string_key(true)}};
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  schema.push_back({"output_dir", string_key(false)});
  schema.push_back({"seed", integer_key(0)});
  return schema;
}

std::string suggest(const std::string& bad, const Schema& schema) {
  int best = 1000;
  std::string who;
  for (const auto& [key, _] : schema) {
    const int d = levenshtein(bad, key);
    if (d < best) {
      best = d;
      who = key;
    }
  }
  if (best <= 3 && !who.empty()) return " (did you mean '" + who + "'?)";
  return "";
}

void check_kind(const json& value, const KeySchema& schema,
                const std::string& path) {
  using Kind = KeySchema::Kind;
  switch (schema.kind) {
    case Kind::number:
      if (!value.is_number())
        throw ConfigError("config key '" + path + "' must be a number");
      break;
    case Kind::integer:
      if (!value.is_number_integer())
        throw ConfigError("config key '" + path + "' must be an integer");
      break;
    case Kind::boolean:
      if (!value.is_boolean())
        throw ConfigError("config key '" + path + "' must be a boolean");
      break;
    case Kind::string:
      if (!value.is_string())
        throw ConfigError("config key '" + path + "' must be a string");
      break;
    case Kind::grid: {
      if (!value.is_object())
        throw ConfigError("config key '" + path +
                          "' must be a grid object "
                          "({min,max,points} or {values:[...]})");
      if (value.contains("values")) {
        if (!value["values"].is_array() || value.size() != 1)
          throw ConfigError("config key '" + path +
                            "': grid with 'values' takes no other keys");
      } else {
        for (const auto& [k, v] : value.items()) {
          if (k == "min" || k == "max") {
            if (!v.is_number())
              throw ConfigError("config key '" + path + "." + k +
                                "' must be a number");
          } else if (k == "points") {
            if (!v.is_number_integer())
              throw ConfigError("config key '" + path +
                                ".points' must be an integer");
          } else {
            throw ConfigError("unknown grid key '" + path + "." + k + "'");
          }
        }
        for (const char* k : {"min", "max", "points"})
          if (!value.contains(k))
            throw ConfigError("config key '" + path + "' missing grid key '" +
                              std::string(k) + "'");
      }
      break;
    }
    case Kind::object:
      if (!value.is_object())
        throw ConfigError("config key '" + path + "' must be an object");
      break;
  }
}

void validate_object(json& params, const Schema& schema,
                     const std::string& prefix) {
  if (!params.is_object())
    throw ConfigError("config" +
                      (prefix.empty() ? std::string() : " key '" + prefix + "'") +
                      " must be a JSON object");
  for (const auto& [key, value] : params.items()) {
    const KeySchema* found = nullptr;
    for (const auto& [name, ks] : schema)
      if (name == key) found = &ks;
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!found)
      throw ConfigError("unknown config key '" + path + "'" +
                        suggest(key, schema));
    check_kind(value, *found, path);
    if (found->kind == KeySchema::Kind::object && !found->opaque)
      validate_object(params[key], found->children, path);
  }
  for (const auto& [name, ks] : schema) {
    if (params.contains(name)) continue;
    const std::string path = prefix.empty() ? name : prefix + "." + name;
    if (!ks.default_value.is_null()) {
      params[name] = ks.default_value;
    } else if (ks.required) {
      throw ConfigError("missing required config key '" + path + "'");
    } else if (ks.kind == KeySchema::Kind::object && !ks.opaque &&
               !ks.children.empty()) {
      params[name] = json::object();
    }
    if (params.contains(name) && ks.kind == KeySchema::Kind::object &&
        !ks.opaque)
      validate_object(params[name], ks.children, path);
  }
}

ScanGrid parse_grid(const json& value, ScanGrid::Axis axis) {
  ScanGrid grid;
  grid.axis = axis;
  if (value.contains("values")) {
    for (const auto& v : value["values"]) {
      if (!v.is_number())
        throw ConfigError("grid 'values' entries must be numbers");
      grid.points.push_back(v.get<double>());
    }
    grid.validate();
    return grid;
  }
  return ScanGrid::linspace(axis, value["min"].get<double>(),
                            value["max"].get<double>(),
                            value["points"].get<int>());
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "scan-loss", "scan-decay", "scan-dark", "stirap",
      "roundtrip", "fit",        "dvr",       "validate-table"};
  return names;
}

void apply_override(json& raw_parameters, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + assignment);
  const std::string dotted = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;  // plain string
  }
  json* at = &raw_parameters;
  size_t begin = 0;
  while (true) {
    const size_t dot = dotted.find('.', begin);
    const std::string part = dotted.substr(
        begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (part.empty()) throw ConfigError("bad override key: " + dotted);
    if (dot == std::string::npos) {
      (*at)[part] = value;
      break;
    }
    if (!at->contains(part) || !(*at)[part].is_object())
      (*at)[part] = json::object();
    at = &(*at)[part];
    begin = dot + 1;
  }
}

RunConfig make_run_config(const std::string& command, json raw_parameters) {
  if (raw_parameters.is_null()) raw_parameters = json::object();
  validate_object(raw_parameters, command_schema(command), "");
  RunConfig config;
  config.command = command;
  if (raw_parameters.contains("output_dir"))
    config.output_dir = raw_parameters["output_dir"].get<std::string>();
  config.seed = raw_parameters.value("seed", 0);
  config.parameters = std::move(raw_parameters);
  return config;
}

RunConfig load_config(const std::string& command, const std::string& path) {
  json raw = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
      raw = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + path + ": " + e.what());
    }
  }
  return make_run_config(command, std::move(raw));
}

std::string config_hash(const RunConfig& config) {
  json semantic = config.parameters;
  semantic.erase("output_dir");
  const std::string text = config.command + "\n" + semantic.dump();
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "fnv1a:%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

void save_spectrum(const Spectrum& spectrum, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const bool with_err = !spectrum.survival_err.empty();
  out << "# mscheme spectrum v1\n";
  out << "# axis: " << ScanGrid::axis_name(spectrum.grid.axis) << " "
      << ScanGrid::axis_unit(spectrum.grid.axis) << "\n";
  out << "# metadata: " << spectrum.metadata.dump() << "\n";
  out << (with_err ? "x_value,survival,survival_err" : "x_value,survival")
      << "\n";
  for (size_t i = 0; i < spectrum.survival.size(); ++i) {
    out << fmt17(spectrum.grid.points[i]) << "," << fmt17(spectrum.survival[i]);
    if (with_err) out << "," << fmt17(spectrum.survival_err[i]);
    out << "\n";
  }
}

Spectrum load_spectrum(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spectrum file: " + path.string());
  Spectrum spectrum;
  bool have_axis = false, have_metadata = false, have_header = false;
  bool with_err = false;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# axis: ", 0) == 0) {
        std::stringstream ss(line.substr(8));
        std::string name, unit;
        ss >> name >> unit;
        bool known = false;
        for (auto axis : {ScanGrid::Axis::detuning_delta3,
                          ScanGrid::Axis::detuning_delta4, ScanGrid::Axis::time,
                          ScanGrid::Axis::intensity})
          if (name == ScanGrid::axis_name(axis)) {
            spectrum.grid.axis = axis;
            known = true;
          }
        if (!known)
          throw ConfigError(path.string() + " line " +
                            std::to_string(line_number) + ": unknown axis '" +
                            name + "'");
        have_axis = true;
      } else if (line.rfind("# metadata: ", 0) == 0) {
        try {
          spectrum.metadata = json::parse(line.substr(12));
        } catch (const json::exception& e) {
          throw ConfigError(path.string() + " line " +
                            std::to_string(line_number) +
                            ": bad metadata JSON: " + e.what());
        }
        have_metadata = true;
      }
      continue;
    }
    if (!have_header) {
      if (line == "x_value,survival") {
        with_err = false;
      } else if (line == "x_value,survival,survival_err") {
        with_err = true;
      } else {
        throw ConfigError(path.string() + " line " +
                          std::to_string(line_number) +
                          ": unexpected column header '" + line + "'");
      }
      have_header = true;
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != (with_err ? 3u : 2u))
      throw ConfigError(path.string() + " line " + std::to_string(line_number) +
                        ": wrong number of columns");
    double x = 0.0, s = 0.0, err = 0.0;
    try {
      x = std::stod(fields[0]);
      s = std::stod(fields[1]);
      if (with_err) err = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + " line " + std::to_string(line_number) +
                        ": malformed numeric field");
    }
    if (s < 0.0 || s > 1.0)
      throw ConfigError(path.string() + " line " + std::to_string(line_number) +
                        ": survival " + fields[1] + " outside [0, 1]");
    spectrum.grid.points.push_back(x);
    spectrum.survival.push_back(s);
    if (with_err) spectrum.survival_err.push_back(err);
  }
  if (!have_header)
    throw ConfigError(path.string() + ": no column header found");
  if (!have_axis)
    throw ConfigError(path.string() + ": missing '# axis:' line");
  if (!have_metadata) {
    std::cerr << "mscheme: warning: " << path.string()
              << " has no metadata block\n";
    spectrum.metadata = nullptr;
  }
  spectrum.grid.validate();
  return spectrum;
}

void emit_plot_data(const Spectrum& spectrum, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# " << ScanGrid::axis_name(spectrum.grid.axis) << "_"
      << ScanGrid::axis_unit(spectrum.grid.axis) << " survival";
  if (!spectrum.survival_err.empty()) out << " survival_err";
  out << "\n";
  for (size_t i = 0; i < spectrum.survival.size(); ++i) {
    out << fmt17(spectrum.grid.points[i]) << " " << fmt17(spectrum.survival[i]);
    if (!spectrum.survival_err.empty())
      out << " " << fmt17(spectrum.survival_err[i]);
    out << "\n";
  }
}

void emit_plot_data(const Trajectory& trajectory, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# t_us";
  for (const std::string& label : trajectory.level_labels)
    out << " pop_" << label;
  out << "\n";
  for (size_t s = 0; s < trajectory.times_us.size(); ++s) {
    out << fmt17(trajectory.times_us[s]);
    for (Eigen::Index j = 0; j < trajectory.populations.rows(); ++j)
      out << " " << fmt17(trajectory.populations(j, s));
    out << "\n";
  }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

StirapConfig stirap_from_params(const json& p) {
  StirapConfig config;
  config.omega_peak1_2pi_mhz = p["omega_peak1_2pi_mhz"].get<double>();
  config.omega_peak2_2pi_mhz = p["omega_peak2_2pi_mhz"].get<double>();
  config.pulse_width_us = p["pulse_width_us"].get<double>();
  config.pulse_delay_us = p["pulse_delay_us"].get<double>();
  config.delta1_2pi_mhz = p["delta1_2pi_mhz"].get<double>();
  config.delta2_2pi_mhz = p["delta2_2pi_mhz"].get<double>();
  config.excited_decay_2pi_mhz = p["excited_decay_2pi_mhz"].get<double>();
  config.linewidth1_2pi_khz = p["linewidth1_2pi_khz"].get<double>();
  config.linewidth2_2pi_khz = p["linewidth2_2pi_khz"].get<double>();
  config.trajectory_samples = p["trajectory_samples"].get<int>();
  return config;
}

dvr::ChannelPotential parse_potential(const json& spec,
                                      const dvr::RadialGrid& grid,
                                      const std::string& path) {
  if (!spec.is_object() || !spec.contains("type"))
    throw ConfigError("config key '" + path + "' needs a 'type'");
  const std::string type = spec["type"].get<std::string>();
  auto require_keys = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : spec.items()) {
      if (k == "type") continue;
      bool ok = false;
      for (const char* want : keys)
        if (k == want) ok = true;
      if (!ok)
        throw ConfigError("unknown key '" + path + "." + k + "' for potential type '" +
                          type + "'");
    }
    for (const char* want : keys)
      if (!spec.contains(want))
        throw ConfigError("missing key '" + path + "." + want +
                          "' for potential type '" + type + "'");
  };
  if (type == "morse") {
    require_keys({"d_e_cm", "a_per_angstrom", "r_e_angstrom", "t_e_cm"});
    dvr::MorseParameters p;
    p.d_e_cm = spec["d_e_cm"].get<double>();
    p.a_per_angstrom = spec["a_per_angstrom"].get<double>();
    p.r_e_angstrom = spec["r_e_angstrom"].get<double>();
    p.t_e_cm = spec["t_e_cm"].get<double>();
    return dvr::ChannelPotential::morse(grid, p);
  }
  if (type == "harmonic") {
    require_keys({"k_cm_per_angstrom2", "r_e_angstrom", "t_e_cm"});
    return dvr::ChannelPotential::harmonic(grid,
                                           spec["k_cm_per_angstrom2"].get<double>(),
                                           spec["r_e_angstrom"].get<double>(),
                                           spec["t_e_cm"].get<double>());
  }
  if (type == "csv") {
    require_keys({"path"});
    return dvr::ChannelPotential::from_csv(grid, spec["path"].get<std::string>());
  }
  throw ConfigError("config key '" + path + "': unknown potential type '" +
                    type + "'");
}

dvr::ChannelPotential parse_coupling(const json& spec,
                                     const dvr::RadialGrid& grid) {
  if (spec.is_null()) return dvr::ChannelPotential::constant(grid, 0.0);
  if (!spec.is_object() || !spec.contains("type"))
    throw ConfigError("config key 'coupling' needs a 'type'");
  const std::string type = spec["type"].get<std::string>();
  if (type == "constant") {
    if (!spec.contains("w_cm"))
      throw ConfigError("missing key 'coupling.w_cm'");
    return dvr::ChannelPotential::constant(grid, spec["w_cm"].get<double>());
  }
  if (type == "gaussian") {
    for (const char* k : {"amplitude_cm", "center_angstrom", "width_angstrom"})
      if (!spec.contains(k))
        throw ConfigError(std::string("missing key 'coupling.") + k + "'");
    return dvr::ChannelPotential::gaussian_bump(
        grid, spec["amplitude_cm"].get<double>(),
        spec["center_angstrom"].get<double>(),
        spec["width_angstrom"].get<double>());
  }
  throw ConfigError("unknown coupling type '" + type + "'");
}

int run_scan(const RunConfig& config, std::vector<std::string>& outputs) {
  const json& p = config.parameters;
  Spectrum spectrum;
  if (config.command == "scan-loss") {
    spectrum = loss_spectrum(
        parse_grid(p["delta3_grid_2pi_mhz"], ScanGrid::Axis::detuning_delta3),
        p["intensity_mw_cm2"].get<double>(), p["wait_us"].get<double>(),
        p["gamma_2pi_mhz"].get<double>(), p["omega_norm_2pi_khz"].get<double>());
  } else if (config.command == "scan-decay") {
    spectrum = decay_curve(
        p["intensity_mw_cm2"].get<double>(),
        parse_grid(p["time_grid_us"], ScanGrid::Axis::time),
        p["gamma_2pi_mhz"].get<double>(), p["omega_norm_2pi_khz"].get<double>());
  } else {
    const double omega3 = rabi_from_intensity(
        p["omega3_norm_2pi_khz"].get<double>(), p["intensity_l3_mw_cm2"].get<double>());
    const double omega4 = rabi_from_intensity(
        p["omega4_norm_2pi_khz"].get<double>(), p["intensity_l4_mw_cm2"].get<double>());
    spectrum = dark_resonance_scan(
        parse_grid(p["delta3_grid_2pi_mhz"], ScanGrid::Axis::detuning_delta3),
        p["delta4_2pi_mhz"].get<double>(), omega3, omega4,
        p["gamma_2pi_mhz"].get<double>(), p["linewidth3_2pi_khz"].get<double>(),
        p["linewidth4_2pi_khz"].get<double>(), p["wait_us"].get<double>());
    spectrum.metadata["omega3_norm_2pi_khz"] = p["omega3_norm_2pi_khz"];
    spectrum.metadata["omega4_norm_2pi_khz"] = p["omega4_norm_2pi_khz"];
    spectrum.metadata["intensity_l3_mw_cm2"] = p["intensity_l3_mw_cm2"];
    spectrum.metadata["intensity_l4_mw_cm2"] = p["intensity_l4_mw_cm2"];
  }
  save_spectrum(spectrum, config.output_dir / "spectrum.csv");
  emit_plot_data(spectrum, config.output_dir / "plot.dat");
  outputs = {"spectrum.csv", "plot.dat"};
  return 0;
}

json fit_to_json(const std::string& model, const FitResult& fit) {
  json params = json::object();
  for (size_t i = 0; i < fit.parameter_names.size(); ++i)
    params[fit.parameter_names[i]] = {
        {"value", fit.values[static_cast<Eigen::Index>(i)]},
        {"stderr", fit.standard_errors[static_cast<Eigen::Index>(i)]}};
  json out = {{"model", model},
              {"params", params},
              {"residual_norm", fit.residual_norm},
              {"converged", fit.converged},
              {"iterations", fit.iterations}};
  if (!fit.message.empty()) out["message"] = fit.message;
  return out;
}

int run_fit(const RunConfig& config, std::vector<std::string>& outputs) {
  const json& p = config.parameters;
  const std::string model = p["model"].get<std::string>();
  const Spectrum spectrum = load_spectrum(p["input_csv"].get<std::string>());

  auto metadata_or = [&](const char* key, const char* config_key) {
    if (p.contains(config_key)) return p[config_key].get<double>();
    if (spectrum.metadata.is_object() && spectrum.metadata.contains(key))
      return spectrum.metadata[key].get<double>();
    throw ConfigError(std::string("fit: provide '") + config_key +
                      "' (not present in the spectrum metadata)");
  };

  FitResult fit;
  if (model == "exponential_decay") {
    fit = fit_exponential(spectrum);
  } else if (model == "loss_line") {
    const double wait = metadata_or("wait_us", "wait_us");
    const double intensity = metadata_or("intensity_mw_cm2", "intensity_mw_cm2");
    const std::string loss_model = p["loss_model"].get<std::string>();
    if (loss_model != "rate" && loss_model != "master_equation")
      throw ConfigError("fit: loss_model must be 'rate' or 'master_equation'");
    fit = fit_loss_line(spectrum, wait, intensity,
                        loss_model == "rate" ? LossLineModel::rate_equation
                                             : LossLineModel::master_equation);
  } else if (model == "dark_resonance") {
    ModelSpec spec;
    spec.kind = ModelSpec::Kind::dark_resonance;
    if (p.contains("fixed"))
      for (const auto& [key, value] : p["fixed"].items()) {
        if (!value.is_number())
          throw ConfigError("fit: fixed." + key + " must be a number");
        spec.fixed[key] = value.get<double>();
      }
    if (!p.contains("free") || p["free"].empty())
      throw ConfigError("fit: dark_resonance needs a non-empty 'free' map");
    for (const auto& [key, value] : p["free"].items()) {
      ModelSpec::FreeParameter f;
      f.name = key;
      for (const auto& [k, v] : value.items())
        if (k != "init" && k != "lower" && k != "upper")
          throw ConfigError("fit: unknown key 'free." + key + "." + k + "'");
      if (!value.contains("init") || !value.contains("lower") ||
          !value.contains("upper"))
        throw ConfigError("fit: free." + key + " needs init, lower, upper");
      f.initial = value["init"].get<double>();
      f.lower = value["lower"].get<double>();
      f.upper = value["upper"].get<double>();
      spec.free.push_back(f);
    }
    fit = fit_dark_resonance(spectrum, spec);
  } else {
    throw ConfigError("fit: unknown model '" + model + "'");
  }

  write_json(config.output_dir / "fit.json", fit_to_json(model, fit));
  outputs = {"fit.json"};
  return 0;
}

int run_dvr(const RunConfig& config, std::vector<std::string>& outputs) {
  const json& p = config.parameters;
  dvr::RadialGrid grid;
  grid.r_min_angstrom = p["grid"]["r_min_angstrom"].get<double>();
  grid.r_max_angstrom = p["grid"]["r_max_angstrom"].get<double>();
  grid.n_points = p["grid"]["n_points"].get<int>();
  grid.validate();
  const double mass = p["reduced_mass_amu"].get<double>();
  const int j_total = p["j_total"].get<int>();

  std::vector<dvr::BoundLevel> levels;
  if (p.contains("channel_b")) {
    dvr::CoupledSystem system{
        parse_potential(p["channel_a"], grid, "channel_a"),
        parse_potential(p["channel_b"], grid, "channel_b"),
        parse_coupling(p.contains("coupling") ? p["coupling"] : json(), grid),
        mass, j_total};
    levels = dvr::solve_coupled(system, grid);
  } else {
    levels = dvr::solve_single_channel(parse_potential(p["channel_a"], grid, "channel_a"),
                                       grid, mass, j_total);
  }

  json out = json::array();
  for (const dvr::BoundLevel& level : levels)
    out.push_back({{"energy_cm", level.energy_cm},
                   {"fraction_a", level.fraction_a},
                   {"character", std::string(1, level.assignment.character)},
                   {"progression_index", level.assignment.progression_index},
                   {"coupled_v", level.assignment.coupled_v}});
  write_json(config.output_dir / "levels.json", out);
  outputs = {"levels.json"};

  if (p["dump_wavefunctions"].get<bool>()) {
    const Eigen::VectorXd r = grid.points();
    for (size_t k = 0; k < levels.size(); ++k) {
      char name[48];
      std::snprintf(name, sizeof name, "wavefunction_%03zu.csv", k);
      std::ofstream wf(config.output_dir / name);
      wf << "r_angstrom,psi_a,psi_b\n";
      for (Eigen::Index i = 0; i < r.size(); ++i)
        wf << fmt17(r[i]) << "," << fmt17(levels[k].psi_a[i]) << ","
           << fmt17(levels[k].psi_b[i]) << "\n";
      outputs.push_back(name);
    }
  }
  return 0;
}

int run_stirap(const RunConfig& config, std::vector<std::string>& outputs) {
  const StirapConfig stirap = stirap_from_params(config.parameters);
  if (config.command == "stirap") {
    EfficiencyResult result = simulate_stirap(stirap);
    write_json(config.output_dir / "result.json",
               {{"efficiency", result.efficiency}});
    emit_plot_data(result.trajectory, config.output_dir / "trajectory.dat");
  } else {
    RoundTripResult result = double_stirap_roundtrip(
        stirap, config.parameters["wait_us"].get<double>(),
        config.parameters["hold_loss_rate_per_us"].get<double>());
    write_json(config.output_dir / "result.json",
               {{"roundtrip_survival", result.survival},
                {"forward_efficiency", result.forward_efficiency}});
    emit_plot_data(result.trajectory, config.output_dir / "trajectory.dat");
  }
  outputs = {"result.json", "trajectory.dat"};
  return 0;
}

int run_validate_table(const RunConfig& config,
                       std::vector<std::string>& outputs) {
  const LevelTable table =
      LevelTable::load_csv(config.parameters["table_csv"].get<std::string>());
  ValidationReport report = validate_table(table);
  if (!table.reference_consistent)
    std::cerr << "mscheme: warning: reference offsets spread "
              << table.reference_offset_spread_cm << " cm^-1 (> 0.02)\n";
  write_json(config.output_dir / "report.json", to_json(report));
  outputs = {"report.json"};
  return report.all_pass() && table.reference_consistent ? 0 : 4;
}

}  // namespace

int run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  std::vector<std::string> outputs;
  int exit_code = 0;

  if (config.command == "scan-loss" || config.command == "scan-decay" ||
      config.command == "scan-dark") {
    exit_code = run_scan(config, outputs);
  } else if (config.command == "stirap" || config.command == "roundtrip") {
    exit_code = run_stirap(config, outputs);
  } else if (config.command == "fit") {
    exit_code = run_fit(config, outputs);
  } else if (config.command == "dvr") {
    exit_code = run_dvr(config, outputs);
  } else if (config.command == "validate-table") {
    exit_code = run_validate_table(config, outputs);
  } else {
    throw ConfigError("unknown command '" + config.command + "'");
  }

  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  json semantic = config.parameters;
  semantic.erase("output_dir");
  write_json(config.output_dir / "manifest.json",
             {{"command", config.command},
              {"config", semantic},
              {"config_hash", config_hash(config)},
              {"version", "mscheme 0.1.0"},
              {"wall_time_ms", wall_ms},
              {"outputs", outputs}});
  return exit_code;
}

}  // namespace mscheme
