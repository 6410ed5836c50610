#ifndef MSCHEME_IO_HPP
#define MSCHEME_IO_HPP

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "mscheme/experiments.hpp"
#include "mscheme/propagate.hpp"

namespace mscheme {

//
// Configuration loading, CSV/JSON emission, and the command dispatcher
// behind the CLI. JSON for configs and reports, CSV for tabular data; every
// numeric key carries its unit suffix. Outputs are deterministic: identical
// configs produce bit-identical data files.
//

struct RunConfig {
  std::string command;
  nlohmann::json parameters;  // validated, defaults applied
  std::filesystem::path output_dir = "out";
  long seed = 0;  // reserved for future noise injection
};

// Known subcommands: scan-loss, scan-decay, scan-dark, stirap, roundtrip,
// fit, dvr, validate-table.
const std::vector<std::string>& command_names();

// Parses a JSON file; empty path yields an empty parameter set (defaults
// only). Unknown keys are rejected with a nearest-key suggestion; missing
// required keys and type mismatches name the offending key.
RunConfig load_config(const std::string& command, const std::string& path);

// "key=value" or "nested.key=value"; value parsed as JSON when possible,
// kept as a string otherwise. Must be applied before validation.
void apply_override(nlohmann::json& raw_parameters, const std::string& assignment);

// Validates raw parameters against the command schema and applies defaults.
RunConfig make_run_config(const std::string& command,
                          nlohmann::json raw_parameters);

// Runs the command, writing its artifact files plus manifest.json into
// output_dir. Returns the process exit code: 0, or 4 when validate-table
// finds failing checks. Config and numerical errors are thrown.
int run(const RunConfig& config);

// FNV-1a over the canonical serialization of the semantically meaningful
// part of the config (command + parameters; output_dir excluded).
std::string config_hash(const RunConfig& config);

// Spectrum files: '#'-prefixed header with axis kind, units, and a metadata
// JSON block, then CSV columns x_value,survival[,survival_err]. Values are
// written with 17 significant digits so load(save(s)) == s.
void save_spectrum(const Spectrum& spectrum, const std::filesystem::path& path);
Spectrum load_spectrum(const std::filesystem::path& path);

// Plot-ready whitespace-separated columns with one '#' header line.
void emit_plot_data(const Spectrum& spectrum, const std::filesystem::path& path);
void emit_plot_data(const Trajectory& trajectory,
                    const std::filesystem::path& path);

}  // namespace mscheme

#endif
