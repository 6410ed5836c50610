#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "mscheme/errors.hpp"
#include "mscheme/io.hpp"
#include "mscheme/propagate.hpp"

// Exit codes: 0 success, 2 config error, 3 numerical failure,
// 4 validation failure.

int main(int argc, char** argv) {
  CLI::App app{"mscheme: loss spectroscopy, dark resonances, STIRAP transfer, "
               "and coupled-channel DVR bound states for laser-driven "
               "molecular level schemes"};
  app.require_subcommand(1);
  app.footer(
      "Scans parallelize across grid points; set MSCHEME_THREADS to pin the "
      "thread count.");

  struct SubArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
  };
  std::map<std::string, SubArgs> args;

  for (const std::string& name : mscheme::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    SubArgs& a = args[name];
    sub->add_option("--config", a.config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", a.out_dir, "output directory (default: out)");
    sub->add_option("--override", a.overrides,
                    "key=value (dot paths reach nested keys); repeatable");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const SubArgs& a = args[command];

  try {
    nlohmann::json raw = nlohmann::json::object();
    if (!a.config_path.empty()) {
      // reuse load_config's file handling but keep raw for overrides
      std::ifstream in(a.config_path);
      try {
        raw = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw mscheme::ConfigError("config file " + a.config_path + ": " +
                                   e.what());
      }
    }
    for (const std::string& assignment : a.overrides)
      mscheme::apply_override(raw, assignment);
    mscheme::RunConfig config = mscheme::make_run_config(command, std::move(raw));
    if (!a.out_dir.empty()) config.output_dir = a.out_dir;
    return mscheme::run(config);
  } catch (const mscheme::ConfigError& e) {
    std::cerr << "mscheme: config error: " << e.what() << "\n";
    return 2;
  } catch (const mscheme::NumericalError& e) {
    std::cerr << "mscheme: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "mscheme: error: " << e.what() << "\n";
    return 3;
  }
}
