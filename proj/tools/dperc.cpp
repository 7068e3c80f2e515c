#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dperc/errors.hpp"
#include "dperc/experiment.hpp"

namespace {

std::string flag_name(std::string key) {
  for (char& ch : key)
    if (ch == '_') ch = '-';
  return "--" + key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diluted perceptron experiments: exact enumeration, population dynamics and "
               "the replica-symmetric free energy."};
  app.require_subcommand(1);

  struct Bound {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config_path;
  };
  std::map<std::string, Bound> bound;

  for (const auto& name : dperc::command_names()) {
    auto* sub = app.add_subcommand(name);
    auto& b = bound[name];
    sub->add_option("--config", b.config_path, "flat key = value file; flags override it")
        ->check(CLI::ExistingFile);
    for (const auto& p : dperc::command_schema(name)) {
      std::string names = flag_name(p.key);
      if (p.key == "out_dir") names += ",--out";
      b.options[p.key] =
          sub->add_option(names, b.values[p.key], p.help + " [default: " + p.default_value + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dperc::exit_code::config;
  }

  for (auto* sub : app.get_subcommands()) {
    auto& b = bound.at(sub->get_name());
    std::map<std::string, std::string> overrides;
    for (const auto& [key, opt] : b.options)
      if (opt->count() > 0) overrides[key] = b.values[key];
    try {
      const auto config = dperc::load_config(b.config_path, sub->get_name(), overrides);
      return dperc::run(config, std::cerr);
    } catch (const dperc::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return dperc::exit_code::config;
    }
  }
  return dperc::exit_code::config;
}
