#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "ambival/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ambival: market-consistent liability valuation under model uncertainty"};
  app.set_help_all_flag("--help-all");

  std::string config_path;
  std::string command;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("command,--command", command, "validate | table1 | figure1 | value | oracle-check");

  std::map<std::string, std::string> flags;
  const auto& keys = ambival::config_keys();
  for (const auto& k : keys) {
    if (k.name == "command") continue;
    std::string names = "--" + k.name;
    app.add_option_function<std::string>(names, [&flags, name = k.name](const std::string& v) { flags[name] = v; },
                                         k.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ambival::kValidationFailure;
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  if (!command.empty()) overrides.emplace_back("command", command);
  for (const auto& [k, v] : flags) overrides.emplace_back(k, v);

  ambival::RunConfig cfg;
  try {
    cfg = ambival::parse_config(config_path, overrides);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ambival::kValidationFailure;
  }
  return ambival::run(cfg, std::cout);
}
