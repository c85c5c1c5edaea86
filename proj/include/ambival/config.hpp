#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ambival/gaussian.hpp"
#include "ambival/oracle.hpp"
#include "ambival/riskmeasures.hpp"
#include "ambival/util.hpp"

namespace ambival {

// Raised for anything the user can fix in the configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;
  GaussianModel model;
  CaseConfig study;
  std::string out_dir = "out";
  unsigned threads = 0;
  std::string lattice_path;  // validate: lattice fixture; built-in demo tree if empty
  std::size_t oracle_instances = 200;
  double oracle_cap = kDefaultOracleCap;
};

inline const std::vector<std::string>& valid_commands() {
  static const std::vector<std::string> v{"validate", "table1", "figure1", "value", "oracle-check"};
  return v;
}

struct ConfigKey {
  std::string name, help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  auto d = parse_double(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  auto d = parse_int<Int>(v);
  if (!d) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return *d;
}

inline std::string dir_name(Direction d) { return d == Direction::inf ? "inf" : "sup"; }

}  // namespace detail

// Every key is also a flag: --<name> VALUE.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::to_double;
  using detail::to_int;
  static const std::vector<ConfigKey> keys{
      {"command", "validate | table1 | figure1 | value | oracle-check",
       [](RunConfig& c, const std::string& v) { c.command = v; }, [](const RunConfig& c) { return c.command; }},
      {"seed", "seed for the estimator cloud and all Monte Carlo draws",
       [](RunConfig& c, const std::string& v) { c.study.seed = to_int<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.study.seed); }},
      {"n", "Monte Carlo sample size",
       [](RunConfig& c, const std::string& v) { c.study.n = to_int<std::size_t>("n", v); },
       [](const RunConfig& c) { return std::to_string(c.study.n); }},
      {"p", "confidence level of the parameter region",
       [](RunConfig& c, const std::string& v) { c.study.p = to_double("p", v); },
       [](const RunConfig& c) { return format_number(c.study.p); }},
      {"q", "risk-measure level",
       [](RunConfig& c, const std::string& v) { c.study.rm.level = to_double("q", v); },
       [](const RunConfig& c) { return format_number(c.study.rm.level); }},
      {"rm", "risk measure: VAR | AVAR",
       [](RunConfig& c, const std::string& v) {
         try {
           c.study.rm.kind = parse_risk_kind(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       },
       [](const RunConfig& c) { return to_string(c.study.rm.kind); }},
      {"case", "1 (constant parameters) or 2 (adaptive parameters)",
       [](RunConfig& c, const std::string& v) { c.study.case_id = to_int<int>("case", v); },
       [](const RunConfig& c) { return std::to_string(c.study.case_id); }},
      {"out", "output directory", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
      {"threads", "worker cap, 0 = hardware concurrency",
       [](RunConfig& c, const std::string& v) { c.threads = to_int<unsigned>("threads", v); },
       [](const RunConfig& c) { return std::to_string(c.threads); }},
      {"grid.m", "boundary points on 2-d projections",
       [](RunConfig& c, const std::string& v) { c.study.m = to_int<std::size_t>("grid.m", v); },
       [](const RunConfig& c) { return std::to_string(c.study.m); }},
      {"grid.m_sphere", "boundary points on 3-d and 4-d boundaries",
       [](RunConfig& c, const std::string& v) { c.study.m_sphere = to_int<std::size_t>("grid.m_sphere", v); },
       [](const RunConfig& c) { return std::to_string(c.study.m_sphere); }},
      {"grid.refine_steps", "pattern-search steps after the grid pass (0 disables)",
       [](RunConfig& c, const std::string& v) { c.study.refine_steps = to_int<int>("grid.refine_steps", v); },
       [](const RunConfig& c) { return std::to_string(c.study.refine_steps); }},
      {"grid.refine_starts", "grid points used as refinement starts",
       [](RunConfig& c, const std::string& v) { c.study.refine_starts = to_int<std::size_t>("grid.refine_starts", v); },
       [](const RunConfig& c) { return std::to_string(c.study.refine_starts); }},
      {"knots", "knots of the piecewise-linear time-1 layer",
       [](RunConfig& c, const std::string& v) { c.study.knots = to_int<std::size_t>("knots", v); },
       [](const RunConfig& c) { return std::to_string(c.study.knots); }},
      {"h.direction", "inf (recursion) or sup for the time-1 layer",
       [](RunConfig& c, const std::string& v) {
         if (v == "inf")
           c.study.h_direction = Direction::inf;
         else if (v == "sup")
           c.study.h_direction = Direction::sup;
         else
           throw ConfigError("h.direction must be inf or sup");
       },
       [](const RunConfig& c) { return detail::dir_name(c.study.h_direction); }},
      {"cloud.reps", "estimator replications for the parameter cloud",
       [](RunConfig& c, const std::string& v) { c.study.cloud_reps = to_int<std::size_t>("cloud.reps", v); },
       [](const RunConfig& c) { return std::to_string(c.study.cloud_reps); }},
      {"model.beta0", "", [](RunConfig& c, const std::string& v) { c.model.beta0 = to_double("model.beta0", v); },
       [](const RunConfig& c) { return format_number(c.model.beta0); }},
      {"model.sigma0", "", [](RunConfig& c, const std::string& v) { c.model.sigma0 = to_double("model.sigma0", v); },
       [](const RunConfig& c) { return format_number(c.model.sigma0); }},
      {"model.beta1", "", [](RunConfig& c, const std::string& v) { c.model.beta1 = to_double("model.beta1", v); },
       [](const RunConfig& c) { return format_number(c.model.beta1); }},
      {"model.sigma1", "", [](RunConfig& c, const std::string& v) { c.model.sigma1 = to_double("model.sigma1", v); },
       [](const RunConfig& c) { return format_number(c.model.sigma1); }},
      {"model.i0", "first observed accident year",
       [](RunConfig& c, const std::string& v) { c.model.i0 = to_int<int>("model.i0", v); },
       [](const RunConfig& c) { return std::to_string(c.model.i0); }},
      {"model.exposure", "common exposure v_i for every accident year",
       [](RunConfig& c, const std::string& v) {
         const double e = to_double("model.exposure", v);
         c.model.exposures.assign(static_cast<std::size_t>(1 - c.model.i0), e);
       },
       [](const RunConfig& c) { return format_number(c.model.exposures.empty() ? 1.0 : c.model.exposures.front()); }},
      {"model.c_m1_1", "observed C_{-1,1}; defaults to model.beta0",
       [](RunConfig& c, const std::string& v) { c.model.c_m1_1 = to_double("model.c_m1_1", v); },
       [](const RunConfig& c) { return format_number(c.model.C_m1_1()); }},
      {"lattice", "lattice fixture for validate",
       [](RunConfig& c, const std::string& v) { c.lattice_path = v; }, [](const RunConfig& c) { return c.lattice_path; }},
      {"oracle.instances", "random lattices for oracle-check",
       [](RunConfig& c, const std::string& v) { c.oracle_instances = to_int<std::size_t>("oracle.instances", v); },
       [](const RunConfig& c) { return std::to_string(c.oracle_instances); }},
      {"oracle.cap", "enumeration cap",
       [](RunConfig& c, const std::string& v) { c.oracle_cap = to_double("oracle.cap", v); },
       [](const RunConfig& c) { return format_number(c.oracle_cap); }},
  };
  return keys;
}

inline const ConfigKey& find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  std::string valid;
  for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k.name;
  throw ConfigError("unknown key '" + name + "'; valid keys: " + valid);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "key = value" lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(no) + ": expected key = value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

inline void validate_config(const RunConfig& c) {
  bool known = false;
  for (const auto& cmd : valid_commands()) known = known || cmd == c.command;
  if (!known) {
    std::string list;
    for (const auto& cmd : valid_commands()) list += (list.empty() ? "" : ", ") + cmd;
    throw ConfigError("command must be one of: " + list + (c.command.empty() ? "" : " (got '" + c.command + "')"));
  }
  try {
    c.study.validate();
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.out_dir.empty()) throw ConfigError("out must not be empty");
  if (c.oracle_instances < 1) throw ConfigError("oracle.instances must be >= 1");
  if (!(c.oracle_cap >= 1.0)) throw ConfigError("oracle.cap must be >= 1");
}

// Defaults, then the file, then flag overrides (in order). AMBIVAL_OUT
// replaces the default output directory.
inline RunConfig parse_config(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (const char* env = std::getenv("AMBIVAL_OUT"); env && *env) cfg.out_dir = env;
  std::vector<std::pair<std::string, std::string>> kv;
  if (!path.empty()) kv = read_config_file(path);
  kv.insert(kv.end(), overrides.begin(), overrides.end());
  // the exposure list length follows i0, so apply i0 first
  for (const auto& [k, v] : kv)
    if (k == "model.i0") find_key(k).set(cfg, v);
  for (const auto& [k, v] : kv) find_key(k).set(cfg, v);
  validate_config(cfg);
  return cfg;
}

// key = value for every key, in table order.
inline std::string effective_config(const RunConfig& cfg) {
  std::string s;
  for (const auto& k : config_keys()) s += k.name + " = " + k.get(cfg) + "\n";
  return s;
}

}  // namespace ambival
