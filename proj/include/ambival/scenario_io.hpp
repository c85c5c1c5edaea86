#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambival/scenario.hpp"
#include "ambival/util.hpp"

// Line-oriented, tab-separated fixture formats.
//
//   lattice <T>
//   payloads <name>...
//   <id> <parent> <prob> <payload values>...     one line per node, parents first
//
//   paths <n> <T> <seed> <antithetic 0|1>
//   columns <name>:<reveal>... | derived <name>...
//   <draws>... <derived>...                       one line per path

namespace ambival {

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, '\t')) out.push_back(cur);
  return out;
}

inline double field_double(const std::string& s, std::size_t line) {
  auto v = parse_double(s);
  if (!v) throw std::invalid_argument("line " + std::to_string(line) + ": bad number '" + s + "'");
  return *v;
}

inline bool next_line(std::istream& is, std::string& line, std::size_t& no) {
  while (std::getline(is, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace detail

inline void write_lattice(std::ostream& os, const ScenarioLattice& lat) {
  os << "lattice\t" << lat.horizon() << '\n' << "payloads";
  for (const auto& [name, _] : lat.payloads()) os << '\t' << name;
  os << '\n';
  for (NodeId id = 0; id < lat.size(); ++id) {
    const auto& nd = lat.node(id);
    os << id << '\t' << (id == 0 ? std::string("-") : std::to_string(nd.parent)) << '\t' << format_number(nd.prob);
    for (const auto& [_, vals] : lat.payloads()) os << '\t' << format_number(vals[id]);
    os << '\n';
  }
}

inline ScenarioLattice read_lattice(std::istream& is) {
  std::string line;
  std::size_t no = 0;
  if (!detail::next_line(is, line, no)) throw std::invalid_argument("lattice file is empty");
  auto head = detail::split_tabs(line);
  if (head.size() != 2 || head[0] != "lattice") throw std::invalid_argument("line 1: expected 'lattice<TAB>T'");
  const auto T = parse_int<int>(head[1]);
  if (!T) throw std::invalid_argument("line 1: bad horizon");
  if (!detail::next_line(is, line, no)) throw std::invalid_argument("missing payloads line");
  auto names = detail::split_tabs(line);
  if (names.empty() || names[0] != "payloads") throw std::invalid_argument("expected 'payloads' line");
  names.erase(names.begin());
  std::vector<LatticeNode> nodes;
  std::map<std::string, std::vector<double>> payloads;
  for (const auto& n : names) payloads[n];
  while (detail::next_line(is, line, no)) {
    const auto f = detail::split_tabs(line);
    if (f.size() != 3 + names.size())
      throw std::invalid_argument("line " + std::to_string(no) + ": expected " + std::to_string(3 + names.size()) +
                                  " fields");
    const auto id = parse_int<std::size_t>(f[0]);
    if (!id || *id != nodes.size()) throw std::invalid_argument("line " + std::to_string(no) + ": node ids must be 0,1,2,...");
    LatticeNode nd;
    if (f[1] != "-") {
      const auto parent = parse_int<std::size_t>(f[1]);
      if (!parent) throw std::invalid_argument("line " + std::to_string(no) + ": bad parent");
      nd.parent = *parent;
    }
    nd.prob = detail::field_double(f[2], no);
    for (std::size_t k = 0; k < names.size(); ++k) payloads[names[k]].push_back(detail::field_double(f[3 + k], no));
    nodes.push_back(nd);
  }
  return ScenarioLattice::from_nodes(*T, std::move(nodes), std::move(payloads));
}

inline void write_paths(std::ostream& os, const PathSample& ps) {
  os << "paths\t" << ps.n_paths() << '\t' << ps.horizon() << '\t' << ps.seed() << '\t' << (ps.antithetic() ? 1 : 0)
     << '\n';
  os << "columns";
  for (const auto& c : ps.columns()) os << '\t' << c.name << ':' << c.reveal_time;
  for (const auto& [name, _] : ps.derived_columns()) os << '\t' << "derived:" << name;
  os << '\n';
  for (std::size_t i = 0; i < ps.n_paths(); ++i) {
    for (std::size_t j = 0; j < ps.columns().size(); ++j) os << (j ? "\t" : "") << format_number(ps.draw(i, j));
    for (const auto& [_, vals] : ps.derived_columns()) os << '\t' << format_number(vals[i]);
    os << '\n';
  }
}

inline PathSample read_paths(std::istream& is) {
  std::string line;
  std::size_t no = 0;
  if (!detail::next_line(is, line, no)) throw std::invalid_argument("path file is empty");
  const auto head = detail::split_tabs(line);
  if (head.size() != 5 || head[0] != "paths") throw std::invalid_argument("line 1: expected 'paths' header");
  const auto n = parse_int<std::size_t>(head[1]);
  const auto T = parse_int<int>(head[2]);
  const auto seed = parse_int<std::uint64_t>(head[3]);
  if (!n || !T || !seed) throw std::invalid_argument("line 1: bad header values");
  if (!detail::next_line(is, line, no)) throw std::invalid_argument("missing columns line");
  auto cols = detail::split_tabs(line);
  if (cols.empty() || cols[0] != "columns") throw std::invalid_argument("expected 'columns' line");
  std::vector<InnovationColumn> innov;
  std::vector<std::string> derived;
  for (std::size_t k = 1; k < cols.size(); ++k) {
    const auto pos = cols[k].rfind(':');
    if (pos == std::string::npos) throw std::invalid_argument("bad column spec '" + cols[k] + "'");
    if (cols[k].rfind("derived:", 0) == 0) {
      derived.push_back(cols[k].substr(8));
    } else {
      const auto rt = parse_int<int>(cols[k].substr(pos + 1));
      if (!rt) throw std::invalid_argument("bad reveal time in '" + cols[k] + "'");
      innov.push_back({cols[k].substr(0, pos), *rt});
    }
  }
  std::vector<std::vector<double>> draws(innov.size()), dvals(derived.size());
  while (detail::next_line(is, line, no)) {
    const auto f = detail::split_tabs(line);
    if (f.size() != innov.size() + derived.size())
      throw std::invalid_argument("line " + std::to_string(no) + ": wrong field count");
    for (std::size_t j = 0; j < innov.size(); ++j) draws[j].push_back(detail::field_double(f[j], no));
    for (std::size_t j = 0; j < derived.size(); ++j) dvals[j].push_back(detail::field_double(f[innov.size() + j], no));
  }
  if ((draws.empty() ? 0 : draws[0].size()) != *n) throw std::invalid_argument("path count does not match header");
  PathSample ps(*n, *T, *seed, std::move(innov), std::move(draws), head[4] == "1");
  for (std::size_t j = 0; j < derived.size(); ++j) ps.set_derived(derived[j], std::move(dvals[j]));
  return ps;
}

}  // namespace ambival
