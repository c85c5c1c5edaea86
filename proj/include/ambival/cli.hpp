#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambival/config.hpp"
#include "ambival/gaussian.hpp"
#include "ambival/oracle.hpp"
#include "ambival/scenario_io.hpp"
#include "ambival/valuation.hpp"

namespace ambival {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kNumericalFailure = 2 };

namespace detail {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }
  void write(const std::string& name, const std::string& content) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    os << content;
    files_.push_back(name);
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline std::string cloud_manifest(const EstimatorCloud& cloud) {
  std::string s = "derived.mu =";
  for (int i = 0; i < 4; ++i) s += " " + format_number(cloud.mu(i));
  s += "\nderived.sigma =";
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += " " + format_number(cloud.sigma(i, j));
  return s + "\n";
}

inline std::string region_manifest(const std::string& tag, const ParamRegion& r) {
  std::string s = "derived.region." + tag + " = dim " + std::to_string(r.dim()) + " radius2 " + format_number(r.radius2) + " mu";
  for (Eigen::Index i = 0; i < r.mu.size(); ++i) s += " " + format_number(r.mu(i));
  s += " L";
  for (Eigen::Index i = 0; i < r.L.rows(); ++i)
    for (Eigen::Index j = 0; j < r.L.cols(); ++j) s += " " + format_number(r.L(i, j));
  return s + "\n";
}

inline std::string bounds_header() { return "case,p,q,lower,upper,n,seed\n"; }

inline std::string bounds_row(const Table1Row& r) {
  return std::to_string(r.case_id) + "," + format_number(r.p) + "," + format_number(r.q) + "," + format_number(r.lower) +
         "," + format_number(r.upper) + "," + std::to_string(r.n) + "," + std::to_string(r.seed) + "\n";
}

inline std::string table1_text(const std::vector<Table1Row>& rows) {
  std::ostringstream os;
  for (int case_id : {1, 2}) {
    os << "Case " << case_id << "\n       ";
    for (double p : table1_p_levels()) os << "  p=" << format_fixed(p, 1) << "          ";
    os << "\n";
    for (double q : table1_q_levels()) {
      os << "q=" << format_number(q) << std::string(q < 0.01 ? 1 : 2 + (q >= 0.1 ? 1 : 0), ' ');
      for (double p : table1_p_levels())
        for (const auto& r : rows)
          if (r.case_id == case_id && r.p == p && r.q == q)
            os << " (" << format_fixed(r.lower, 3) << "," << format_fixed(r.upper, 3) << ")";
      os << "\n";
    }
  }
  return os.str();
}

// Valuation record: scalars, then per-time arrays in node order.
inline std::string valuation_record(const ValuationOutput& out) {
  std::ostringstream os;
  os << "V0 = " << format_number(out.V0()) << "\nC0 = " << format_number(out.C0()) << "\nR0 = " << format_number(out.R0())
     << "\nlower = " << format_number(out.lower) << "\nupper = " << format_number(out.upper)
     << "\nsupermartingale.violations = " << out.diagnostics.violations
     << "\nsupermartingale.min_margin = " << format_number(out.diagnostics.min_margin) << "\n";
  for (const auto* p : {&out.R, &out.C, &out.V})
    for (int t = p->first_time; t <= p->last_time(); ++t) {
      os << p->name << "." << t << " =";
      for (double v : p->at(t)) os << " " << format_number(v);
      os << "\n";
    }
  for (std::size_t t = 0; t < out.theta_star.size(); ++t) {
    os << "theta_star." << t << " =";
    for (auto g : out.theta_star[t]) os << " " << g;
    os << "\n";
  }
  return os.str();
}

inline ScenarioLattice demo_lattice() {
  LatticeSpec spec;
  spec.horizon = 3;
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{0.25, 0.45, 0.26, 0.04}; };
  spec.payloads = {{"X", [](const ScenarioLattice& lat, NodeId id) {
                      if (id == 0) return 0.0;
                      // multiplicative claims with a thin catastrophe branch
                      static constexpr double growth[] = {0.8, 1.0, 1.25, 2.5};
                      const NodeId parent = lat.node(id).parent;
                      const auto& sib = lat.node(parent).children;
                      const auto k = static_cast<std::size_t>(std::find(sib.begin(), sib.end(), id) - sib.begin());
                      const double prev = parent == 0 ? 1.0 : lat.payload("X", parent);
                      return prev * growth[k];
                    }}};
  return build_lattice(spec);
}

}  // namespace detail

inline int run(const RunConfig& cfg, std::ostream& log = std::cout) {
  try {
    validate_config(cfg);
    set_max_threads(cfg.threads);
    detail::ArtifactWriter out(cfg.out_dir);
    std::string manifest = effective_config(cfg);
    int status = kOk;

    if (cfg.command == "table1") {
      const CaseStudy study = prepare_case_study(cfg.model, cfg.study);
      const auto rows = table1(study, cfg.study);
      std::string csv = detail::bounds_header();
      for (const auto& r : rows) csv += detail::bounds_row(r);
      out.write("table1.csv", csv);
      const std::string text = detail::table1_text(rows);
      out.write("table1.txt", text);
      log << text;
      manifest += detail::cloud_manifest(study.cloud);
      std::size_t interior = 0, clamped = 0;
      for (const auto& r : rows) {
        interior += r.interior_exceeds;
        clamped += r.clamped;
      }
      manifest += "diagnostics.interior_exceeds_boundary = " + std::to_string(interior) + "\n";
      manifest += "diagnostics.h_clamped = " + std::to_string(clamped) + "\n";
    } else if (cfg.command == "value") {
      const CaseStudy study = prepare_case_study(cfg.model, cfg.study);
      const ParamRegion region = case_region(study, cfg.study.p);
      Table1Row row{cfg.study.case_id, cfg.study.p, cfg.study.rm.level, 0, 0, cfg.study.n, cfg.study.seed, false, 0};
      if (cfg.study.case_id == 1) {
        const auto r = case1_bounds(cfg.study, study.model, region, study.paths);
        row.lower = r.lower;
        row.upper = r.upper;
        manifest += "diagnostics.interior_exceeds_boundary = " + std::to_string(r.interior_exceeds) + "\n";
      } else {
        const auto r = case2_value(cfg.study, study.model, region, study.paths);
        row.lower = r.value;
        row.upper = r.upper;
        manifest += "diagnostics.h_clamped = " + std::to_string(r.clamped) + "\n";
      }
      out.write("value.csv", detail::bounds_header() + detail::bounds_row(row));
      log << "case " << row.case_id << " p=" << format_number(row.p) << " q=" << format_number(row.q) << ": ("
          << format_fixed(row.lower, 3) << "," << format_fixed(row.upper, 3) << ")\n";
      manifest += detail::cloud_manifest(study.cloud) + detail::region_manifest("theta", region);
    } else if (cfg.command == "figure1") {
      const EstimatorCloud cloud = estimator_cloud(cfg.model, cfg.study.cloud_reps, cfg.study.seed);
      const std::vector<double> ps{0.1, 0.9};
      const Figure1Data fig = figure1_data(cloud, ps, cfg.study.m);
      std::string s1 = "beta0,beta1\n", s2 = "beta1,sigma1\n";
      for (const auto& r : fig.scatter_b0b1) s1 += format_number(r[0]) + "," + format_number(r[1]) + "\n";
      for (const auto& r : fig.scatter_b1s1) s2 += format_number(r[0]) + "," + format_number(r[1]) + "\n";
      out.write("figure1_scatter_b0b1.csv", s1);
      out.write("figure1_scatter_b1s1.csv", s2);
      for (double p : ps) {
        std::string e = "panel,x,y\n";
        for (const auto& pt : fig.ellipse_b0b1)
          if (pt.p == p) e += "beta0_beta1," + format_number(pt.x) + "," + format_number(pt.y) + "\n";
        for (const auto& pt : fig.ellipse_b1s1)
          if (pt.p == p) e += "beta1_sigma1," + format_number(pt.x) + "," + format_number(pt.y) + "\n";
        out.write("figure1_ellipse_p" + format_number(p) + ".csv", e);
      }
      manifest += detail::cloud_manifest(cloud);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        manifest += "derived.coverage.p" + format_number(ps[i]) + " = " + format_number(fig.coverage[i]) + "\n";
        log << "coverage of the p=" << format_number(ps[i]) << " region: " << format_fixed(fig.coverage[i], 3) << "\n";
      }
    } else if (cfg.command == "oracle-check") {
      std::string csv = "instance,horizon,nodes,grid,sup_inf,engine_C0,inf_sup_V0,engine_V0\n";
      double worst = 0.0;
      for (std::size_t k = 0; k < cfg.oracle_instances; ++k) {
        const OracleInstance inst = random_oracle_instance(cfg.study.seed, k);
        const ValuationOutput v = value_multiprior(inst.lattice, inst.cash_flow, inst.rm, inst.family, inst.grid);
        const OracleResult o = snell_bruteforce(inst.lattice, inst.cash_flow, v.R, inst.family, inst.grid, 0, cfg.oracle_cap);
        const double minimax_v0 = v.R0() - o.inf_sup[0];
        worst = std::max({worst, std::abs(o.sup_inf[0] - v.C0()), std::abs(minimax_v0 - v.V0())});
        csv += std::to_string(k) + "," + std::to_string(inst.lattice.horizon()) + "," +
               std::to_string(inst.lattice.size()) + "," + std::to_string(inst.grid.size()) + "," +
               format_number(o.sup_inf[0]) + "," + format_number(v.C0()) + "," + format_number(minimax_v0) + "," +
               format_number(v.V0()) + "\n";
      }
      out.write("oracle_check.csv", csv);
      manifest += "derived.oracle.max_abs_diff = " + format_number(worst) + "\n";
      log << "oracle-check: " << cfg.oracle_instances << " lattices, max |engine - oracle| = " << format_number(worst, 3)
          << "\n";
      if (!(worst < 1e-12)) status = kNumericalFailure;
    } else if (cfg.command == "validate") {
      ScenarioLattice lat;
      if (cfg.lattice_path.empty()) {
        lat = detail::demo_lattice();
      } else {
        std::ifstream in(cfg.lattice_path);
        if (!in) throw ConfigError("cannot open lattice '" + cfg.lattice_path + "'");
        lat = read_lattice(in);
      }
      lat.validate();
      if (!lat.has_payload("X")) throw ConfigError("lattice needs a payload 'X' holding the cash flow");
      const CashFlowSpec cf(lat, payload_process(lat, "X", 1, lat.horizon()));
      const LatticeFamily fam = tilt_family("X");
      const std::vector<Theta> grid{{-0.5}, {0.0}, {0.5}};
      const ValuationOutput v = value_multiprior(lat, cf, cfg.study.rm, fam, grid);
      std::ostringstream fixture;
      write_lattice(fixture, lat);
      out.write("lattice.tsv", fixture.str());
      out.write("valuation.txt", detail::valuation_record(v));
      Table1Row row{0, 0, cfg.study.rm.level, v.lower, v.upper, lat.size(), cfg.study.seed, false, 0};
      out.write("bounds.csv", detail::bounds_header() + detail::bounds_row(row));
      log << "lattice ok: T=" << lat.horizon() << ", " << lat.size() << " nodes; V0 = " << format_number(v.V0(), 6)
          << " in [" << format_number(v.lower, 6) << ", " << format_number(v.upper, 6) << "]\n";
      if (!(v.lower <= v.V0() + 1e-12 && v.V0() <= v.upper + 1e-12)) status = kNumericalFailure;
    }
    manifest += "files =";
    for (const auto& f : out.files()) manifest += " " + f;
    out.write("manifest.txt", manifest + "\n");
    return status;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
}

}  // namespace ambival
