// Three-period trinomial run-off valued under an exponential-tilt prior set.
#include <iostream>

#include "ambival/ambival.hpp"

using namespace ambival;

int main() {
  LatticeSpec spec;
  spec.horizon = 3;
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{0.25, 0.5, 0.25}; };
  spec.payloads = {{"claims", [](const ScenarioLattice& lat, NodeId id) {
                      if (id == 0) return 0.0;
                      const auto& sib = lat.node(lat.node(id).parent).children;
                      const double k = static_cast<double>(std::find(sib.begin(), sib.end(), id) - sib.begin());
                      return 1.0 + 0.5 * (k - 1.0);
                    }}};
  const ScenarioLattice lat = build_lattice(spec);
  const CashFlowSpec cf(lat, payload_process(lat, "claims", 1, 3));
  const LatticeFamily fam = tilt_family("claims");

  std::cout << "nodes: " << lat.size() << "\n";
  for (RiskMeasureSpec rm : {RiskMeasureSpec{RiskKind::var, 0.3}, RiskMeasureSpec{RiskKind::avar, 0.3}}) {
    for (double width : {0.0, 0.5, 1.0}) {
      std::vector<Theta> grid{{-width}, {0.0}, {width}};
      const ValuationOutput v = value_multiprior(lat, cf, rm, fam, grid);
      std::cout << to_string(rm.kind) << " q=" << format_number(rm.level) << " tilt +-" << format_number(width)
                << ": V0 = " << format_fixed(v.V0(), 4) << "  bounds [" << format_fixed(v.lower, 4) << ", "
                << format_fixed(v.upper, 4) << "]  R0 = " << format_fixed(v.R0(), 4)
                << "  min risk margin = " << format_fixed(v.diagnostics.min_margin, 4) << "\n";
    }
  }

  const std::vector<Theta> grid{{-1.0}, {0.0}, {1.0}};
  const ValuationOutput v = value_multiprior(lat, cf, {RiskKind::var, 0.3}, fam, grid);
  const auto taus = optimal_default_times(lat, v);
  std::size_t defaults = 0;
  for (int s : taus[0].leaf_value) defaults += s <= lat.horizon();
  std::cout << "paths with default before run-off: " << defaults << " of " << taus[0].leaf_value.size() << "\n";
  std::cout << "liability value with replicating portfolio worth 2.5: " << format_fixed(liability_value(v.V0(), 2.5), 4)
            << "\n";
}
