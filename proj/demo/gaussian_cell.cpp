// One Table-1 cell of the chain-ladder study at reduced sample size.
#include <iostream>

#include "ambival/ambival.hpp"

using namespace ambival;

int main(int argc, char** argv) {
  CaseConfig cfg;
  cfg.p = argc > 1 ? std::stod(argv[1]) : 0.5;
  cfg.rm.level = argc > 2 ? std::stod(argv[2]) : 0.05;
  cfg.n = 20000;
  cfg.m_sphere = 64;

  const GaussianModel model;
  const CaseStudy study = prepare_case_study(model, cfg);
  const ParamRegion region = case_region(study, cfg.p);
  std::cout << "cloud mean:";
  for (int j = 0; j < 4; ++j) std::cout << " " << format_fixed(study.cloud.mu(j), 4);
  std::cout << "\n";

  const Case1Result c1 = case1_bounds(cfg, model, region, study.paths);
  std::cout << "case 1: [" << format_fixed(c1.lower, 3) << ", " << format_fixed(c1.upper, 3) << "]\n";
  cfg.case_id = 2;
  const Case2Result c2 = case2_value(cfg, model, region, study.paths, {c1.lower_theta});
  std::cout << "case 2: V0 = " << format_fixed(c2.value, 3) << ", upper " << format_fixed(c2.upper, 3)
            << ", beta1 in [" << format_fixed(c2.beta1_min, 3) << ", " << format_fixed(c2.beta1_max, 3) << "]\n";
}
