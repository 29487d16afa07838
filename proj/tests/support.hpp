#pragma once

#include <random>
#include <string>

#include "hiercontrol/scenario.hpp"

namespace testing {

inline std::string scenario_path(const std::string& file) { return std::string(HIERCONTROL_SCENARIO_DIR) + "/" + file; }

inline hiercontrol::Scenario scenario(const std::string& file) {
  return hiercontrol::load_scenario(scenario_path(file));
}

inline hiercontrol::HierarchicProblem problem(const std::string& file) {
  return hiercontrol::build_problem(scenario(file), HIERCONTROL_SCENARIO_DIR);
}

inline hiercontrol::HierarchicProblem problem(const hiercontrol::Scenario& s) {
  return hiercontrol::build_problem(s, HIERCONTROL_SCENARIO_DIR);
}

/// Random trajectory on interior nodes of slices 1..M.
inline hiercontrol::SpaceTimeField random_trajectory(const hiercontrol::GridPtr& g, const hiercontrol::TimeGrid& time,
                                                     std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto f = hiercontrol::SpaceTimeField::zeros(g, time);
  for (int m = 1; m < f.num_slices(); ++m)
    for (int k : g->interior_nodes()) f.slices[m][k] = n(rng);
  return f;
}

inline hiercontrol::Field random_field(const hiercontrol::GridPtr& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto f = hiercontrol::Field::zeros(g);
  for (int k : g->interior_nodes()) f.values[k] = n(rng);
  return f;
}

inline double rel(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

}  // namespace testing
