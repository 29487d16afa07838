#pragma once

#include <map>
#include <string>

#include "hiercontrol/fixedpoint.hpp"

namespace hiercontrol {

/// Analytic data profile. Kinds:
///   zero
///   sine      amplitude * sin(mode pi x) [* sin(mode_y pi y)] * exp(-decay t)
///   gaussian  amplitude * 4x(1-x) [* 4y(1-y)] * exp(-|x - center|^2 / (2 width^2)) * exp(-decay t)
///   csv       node values read from `path` (columns x[,y],value or t,x[,y],value)
struct ProfileSpec {
  std::string kind = "zero";
  double amplitude = 0.0;
  double mode = 1.0;
  double mode_y = 1.0;
  double decay = 0.0;
  double center = 0.5;
  double center_y = 0.5;
  double width = 0.1;
  std::string path;

  bool operator==(const ProfileSpec&) const = default;
};

struct RegionPair {
  Region outer;
  Region inner;
  bool operator==(const RegionPair&) const = default;
};

struct Tolerances {
  double nash_tol = 1e-10;
  int nash_max_iter = 200;
  double nash_damping = 1.0;
  double coupled_tol = 1e-12;
  int coupled_max_iter = 500;
  double cg_tol = 1e-8;
  int cg_max = 500;
  double outer_tol = 1e-8;
  int max_outer = 10;
  double outer_damping = 1.0;
  int refreshes = 2;
  double data_budget = 1.0;

  bool operator==(const Tolerances&) const = default;
};

struct Scenario {
  std::string name = "scenario";
  int dim = 1;
  int cells = 64;
  double T = 1.0;
  int steps = 128;

  RegionPair leader;
  RegionPair follower1;
  RegionPair follower2;
  RegionPair observation;

  double mu1 = 1.0, mu2 = 1.0;
  double nu1 = 1.0, nu2 = 1.0;
  double carleman_mu = 2.0;
  /// 0 selects the default lambda.
  double carleman_lambda = 0.0;
  double epsilon = 1e-3;

  std::string preset = "heat";
  std::map<std::string, double> params;
  double rho0 = 0.1;

  ProfileSpec y0;
  ProfileSpec target1;
  ProfileSpec target2;

  Tolerances tol;
  double control_bound = 1.0;
  unsigned seed = 42;

  bool operator==(const Scenario&) const = default;
};

/// Parse and validate. Throws ParseError (with line/column) or ConfigError naming the key.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::string& path);
/// Canonical serialization; parse_scenario(emit_scenario(s)) == s.
std::string emit_scenario(const Scenario& s);
void validate_scenario(const Scenario& s);

Field make_field(const ProfileSpec& p, const GridPtr& grid, const std::string& base_dir = ".");
SpaceTimeField make_trajectory(const ProfileSpec& p, const GridPtr& grid, const TimeGrid& time,
                               const std::string& base_dir = ".");

HierarchicProblem build_problem(const Scenario& s, const std::string& base_dir = ".");
CarlemanWeights build_weights(const Scenario& s, const HierarchicProblem& prob);
FixedPointOptions fixed_point_options(const Scenario& s);

}  // namespace hiercontrol
