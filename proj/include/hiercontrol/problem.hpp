#pragma once

#include <array>
#include <string>
#include <vector>

#include "hiercontrol/parabolic.hpp"

namespace hiercontrol {

/// A full hierarchic control instance with one leader and two followers.
struct HierarchicProblem {
  GridPtr grid;
  TimeGrid time;
  /// xi_0 on (omega_0, inner omega~_0)
  CutoffRegion leader;
  /// xi_1, xi_2
  std::array<CutoffRegion, 2> followers;
  /// xi_* with outer omega and inner omega'
  CutoffRegion observation;
  /// control costs mu_k > 0
  std::array<double, 2> mu{1.0, 1.0};
  /// tracking weights nu_k >= 0
  std::array<double, 2> nu{1.0, 1.0};
  std::array<SpaceTimeField, 2> targets;
  Field y0;
  Nonlinearity nl;
  /// Advisory bound on control sizes; only used for warnings.
  double control_bound = 1.0;
  QuasilinearOptions forward_options;

  /// Throws ConfigError/GeometryError on violated invariants.
  void validate() const;
  /// Non-fatal diagnostics (boundary traces of targets, control bound).
  std::vector<std::string> warnings() const;

  ControlCutoffs cutoffs() const;
  const Vector& xi_star() const { return observation.xi.values; }
  const Vector& xi(int k) const { return k == 0 ? leader.xi.values : followers[k - 1].xi.values; }
  /// Indicator of the follower region omega_k (k = 1, 2).
  Vector follower_indicator(int k) const { return followers[k - 1].outer_indicator(); }

  SpaceTimeField zeros() const { return SpaceTimeField::zeros(grid, time); }
};

/// Forward map control-source -> state, dispatching to a cached linear solver
/// when the dynamics are linear and to the quasi-linear scheme otherwise.
class ForwardModel {
 public:
  explicit ForwardModel(const HierarchicProblem& prob);

  SpaceTimeField solve(const SpaceTimeField& source, const Field& y0) const;
  SpaceTimeField solve(const SpaceTimeField& u, const SpaceTimeField& v1, const SpaceTimeField& v2) const;

 private:
  const HierarchicProblem& prob_;
  std::unique_ptr<StepSolver> linear_;
};

}  // namespace hiercontrol
