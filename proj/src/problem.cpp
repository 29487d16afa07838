#include "hiercontrol/problem.hpp"

#include <cmath>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

void HierarchicProblem::validate() const {
  if (!grid) throw ConfigError("problem has no grid");
  for (int k = 0; k < 2; ++k) {
    if (!(mu[k] > 0.0) || !std::isfinite(mu[k])) {
      throw ConfigError("control cost mu_" + std::to_string(k + 1) + " must be positive");
    }
    if (!(nu[k] >= 0.0) || !std::isfinite(nu[k])) {
      throw ConfigError("tracking weight nu_" + std::to_string(k + 1) + " must be non-negative");
    }
    if (!targets[k].grid || !(*targets[k].grid == *grid) || !(targets[k].time == time) ||
        targets[k].num_slices() != time.steps() + 1) {
      throw ShapeError("target " + std::to_string(k + 1) + " does not match the problem grids");
    }
  }
  if (!y0.grid || !(*y0.grid == *grid)) throw ShapeError("initial datum does not match the problem grid");
  if (!y0.is_dirichlet()) throw ConfigError("initial datum must vanish on the boundary");
  if (!regions_intersect(leader.inner, observation.inner, grid->dim())) {
    throw GeometryError("assumption violated: the leader inner region and the observation inner region (omega') "
                        "must intersect");
  }
  if (!(control_bound > 0.0)) throw ConfigError("control_bound must be positive");
}

std::vector<std::string> HierarchicProblem::warnings() const {
  std::vector<std::string> out;
  for (int k = 0; k < 2; ++k) {
    const Vector& last = targets[k].slices.back();
    double trace = 0.0;
    for (int n = 0; n < grid->num_nodes(); ++n)
      if (grid->is_boundary(n)) trace = std::max(trace, std::abs(last[n]));
    if (trace > 0.0) {
      std::ostringstream msg;
      msg << "target " << k + 1 << " does not vanish on the boundary at t=T (max trace " << trace << ")";
      out.push_back(msg.str());
    }
  }
  return out;
}

ControlCutoffs HierarchicProblem::cutoffs() const {
  return {leader.xi.values, followers[0].xi.values, followers[1].xi.values};
}

ForwardModel::ForwardModel(const HierarchicProblem& prob) : prob_(prob) {
  if (prob.nl.linear) {
    const FrozenCoefficients fc = freeze(prob.nl, Field::zeros(prob.grid));
    CoefficientSlice s;
    s.b = fc.a;
    s.f = fc.F2;
    s.f0 = fc.F1;
    s.B = fc.a;
    s.g = fc.F2;
    s.g0 = -fc.F1;
    auto c = LinearCoefficients::constant(prob.grid, prob.time, s, prob.nl.rho0);
    linear_ = std::make_unique<StepSolver>(c, Family::state);
  }
}

SpaceTimeField ForwardModel::solve(const SpaceTimeField& source, const Field& y0) const {
  if (linear_) return forward(*linear_, source, y0);
  return solve_forward_quasilinear(prob_.nl, source, y0, prob_.forward_options);
}

SpaceTimeField ForwardModel::solve(const SpaceTimeField& u, const SpaceTimeField& v1,
                                   const SpaceTimeField& v2) const {
  return solve(control_source(prob_.cutoffs(), u, v1, v2), prob_.y0);
}

}  // namespace hiercontrol
