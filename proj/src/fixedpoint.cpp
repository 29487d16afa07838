#include "hiercontrol/fixedpoint.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

IntegralCoefficients integral_coefficients(const Nonlinearity& nl, const SpaceTimeField& z) {
  IntegralCoefficients out;
  for (int m = 0; m < z.num_slices(); ++m) {
    FrozenCoefficients fc = freeze(nl, z.slice(m));
    out.F1.push_back(std::move(fc.F1));
    out.F2.push_back(std::move(fc.F2));
  }
  return out;
}

Region default_focus(const HierarchicProblem& prob) {
  return intersection(prob.leader.inner, prob.observation.inner);
}

CarlemanWeights default_weights(const HierarchicProblem& prob, double mu, double lambda) {
  EtaFunction eta = build_eta(prob.grid, default_focus(prob));
  const double eta_max = eta.eta.values.cwiseAbs().maxCoeff();
  if (!(lambda > 0.0)) lambda = CarlemanWeights::default_lambda(mu, eta_max, prob.time.T());
  return CarlemanWeights(std::move(eta), mu, lambda, prob.time.T());
}

GramianContext linearize_at(const HierarchicProblem& prob, const SpaceTimeField& z,
                            std::optional<CarlemanWeights> weights, const CoupledOptions& opts) {
  require_same_grid(z, prob.zeros());
  LinearCoefficients c = coefficients_from_state(prob.nl, z);
  c.rho0 = 0.5 * prob.nl.rho0;
  if (!weights) weights = default_weights(prob);
  return GramianContext(prob, std::move(c), std::move(*weights), opts);
}

std::vector<SpaceTimeField> random_directions(const HierarchicProblem& prob, int k, int count, unsigned seed) {
  std::mt19937_64 rng(seed + 7919u * static_cast<unsigned>(k));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vector ind = prob.follower_indicator(k);
  std::vector<SpaceTimeField> out;
  for (int d = 0; d < count; ++d) {
    SpaceTimeField w = prob.zeros();
    for (auto& s : w.slices)
      for (int n = 0; n < s.size(); ++n) s[n] = ind[n] * normal(rng);
    const double nw = norm(w);
    if (nw > 0.0) w *= 1.0 / nw;
    out.push_back(std::move(w));
  }
  return out;
}

FixedPointReport solve_hierarchic(const HierarchicProblem& prob, const CarlemanWeights& weights,
                                  const FixedPointOptions& opts) {
  prob.validate();
  FixedPointReport rep;
  rep.warnings = prob.warnings();
  const double data = norm(prob.y0) + norm(prob.targets[0]) + norm(prob.targets[1]);
  if (data > opts.data_budget) {
    std::ostringstream msg;
    msg << "data size " << data << " exceeds the small-data budget " << opts.data_budget;
    rep.warnings.push_back(msg.str());
  }

  const ForwardModel model(prob);
  const SpaceTimeField zero = prob.zeros();
  SpaceTimeField z = model.solve(zero, zero, zero);
  double theta = opts.damping;
  double previous = std::numeric_limits<double>::infinity();
  bool ball_warned = false;

  for (int it = 1; it <= opts.max_outer; ++it) {
    const GramianContext ctx = linearize_at(prob, z, weights, opts.coupled);
    const LeaderSolution ls = solve_leader(ctx, prob.y0, prob.targets, opts.leader);
    const CoupledPrimal cp = solve_coupled_primal(ctx, ls.u, prob.y0, true);
    SpaceTimeField next = z;
    next *= 1.0 - theta;
    next.axpy(theta, cp.y);
    const double update = norm(next - z);
    rep.update_norms.push_back(update);
    rep.linearized_terminal_norms.push_back(ls.terminal_norm);
    rep.iterations = it;
    rep.u = ls.u;
    rep.linearized_terminal_norm = ls.terminal_norm;
    rep.J_eps_value = ls.J_eps_value;
    z = std::move(next);

    double zmax = 0.0;
    for (const auto& s : z.slices) zmax = std::max(zmax, s.cwiseAbs().maxCoeff());
    if (zmax > 1.0 && !ball_warned) {
      rep.warnings.push_back("outer iterate leaves the unit ball (sup norm " + std::to_string(zmax) + ")");
      ball_warned = true;
    }
    if (update < opts.outer_tol) {
      rep.converged = true;
      break;
    }
    if (update > previous) theta = std::max(opts.damping_floor, 0.5 * theta);
    previous = update;
  }

  NashSolution nash = compute_nash(prob, rep.u, opts.nash);
  std::vector<SpaceTimeField> dirs = random_directions(prob, 1, opts.residual_directions, opts.seed);
  auto more = random_directions(prob, 2, opts.residual_directions, opts.seed);
  dirs.insert(dirs.end(), more.begin(), more.end());
  const auto [r1, r2] = gateaux_residual(prob, rep.u, nash, dirs);
  rep.nash_residuals = {r1, r2};
  rep.nash_iterations = nash.picard_iterations;
  rep.terminal_norm = norm(nash.y.slice(prob.time.steps()));
  rep.y = std::move(nash.y);
  rep.p = std::move(nash.p);
  rep.v = std::move(nash.v);
  return rep;
}

}  // namespace hiercontrol
