#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hiercontrol/leader.hpp"
#include "hiercontrol/nash.hpp"

namespace hiercontrol {

struct IntegralCoefficients {
  /// int_0^1 f_y(s z, s grad z) ds per slice
  std::vector<Vector> F1;
  /// int_0^1 grad_zeta f(s z, s grad z) ds per slice
  std::vector<VectorField> F2;
};

IntegralCoefficients integral_coefficients(const Nonlinearity& nl, const SpaceTimeField& z);

/// Focus region used for eta: the leader's inner region intersected with omega'.
Region default_focus(const HierarchicProblem& prob);

/// Weights on the problem grid with the given (mu, lambda); lambda <= 0 selects the default.
CarlemanWeights default_weights(const HierarchicProblem& prob, double mu = 2.0, double lambda = 0.0);

/// Linear coupled system frozen at z.
GramianContext linearize_at(const HierarchicProblem& prob, const SpaceTimeField& z,
                            std::optional<CarlemanWeights> weights = std::nullopt, const CoupledOptions& opts = {});

struct FixedPointOptions {
  LeaderOptions leader;
  CoupledOptions coupled;
  NashOptions nash;
  double outer_tol = 1e-8;
  double damping = 1.0;
  double damping_floor = 0.125;
  int max_outer = 10;
  /// Advisory bound on ||y0|| + ||y_1d|| + ||y_2d||.
  double data_budget = 1.0;
  /// Random directions used for the finalization residual.
  int residual_directions = 10;
  unsigned seed = 12345u;
};

struct FixedPointReport {
  int iterations = 0;
  std::vector<double> update_norms;
  /// Linearized terminal norm of each outer iteration.
  std::vector<double> linearized_terminal_norms;
  SpaceTimeField u, y;
  std::array<SpaceTimeField, 2> p, v;
  /// ||y(T)|| of the quasi-linear Nash state at the final u.
  double terminal_norm = 0.0;
  double linearized_terminal_norm = 0.0;
  double J_eps_value = 0.0;
  std::array<double, 2> nash_residuals{0.0, 0.0};
  int nash_iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Damped Picard on z: linearize, solve for the leader, update the state.
/// Never throws on outer non-convergence; inspect `converged`.
FixedPointReport solve_hierarchic(const HierarchicProblem& prob, const CarlemanWeights& weights,
                                  const FixedPointOptions& opts = {});

/// Deterministic random directions supported in the follower region omega_k.
std::vector<SpaceTimeField> random_directions(const HierarchicProblem& prob, int k, int count, unsigned seed);

}  // namespace hiercontrol
