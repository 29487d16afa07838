#pragma once

#include <array>
#include <utility>
#include <vector>

#include "hiercontrol/problem.hpp"

namespace hiercontrol {

/// Linearization of the quasi-linear operator at a state trajectory.
///
/// State part: b = a(y, grad y), f = F2(y), f0 = F1(y).
/// Follower part: B = A = a + c, g = e, g0 = d0 with
///   c^{ij} = 1/2 sum_l y_l (d a^{li}/d zeta_j + d a^{lj}/d zeta_i)
///   e^j    = -sum_i a^{ij}_y y_i + f_{zeta_j}
///   d0     = -f_y + div f_zeta
/// Throws CoefficientError when A drops below rho0/2.
LinearCoefficients coefficients_from_state(const Nonlinearity& nl, const SpaceTimeField& y);

struct NashOptions {
  double tol = 1e-10;
  double damping = 1.0;
  int max_iter = 200;
  int max_halvings = 5;
};

struct NashSolution {
  SpaceTimeField y;
  std::array<SpaceTimeField, 2> p;
  std::array<SpaceTimeField, 2> v;
  int picard_iterations = 0;
  double final_update_norm = 0.0;
  /// Relative update norm per Picard sweep.
  std::vector<double> update_history;
  double damping = 1.0;
  /// Filled by gateaux_residual; NaN until then.
  std::array<double, 2> residuals{std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN()};
};

/// Damped Picard iteration on the follower optimality system starting from p = 0.
/// Throws NonConvergenceError (with the update history) after max_iter sweeps.
NashSolution compute_nash(const HierarchicProblem& prob, const SpaceTimeField& u, const NashOptions& opts = {});

/// J_k(v1, v2; u) for k in {1, 2}.
double evaluate_cost(const HierarchicProblem& prob, const SpaceTimeField& u, const SpaceTimeField& v1,
                     const SpaceTimeField& v2, int k);
/// Cost from an already computed state.
double cost_from_state(const HierarchicProblem& prob, const SpaceTimeField& y, const SpaceTimeField& vk, int k);

/// Linearized state y_k[w]: forward solve with the transposed follower operator and source xi_k w.
SpaceTimeField sensitivity(const HierarchicProblem& prob, const LinearCoefficients& lin, const SpaceTimeField& w,
                           int k);

/// Follower adjoint p_k: backward with source -nu_k xi_* (y - y_{k,d}) and zero terminal datum.
SpaceTimeField follower_adjoint(const HierarchicProblem& prob, const StepSolver& follower, const SpaceTimeField& y,
                                int k);

/// mu_k <1_{omega_k} v_k, w> + nu_k <xi_* (y - y_{k,d}), y_k[w]>.
double directional_derivative(const HierarchicProblem& prob, const NashSolution& nash, const LinearCoefficients& lin,
                              const SpaceTimeField& w, int k);

/// r_k = max over directions of |dJ_k(v; w)| / (1 + |J_k|); also stored in nash.residuals.
std::pair<double, double> gateaux_residual(const HierarchicProblem& prob, const SpaceTimeField& u, NashSolution& nash,
                                           const std::vector<SpaceTimeField>& directions);

}  // namespace hiercontrol
