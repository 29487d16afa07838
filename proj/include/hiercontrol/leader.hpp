#pragma once

#include <array>
#include <memory>
#include <vector>

#include "hiercontrol/problem.hpp"
#include "hiercontrol/weights.hpp"

namespace hiercontrol {

struct CoupledOptions {
  /// Relative update tolerance of the forward/backward Picard sweeps.
  double tol = 1e-12;
  int max_iter = 500;
  /// Solve the coupled systems as one space-time sparse system instead.
  bool monolithic = false;
};

/// Largest grid for which the monolithic space-time path is offered.
inline constexpr int kMonolithicMaxCells = 32;
inline constexpr int kMonolithicMaxSteps = 64;

/// Frozen linear coupled system plus Carleman weights; immutable after construction.
///
/// Holds a reference to the problem, which must outlive the context.
class GramianContext {
 public:
  GramianContext(const HierarchicProblem& prob, LinearCoefficients coeffs, CarlemanWeights weights,
                 CoupledOptions opts = {});

  const HierarchicProblem& problem() const { return *prob_; }
  const LinearCoefficients& coefficients() const { return coeffs_; }
  const CarlemanWeights& weights() const { return weights_; }
  const CoupledOptions& options() const { return opts_; }
  const StepSolver& state_steps() const { return *state_; }
  const StepSolver& follower_steps() const { return *follower_; }

  /// e^{2 lambda nu} beta^7 per slice; zero at slices 0 and M.
  const Vector& control_weight(int m) const { return weight_[m]; }
  /// log of the same, -inf at slices 0 and M.
  const Vector& log_control_weight(int m) const { return log_weight_[m]; }

  /// Terminal state of the coupled system with u = 0 and the problem's data.
  const Field& free_terminal() const { return free_terminal_; }

  bool monolithic_allowed() const;

 private:
  const HierarchicProblem* prob_;
  LinearCoefficients coeffs_;
  CarlemanWeights weights_;
  CoupledOptions opts_;
  std::unique_ptr<StepSolver> state_;
  std::unique_ptr<StepSolver> follower_;
  std::vector<Vector> weight_;
  std::vector<Vector> log_weight_;
  Field free_terminal_;
};

struct CoupledPrimal {
  SpaceTimeField y;
  std::array<SpaceTimeField, 2> p;
  int iterations = 0;
};

struct CoupledAdjoint {
  SpaceTimeField phi;
  std::array<SpaceTimeField, 2> theta;
  int iterations = 0;
};

/// y forward with source xi_0 u + sum (1/mu_k) xi_k^2 p_k, p_k backward with
/// source -nu_k xi_* (y - y_{k,d}) (targets only when `with_targets`).
CoupledPrimal solve_coupled_primal(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                                   bool with_targets);
CoupledPrimal solve_coupled_primal(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                                   bool with_targets, bool monolithic);

/// phi backward from phi_T with source -xi_* (nu_1 theta_1 + nu_2 theta_2),
/// theta_k forward from 0 with source (1/mu_k) xi_k^2 phi. Exact transpose of the primal.
CoupledAdjoint solve_coupled_adjoint(const GramianContext& ctx, const Field& phi_T);
CoupledAdjoint solve_coupled_adjoint(const GramianContext& ctx, const Field& phi_T, bool monolithic);

/// u = e^{2 lambda nu} beta^7 xi_0 phi.
SpaceTimeField control_from_adjoint(const GramianContext& ctx, const SpaceTimeField& phi);

/// Lambda phi_T = y(T) with u from the adjoint of phi_T, y0 = 0, no targets.
Field gramian_apply(const GramianContext& ctx, const Field& phi_T);

struct LeaderOptions {
  double epsilon = 1e-3;
  double cg_tol = 1e-8;
  int cg_max = 500;
  /// CG stops with a ConditioningError when the best residual does not improve for this many iterations.
  int stagnation_window = 20;
};

struct LeaderSolution {
  SpaceTimeField u;
  Field phi_T;
  SpaceTimeField phi;
  CoupledPrimal state;
  double terminal_norm = 0.0;
  double free_terminal_norm = 0.0;
  double J_eps_value = 0.0;
  double J_eps_zero = 0.0;
  /// Relative residuals ||(Lambda + eps) phi_T + b|| / ||b||, starting at 1.
  std::vector<double> cg_residuals;
  double epsilon = 0.0;
};

/// 1/2 <e^{-2 lambda nu} beta^{-7} u, u>_Q over interior slices + ||terminal||^2 / (2 eps).
double penalized_functional(const GramianContext& ctx, const SpaceTimeField& u, const Field& terminal, double eps);

/// CG on (Lambda + eps I) phi_T = -b, then u = e^{2 lambda nu} beta^7 xi_0 phi.
LeaderSolution solve_leader(const GramianContext& ctx, const Field& y0, const std::array<SpaceTimeField, 2>& targets,
                            const LeaderOptions& opts);
/// Uses the problem's own y0 and targets.
LeaderSolution solve_leader(const GramianContext& ctx, const LeaderOptions& opts);

}  // namespace hiercontrol
