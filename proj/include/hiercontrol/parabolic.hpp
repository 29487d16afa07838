#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseLU>

#include "hiercontrol/discretization.hpp"
#include "hiercontrol/nonlinearity.hpp"

namespace hiercontrol {

/// Frozen coefficients at one time node.
///
/// State operator:    L = -div(b grad) + f . grad + f0
/// Follower operator: P = -div(B grad) - g . grad - g0
/// (the follower adjoints solve -p_t + P p = source backward in time).
struct CoefficientSlice {
  SymTensorField b;
  VectorField f;
  Vector f0;
  SymTensorField B;
  VectorField g;
  Vector g0;

  static CoefficientSlice constant(int nodes, double diffusion, double reaction = 0.0);
};

struct LinearCoefficients {
  GridPtr grid;
  TimeGrid time;
  std::vector<CoefficientSlice> slices;
  double rho0 = 0.1;
  /// All slices equal; allows one factorization for every step.
  bool time_independent = false;

  static LinearCoefficients constant(GridPtr grid, const TimeGrid& time, const CoefficientSlice& s,
                                     double rho0 = 0.1);

  /// Sampled sup-norm budget sum |b| + |B| + |f| + |g| + |f0| + |g0|.
  double budget() const;

  SparseMatrix state_operator(int m) const;
  SparseMatrix follower_operator(int m) const;
};

/// Assemble -div(b grad) + f . grad + f0 on interior unknowns.
SparseMatrix assemble_operator(const SpatialGrid& grid, const SymTensorField& b, const VectorField& f,
                               const Vector& f0, double rho0);

/// Which family of step operators F_m = I + tau K_m a solve uses.
/// state:    K_m = L_m     (forward state; backward = its adjoint)
/// follower: K_m = P_m^T   (forward sensitivities; backward = follower adjoints with P_m)
enum class Family { state, follower };

enum class BackwardForm { adjoint_of_forward, shifted_terminal };

/// Factorizations of F_m for m = 0..M.
class StepSolver {
 public:
  StepSolver(const LinearCoefficients& c, Family family);

  /// F_m^{-1} rhs
  Vector solve(int m, const Vector& rhs) const;
  /// F_m^{-T} rhs
  Vector solve_transpose(int m, const Vector& rhs) const;

  const GridPtr& grid() const { return grid_; }
  const TimeGrid& time() const { return time_; }

 private:
  using LU = Eigen::SparseLU<SparseMatrix>;
  const LU& lu(int m) const { return *factors_[time_independent_ ? 0 : m]; }

  GridPtr grid_;
  TimeGrid time_;
  bool time_independent_;
  std::vector<std::unique_ptr<LU>> factors_;
};

/// Backward Euler: F_m y^m = y^{m-1} + tau s^m, m = 1..M.
SpaceTimeField solve_forward_linear(const LinearCoefficients& c, const SpaceTimeField& source, const Field& y0,
                                    Family family = Family::state);
SpaceTimeField forward(const StepSolver& steps, const SpaceTimeField& source, const Field& y0);

/// adjoint_of_forward: F_m^T p^m = p^{m+1} + tau s^m for m = M..1 with
/// p^{M+1} = terminal and p^0 = p^1, so that
///   <y^M, terminal> - <y^0, p^0> = <s_y, p>_Q - <y, s_p>_Q
/// holds exactly against `forward`.
/// shifted_terminal: p^M = terminal and F_m^T p^m = p^{m+1} + tau s^m for m = M-1..0.
SpaceTimeField solve_backward_linear(const LinearCoefficients& c, const SpaceTimeField& source,
                                     const Field& terminal, BackwardForm form = BackwardForm::adjoint_of_forward,
                                     Family family = Family::state);
SpaceTimeField backward(const StepSolver& steps, const SpaceTimeField& source, const Field& terminal,
                        BackwardForm form = BackwardForm::adjoint_of_forward);

/// Coefficients of the quasi-linear operator frozen at a state slice z:
/// b = a(z, grad z), f = int_0^1 grad_zeta f(sz, s grad z) ds, f0 = int_0^1 f_y(sz, s grad z) ds.
struct FrozenCoefficients {
  SymTensorField a;
  VectorField F2;
  Vector F1;
};
FrozenCoefficients freeze(const Nonlinearity& nl, const Field& z);

struct QuasilinearOptions {
  /// Within-step refreshes of the frozen coefficients.
  int refreshes = 2;
  /// Keep refreshing until the relative change drops below `tol` (capped at max_refreshes).
  bool converge = false;
  double tol = 1e-13;
  int max_refreshes = 50;
  double blowup_ratio = 10.0;
};

/// Lagged-coefficient backward Euler for y_t - div(a(y,grad y) grad y) + f(y, grad y) = source.
SpaceTimeField solve_forward_quasilinear(const Nonlinearity& nl, const SpaceTimeField& source, const Field& y0,
                                         const QuasilinearOptions& opts = {});

/// Cutoffs multiplying the leader and follower controls.
struct ControlCutoffs {
  Vector xi0, xi1, xi2;
};

SpaceTimeField control_source(const ControlCutoffs& cut, const SpaceTimeField& u, const SpaceTimeField& v1,
                              const SpaceTimeField& v2);

SpaceTimeField solve_forward_quasilinear(const Nonlinearity& nl, const SpaceTimeField& u, const SpaceTimeField& v1,
                                         const SpaceTimeField& v2, const ControlCutoffs& cut, const Field& y0,
                                         const QuasilinearOptions& opts = {});

}  // namespace hiercontrol
