#pragma once

#include "hiercontrol/discretization.hpp"

namespace hiercontrol {

/// Auxiliary function with a single interior critical region.
struct EtaFunction {
  Field eta;
  /// Analytic gradient at every node (x and y components).
  VectorField grad;
  /// Critical point per axis.
  double critical_x = 0.5;
  double critical_y = 0.5;
  /// Shape parameter c per axis.
  double shape_x = 0.0;
  double shape_y = 0.0;
};

/// eta(x) = x(1-x)(1 + c(x - x*)) rescaled to max 1, with c found by bisection
/// so the critical point falls inside `focus`. Tensor product in 2D.
/// Throws ConstructionError if |grad eta| < tol_grad at a node outside the focus
/// region (2D corners excepted, where the gradient vanishes by construction).
EtaFunction build_eta(GridPtr grid, const Region& focus, double tol_grad = 1e-3);

struct CoreWeights {
  double beta, nu, beta0, nu0;
};

struct TerminalWeights {
  double l, beta_bar, nu_bar, nu_bar_star, rho_hat;
};

/// The singular weight family built from eta and the parameters (lambda, mu).
class CarlemanWeights {
 public:
  CarlemanWeights(EtaFunction eta, double mu, double lambda, double T);

  const Field& eta() const { return eta_.eta; }
  const EtaFunction& eta_function() const { return eta_; }
  double mu() const { return mu_; }
  double lambda() const { return lambda_; }
  double eta_max() const { return eta_max_; }
  double T() const { return T_; }

  /// (beta, nu, beta0, nu0) at a node; throws EvaluationError unless 0 < t < T.
  CoreWeights eval(int node, double t) const;
  /// (l, beta_bar, nu_bar, nu_bar_star, rho_hat); throws unless 0 <= t < T.
  TerminalWeights eval_terminal(int node, double t) const;

  double l(double t) const;
  double nu_bar_star(double t) const;
  double rho_hat(double t) const;

  /// log(e^{2 lambda nu} beta^k) at every node; interior times only.
  Vector log_control_weight(double t, int k = 7) const;
  /// e^{2 lambda nu} beta^k at every node; interior times only.
  Vector control_weight(double t, int k = 7) const;

  /// Default lambda: e^{2 lambda nu} equals e^{-kappa} at the boundary at t = T/2.
  static double default_lambda(double mu, double eta_max, double T, double kappa = 8.0);

  /// Smallest lambda for which the weight e^{2 lambda nu} beta^k at t_1 and
  /// t_{M-1} stays below its value at T/2 at every node.
  double decay_threshold(int steps, int k = 7) const;

 private:
  void check_interior_time(double t) const;

  EtaFunction eta_;
  double mu_;
  double lambda_;
  double T_;
  double eta_max_;
};

}  // namespace hiercontrol
