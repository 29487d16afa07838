#include "hiercontrol/nash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

namespace {

double elem(const Sym2& s, int i, int j) {
  if (i != j) return s.xy;
  return i == 0 ? s.xx : s.yy;
}

CoefficientSlice linearize_slice(const Nonlinearity& nl, const Field& z) {
  const auto& g = *z.grid;
  const int n = g.num_nodes();
  const int dim = g.dim();
  const VectorField dz = gradient(z);
  const FrozenCoefficients fc = freeze(nl, z);

  CoefficientSlice s;
  s.b = fc.a;
  s.f = fc.F2;
  s.f0 = fc.F1;
  s.B = SymTensorField::constant(n, 0.0);
  s.g = VectorField::zeros(n);
  s.g0 = Vector::Zero(n);
  VectorField fz = VectorField::zeros(n);

  for (int k = 0; k < n; ++k) {
    const double y = z.values[k];
    const Vec2 grad{dz.x[k], dim == 2 ? dz.y[k] : 0.0};
    const Sym2 a = nl.a(y, grad);
    const Sym2 ay = nl.a_y(y, grad);
    const auto az = nl.a_zeta(y, grad);
    const Vec2 fzeta = nl.f_zeta(y, grad);

    double c[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        for (int l = 0; l < dim; ++l) c[i][j] += 0.5 * grad[l] * (elem(az[j], l, i) + elem(az[i], l, j));

    s.B.xx[k] = a.xx + c[0][0];
    if (dim == 2) {
      s.B.xy[k] = a.xy + c[0][1];
      s.B.yy[k] = a.yy + c[1][1];
    }
    for (int j = 0; j < dim; ++j) {
      double e = fzeta[j];
      for (int i = 0; i < dim; ++i) e -= elem(ay, i, j) * grad[i];
      (j == 0 ? s.g.x : s.g.y)[k] = e;
    }
    fz.x[k] = fzeta[0];
    fz.y[k] = fzeta[1];
    s.g0[k] = -nl.f_y(y, grad);
  }
  // divergence of the sampled f_zeta field
  const VectorField dx = gradient(Field{z.grid, fz.x});
  s.g0 += dx.x;
  if (dim == 2) s.g0 += gradient(Field{z.grid, fz.y}).y;
  return s;
}

double sup_rel_change(const SpaceTimeField& a, const SpaceTimeField& b) { return norm(a - b); }

}  // namespace

LinearCoefficients coefficients_from_state(const Nonlinearity& nl, const SpaceTimeField& y) {
  LinearCoefficients c;
  c.grid = y.grid;
  c.time = y.time;
  c.rho0 = 0.5 * nl.rho0;
  c.time_independent = nl.linear;
  const int slices = nl.linear ? 1 : y.num_slices();
  c.slices.reserve(y.num_slices());
  for (int m = 0; m < slices; ++m) {
    CoefficientSlice s = linearize_slice(nl, nl.linear ? Field::zeros(y.grid) : y.slice(m));
    // ellipticity of A is checked against rho0/2
    try {
      assemble_divergence_operator(*y.grid, s.B, c.rho0);
    } catch (const CoefficientError& e) {
      std::ostringstream msg;
      msg << "linearized principal part at slice " << m << ": " << e.what()
          << "; the state is too large for the small-data regime";
      throw CoefficientError(msg.str(), e.node());
    }
    c.slices.push_back(std::move(s));
  }
  if (nl.linear) c.slices.assign(y.num_slices(), c.slices.front());
  return c;
}

SpaceTimeField follower_adjoint(const HierarchicProblem& prob, const StepSolver& follower, const SpaceTimeField& y,
                                int k) {
  SpaceTimeField src = (y - prob.targets[k - 1]).times(prob.xi_star());
  src *= -prob.nu[k - 1];
  return backward(follower, src, Field::zeros(prob.grid), BackwardForm::adjoint_of_forward);
}

SpaceTimeField sensitivity(const HierarchicProblem& prob, const LinearCoefficients& lin, const SpaceTimeField& w,
                           int k) {
  StepSolver follower(lin, Family::follower);
  return forward(follower, w.times(prob.xi(k)), Field::zeros(prob.grid));
}

NashSolution compute_nash(const HierarchicProblem& prob, const SpaceTimeField& u, const NashOptions& opts) {
  prob.validate();
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ConfigError("Nash damping must lie in (0,1]");
  const ForwardModel model(prob);
  const ControlCutoffs cut = prob.cutoffs();
  const Vector q1 = cut.xi1.cwiseProduct(cut.xi1) / prob.mu[0];
  const Vector q2 = cut.xi2.cwiseProduct(cut.xi2) / prob.mu[1];
  const SpaceTimeField leader_src = u.times(cut.xi0);

  NashSolution sol;
  sol.p = {prob.zeros(), prob.zeros()};
  double theta = opts.damping;
  int halvings = 0;
  double previous = std::numeric_limits<double>::infinity();
  std::unique_ptr<StepSolver> follower_linear;
  bool converged = false;

  for (int it = 1; it <= opts.max_iter; ++it) {
    SpaceTimeField src = leader_src;
    src += sol.p[0].times(q1);
    src += sol.p[1].times(q2);
    const SpaceTimeField y = model.solve(src, prob.y0);

    std::unique_ptr<StepSolver> local;
    const StepSolver* follower;
    if (prob.nl.linear) {
      if (!follower_linear)
        follower_linear = std::make_unique<StepSolver>(coefficients_from_state(prob.nl, y), Family::follower);
      follower = follower_linear.get();
    } else {
      local = std::make_unique<StepSolver>(coefficients_from_state(prob.nl, y), Family::follower);
      follower = local.get();
    }
    std::array<SpaceTimeField, 2> fresh = {follower_adjoint(prob, *follower, y, 1),
                                           follower_adjoint(prob, *follower, y, 2)};
    double delta = 0.0, scale = 0.0;
    for (int k = 0; k < 2; ++k) {
      delta = std::max(delta, sup_rel_change(fresh[k], sol.p[k]));
      scale = std::max({scale, norm(fresh[k]), norm(sol.p[k])});
    }
    const double rel = scale > 0.0 ? delta / scale : 0.0;
    sol.update_history.push_back(rel);
    sol.picard_iterations = it;
    sol.final_update_norm = rel;
    if (delta == 0.0 || rel <= opts.tol) {
      sol.p = std::move(fresh);
      converged = true;
      break;
    }
    if (rel > previous && halvings < opts.max_halvings) {
      theta *= 0.5;
      ++halvings;
    }
    previous = rel;
    for (int k = 0; k < 2; ++k) {
      sol.p[k] *= 1.0 - theta;
      sol.p[k].axpy(theta, fresh[k]);
    }
  }
  sol.damping = theta;
  if (!converged) {
    std::ostringstream msg;
    msg << "Nash Picard iteration did not converge in " << opts.max_iter << " sweeps (last relative update "
        << sol.final_update_norm << ")";
    throw NonConvergenceError(msg.str(), sol.update_history);
  }

  SpaceTimeField src = leader_src;
  src += sol.p[0].times(q1);
  src += sol.p[1].times(q2);
  sol.y = model.solve(src, prob.y0);
  sol.v[0] = sol.p[0].times(cut.xi1 / prob.mu[0]);
  sol.v[1] = sol.p[1].times(cut.xi2 / prob.mu[1]);
  return sol;
}

double cost_from_state(const HierarchicProblem& prob, const SpaceTimeField& y, const SpaceTimeField& vk, int k) {
  const SpaceTimeField dev = y - prob.targets[k - 1];
  const double control = inner_product(vk.times(prob.follower_indicator(k)), vk);
  const double tracking = inner_product(dev.times(prob.xi_star()), dev);
  return 0.5 * prob.mu[k - 1] * control + 0.5 * prob.nu[k - 1] * tracking;
}

double evaluate_cost(const HierarchicProblem& prob, const SpaceTimeField& u, const SpaceTimeField& v1,
                     const SpaceTimeField& v2, int k) {
  if (k != 1 && k != 2) throw ConfigError("follower index must be 1 or 2");
  const ForwardModel model(prob);
  const SpaceTimeField y = model.solve(u, v1, v2);
  return cost_from_state(prob, y, k == 1 ? v1 : v2, k);
}

double directional_derivative(const HierarchicProblem& prob, const NashSolution& nash, const LinearCoefficients& lin,
                              const SpaceTimeField& w, int k) {
  const SpaceTimeField yk = sensitivity(prob, lin, w, k);
  const SpaceTimeField dev = nash.y - prob.targets[k - 1];
  return prob.mu[k - 1] * inner_product(nash.v[k - 1].times(prob.follower_indicator(k)), w) +
         prob.nu[k - 1] * inner_product(dev.times(prob.xi_star()), yk);
}

std::pair<double, double> gateaux_residual(const HierarchicProblem& prob, const SpaceTimeField& u, NashSolution& nash,
                                           const std::vector<SpaceTimeField>& directions) {
  (void)u;
  const LinearCoefficients lin = coefficients_from_state(prob.nl, nash.y);
  std::array<double, 2> r{0.0, 0.0};
  for (int k = 1; k <= 2; ++k) {
    const double J = cost_from_state(prob, nash.y, nash.v[k - 1], k);
    for (const auto& w : directions) {
      r[k - 1] = std::max(r[k - 1], std::abs(directional_derivative(prob, nash, lin, w, k)) / (1.0 + std::abs(J)));
    }
  }
  nash.residuals = r;
  return {r[0], r[1]};
}

}  // namespace hiercontrol
