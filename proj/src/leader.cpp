#include "hiercontrol/leader.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

namespace {

using Triplet = Eigen::Triplet<double>;

Vector interior_of(const GridPtr& g, const Vector& v) { return Field{g, v}.interior(); }

void add_block(std::vector<Triplet>& trip, const SparseMatrix& A, int row0, int col0, double scale = 1.0) {
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      trip.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
}

void add_diag(std::vector<Triplet>& trip, const Vector& d, int row0, int col0, double scale) {
  for (int i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) trip.emplace_back(row0 + i, col0 + i, scale * d[i]);
}

struct StepMatrices {
  std::vector<SparseMatrix> state;     // I + tau L_m
  std::vector<SparseMatrix> follower;  // I + tau P_m^T
};

StepMatrices step_matrices(const LinearCoefficients& c) {
  const int n = c.grid->num_interior();
  const int M = c.time.steps();
  SparseMatrix I(n, n);
  I.setIdentity();
  StepMatrices s;
  s.state.resize(M + 1);
  s.follower.resize(M + 1);
  for (int m = 1; m <= M; ++m) {
    s.state[m] = I + c.time.tau() * c.state_operator(m);
    s.follower[m] = I + c.time.tau() * SparseMatrix(c.follower_operator(m).transpose());
  }
  return s;
}

Vector solve_sparse(const SparseMatrix& A, const Vector& rhs) {
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverError("monolithic space-time factorization failed", -1);
  Vector x = lu.solve(rhs);
  if (!x.allFinite()) throw SolverError("monolithic space-time solve produced non-finite values", -1);
  return x;
}

SpaceTimeField unpack(const GridPtr& g, const TimeGrid& time, const Vector& x, int offset) {
  const int n = g->num_interior();
  SpaceTimeField f = SpaceTimeField::zeros(g, time);
  for (int m = 1; m <= time.steps(); ++m)
    f.slices[m] = Field::from_interior(g, x.segment(offset + (m - 1) * n, n)).values;
  return f;
}

double update_ratio(const std::array<SpaceTimeField, 2>& fresh, const std::array<SpaceTimeField, 2>& old,
                    double& delta) {
  delta = 0.0;
  double scale = 0.0;
  for (int k = 0; k < 2; ++k) {
    delta = std::max(delta, norm(fresh[k] - old[k]));
    scale = std::max({scale, norm(fresh[k]), norm(old[k])});
  }
  return scale > 0.0 ? delta / scale : 0.0;
}

CoupledPrimal primal_monolithic(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                                const std::array<SpaceTimeField, 2>* targets) {
  const auto& prob = ctx.problem();
  const auto& g = prob.grid;
  const auto& time = prob.time;
  const int n = g->num_interior();
  const int M = time.steps();
  const double tau = time.tau();
  const StepMatrices S = step_matrices(ctx.coefficients());
  const ControlCutoffs cut = prob.cutoffs();
  const std::array<Vector, 2> q = {interior_of(g, cut.xi1.cwiseProduct(cut.xi1) / prob.mu[0]),
                                   interior_of(g, cut.xi2.cwiseProduct(cut.xi2) / prob.mu[1])};
  const Vector xs = interior_of(g, prob.xi_star());
  const Vector x0 = interior_of(g, cut.xi0);

  auto Y = [&](int m) { return (m - 1) * n; };
  auto P = [&](int k, int m) { return (1 + k) * M * n + (m - 1) * n; };
  std::vector<Triplet> trip;
  Vector rhs = Vector::Zero(3 * M * n);
  for (int m = 1; m <= M; ++m) {
    add_block(trip, S.state[m], Y(m), Y(m));
    if (m > 1) add_diag(trip, Vector::Ones(n), Y(m), Y(m - 1), -1.0);
    rhs.segment(Y(m), n) = tau * x0.cwiseProduct(u.slice(m).interior());
    if (m == 1) rhs.segment(Y(m), n) += y0.interior();
    for (int k = 0; k < 2; ++k) {
      add_diag(trip, q[k], Y(m), P(k, m), -tau);
      add_block(trip, SparseMatrix(S.follower[m].transpose()), P(k, m), P(k, m));
      if (m < M) add_diag(trip, Vector::Ones(n), P(k, m), P(k, m + 1), -1.0);
      add_diag(trip, xs, P(k, m), Y(m), tau * prob.nu[k]);
      if (targets) {
        rhs.segment(P(k, m), n) = tau * prob.nu[k] * xs.cwiseProduct((*targets)[k].slice(m).interior());
      }
    }
  }
  SparseMatrix A(3 * M * n, 3 * M * n);
  A.setFromTriplets(trip.begin(), trip.end());
  const Vector x = solve_sparse(A, rhs);
  CoupledPrimal out;
  out.y = unpack(g, time, x, 0);
  out.y.slices[0] = y0.values;
  for (int k = 0; k < 2; ++k) {
    out.p[k] = unpack(g, time, x, P(k, 1));
    out.p[k].slices[0] = out.p[k].slices[1];
  }
  out.iterations = 1;
  return out;
}

CoupledAdjoint adjoint_monolithic(const GramianContext& ctx, const Field& phi_T) {
  const auto& prob = ctx.problem();
  const auto& g = prob.grid;
  const auto& time = prob.time;
  const int n = g->num_interior();
  const int M = time.steps();
  const double tau = time.tau();
  const StepMatrices S = step_matrices(ctx.coefficients());
  const ControlCutoffs cut = prob.cutoffs();
  const std::array<Vector, 2> q = {interior_of(g, cut.xi1.cwiseProduct(cut.xi1) / prob.mu[0]),
                                   interior_of(g, cut.xi2.cwiseProduct(cut.xi2) / prob.mu[1])};
  const Vector xs = interior_of(g, prob.xi_star());

  auto F = [&](int m) { return (m - 1) * n; };
  auto Th = [&](int k, int m) { return (1 + k) * M * n + (m - 1) * n; };
  std::vector<Triplet> trip;
  Vector rhs = Vector::Zero(3 * M * n);
  for (int m = 1; m <= M; ++m) {
    add_block(trip, SparseMatrix(S.state[m].transpose()), F(m), F(m));
    if (m < M) add_diag(trip, Vector::Ones(n), F(m), F(m + 1), -1.0);
    for (int k = 0; k < 2; ++k) {
      add_diag(trip, xs, F(m), Th(k, m), tau * prob.nu[k]);
      add_block(trip, S.follower[m], Th(k, m), Th(k, m));
      if (m > 1) add_diag(trip, Vector::Ones(n), Th(k, m), Th(k, m - 1), -1.0);
      add_diag(trip, q[k], Th(k, m), F(m), -tau);
    }
  }
  rhs.segment(F(M), n) = phi_T.interior();
  SparseMatrix A(3 * M * n, 3 * M * n);
  A.setFromTriplets(trip.begin(), trip.end());
  const Vector x = solve_sparse(A, rhs);
  CoupledAdjoint out;
  out.phi = unpack(g, time, x, 0);
  out.phi.slices[0] = out.phi.slices[1];
  for (int k = 0; k < 2; ++k) out.theta[k] = unpack(g, time, x, Th(k, 1));
  out.iterations = 1;
  return out;
}

CoupledPrimal primal_picard(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                            const std::array<SpaceTimeField, 2>* targets, double tol) {
  const auto& prob = ctx.problem();
  const ControlCutoffs cut = prob.cutoffs();
  const Vector q1 = cut.xi1.cwiseProduct(cut.xi1) / prob.mu[0];
  const Vector q2 = cut.xi2.cwiseProduct(cut.xi2) / prob.mu[1];
  const SpaceTimeField lead = u.times(cut.xi0);
  const Field zero = Field::zeros(prob.grid);

  CoupledPrimal out;
  out.p = {prob.zeros(), prob.zeros()};
  std::vector<double> history;
  auto state = [&]() {
    SpaceTimeField src = lead;
    src += out.p[0].times(q1);
    src += out.p[1].times(q2);
    return forward(ctx.state_steps(), src, y0);
  };
  for (int it = 1; it <= ctx.options().max_iter; ++it) {
    out.y = state();
    std::array<SpaceTimeField, 2> fresh;
    for (int k = 0; k < 2; ++k) {
      SpaceTimeField dev = targets ? out.y - (*targets)[k] : out.y;
      SpaceTimeField src = dev.times(prob.xi_star());
      src *= -prob.nu[k];
      fresh[k] = backward(ctx.follower_steps(), src, zero);
    }
    double delta;
    const double rel = update_ratio(fresh, out.p, delta);
    history.push_back(rel);
    out.p = std::move(fresh);
    out.iterations = it;
    if (delta == 0.0 || rel <= tol) {
      out.y = state();
      return out;
    }
  }
  throw NonConvergenceError("coupled primal Picard iteration did not converge", history);
}

CoupledAdjoint adjoint_picard(const GramianContext& ctx, const Field& phi_T, double tol) {
  const auto& prob = ctx.problem();
  const ControlCutoffs cut = prob.cutoffs();
  const std::array<Vector, 2> q = {cut.xi1.cwiseProduct(cut.xi1) / prob.mu[0],
                                   cut.xi2.cwiseProduct(cut.xi2) / prob.mu[1]};
  const Field zero = Field::zeros(prob.grid);

  CoupledAdjoint out;
  out.theta = {prob.zeros(), prob.zeros()};
  std::vector<double> history;
  auto adjoint = [&]() {
    SpaceTimeField src = out.theta[0].times(prob.xi_star());
    src *= -prob.nu[0];
    src.axpy(-prob.nu[1], out.theta[1].times(prob.xi_star()));
    return backward(ctx.state_steps(), src, phi_T);
  };
  for (int it = 1; it <= ctx.options().max_iter; ++it) {
    out.phi = adjoint();
    std::array<SpaceTimeField, 2> fresh;
    for (int k = 0; k < 2; ++k) fresh[k] = forward(ctx.follower_steps(), out.phi.times(q[k]), zero);
    double delta;
    const double rel = update_ratio(fresh, out.theta, delta);
    history.push_back(rel);
    out.theta = std::move(fresh);
    out.iterations = it;
    if (delta == 0.0 || rel <= tol) {
      out.phi = adjoint();
      return out;
    }
  }
  throw NonConvergenceError("coupled adjoint Picard iteration did not converge", history);
}

CoupledPrimal primal_dispatch(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                              const std::array<SpaceTimeField, 2>* targets, bool monolithic, double tol) {
  if (!y0.is_dirichlet()) throw ConfigError("initial datum must vanish on the boundary");
  if (monolithic) {
    if (!ctx.monolithic_allowed()) throw ConfigError("grid too large for the monolithic space-time solve");
    return primal_monolithic(ctx, u, y0, targets);
  }
  try {
    return primal_picard(ctx, u, y0, targets, tol);
  } catch (const NonConvergenceError&) {
    if (!ctx.monolithic_allowed()) throw;
    return primal_monolithic(ctx, u, y0, targets);
  }
}

CoupledAdjoint adjoint_dispatch(const GramianContext& ctx, const Field& phi_T, bool monolithic, double tol) {
  if (!phi_T.is_dirichlet()) throw ConfigError("adjoint terminal datum must vanish on the boundary");
  if (monolithic) {
    if (!ctx.monolithic_allowed()) throw ConfigError("grid too large for the monolithic space-time solve");
    return adjoint_monolithic(ctx, phi_T);
  }
  try {
    return adjoint_picard(ctx, phi_T, tol);
  } catch (const NonConvergenceError&) {
    if (!ctx.monolithic_allowed()) throw;
    return adjoint_monolithic(ctx, phi_T);
  }
}

}  // namespace

GramianContext::GramianContext(const HierarchicProblem& prob, LinearCoefficients coeffs, CarlemanWeights weights,
                               CoupledOptions opts)
    : prob_(&prob), coeffs_(std::move(coeffs)), weights_(std::move(weights)), opts_(opts) {
  if (!(*coeffs_.grid == *prob.grid) || !(coeffs_.time == prob.time)) {
    throw ShapeError("linearization context does not match the problem grids");
  }
  if (!(*weights_.eta().grid == *prob.grid) || weights_.T() != prob.time.T()) {
    throw ShapeError("Carleman weights are built on different grids");
  }
  state_ = std::make_unique<StepSolver>(coeffs_, Family::state);
  follower_ = std::make_unique<StepSolver>(coeffs_, Family::follower);

  const int M = prob.time.steps();
  const int nn = prob.grid->num_nodes();
  weight_.assign(M + 1, Vector::Zero(nn));
  log_weight_.assign(M + 1, Vector::Constant(nn, -std::numeric_limits<double>::infinity()));
  for (int m = 1; m < M; ++m) {
    log_weight_[m] = weights_.log_control_weight(prob.time.t(m));
    weight_[m] = log_weight_[m].array().exp().matrix();
  }
  free_terminal_ = solve_coupled_primal(*this, prob.zeros(), prob.y0, true).y.slice(M);
}

bool GramianContext::monolithic_allowed() const {
  return prob_->grid->dim() == 1 && prob_->grid->cells() <= kMonolithicMaxCells &&
         prob_->time.steps() <= kMonolithicMaxSteps;
}

CoupledPrimal solve_coupled_primal(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                                   bool with_targets) {
  return solve_coupled_primal(ctx, u, y0, with_targets, ctx.options().monolithic);
}

CoupledPrimal solve_coupled_primal(const GramianContext& ctx, const SpaceTimeField& u, const Field& y0,
                                   bool with_targets, bool monolithic) {
  return primal_dispatch(ctx, u, y0, with_targets ? &ctx.problem().targets : nullptr, monolithic,
                         ctx.options().tol);
}

CoupledAdjoint solve_coupled_adjoint(const GramianContext& ctx, const Field& phi_T) {
  return solve_coupled_adjoint(ctx, phi_T, ctx.options().monolithic);
}

CoupledAdjoint solve_coupled_adjoint(const GramianContext& ctx, const Field& phi_T, bool monolithic) {
  return adjoint_dispatch(ctx, phi_T, monolithic, ctx.options().tol);
}

SpaceTimeField control_from_adjoint(const GramianContext& ctx, const SpaceTimeField& phi) {
  const Vector& xi0 = ctx.problem().leader.xi.values;
  SpaceTimeField u = SpaceTimeField::zeros(phi.grid, phi.time);
  for (int m = 0; m < phi.num_slices(); ++m)
    u.slices[m] = ctx.control_weight(m).cwiseProduct(xi0).cwiseProduct(phi.slices[m]);
  return u;
}

Field gramian_apply(const GramianContext& ctx, const Field& phi_T) {
  const CoupledAdjoint adj = solve_coupled_adjoint(ctx, phi_T);
  const SpaceTimeField u = control_from_adjoint(ctx, adj.phi);
  const auto& prob = ctx.problem();
  return solve_coupled_primal(ctx, u, Field::zeros(prob.grid), false).y.slice(prob.time.steps());
}

double penalized_functional(const GramianContext& ctx, const SpaceTimeField& u, const Field& terminal, double eps) {
  const auto& g = *u.grid;
  const int M = u.time.steps();
  double cost = 0.0;
  for (int m = 0; m <= M; ++m) {
    const Vector& lw = ctx.log_control_weight(m);
    double s = 0.0;
    for (int k = 0; k < g.num_nodes(); ++k) {
      const double v = u.slices[m][k];
      if (v == 0.0) continue;
      if (m == 0) continue;  // slice 0 carries no quadrature weight
      if (!std::isfinite(lw[k])) return std::numeric_limits<double>::infinity();
      s += g.quadrature_weight(k) * std::exp(2.0 * std::log(std::abs(v)) - lw[k]);
    }
    cost += s;
  }
  cost *= 0.5 * u.time.tau();
  return cost + 0.5 / eps * inner_product(terminal, terminal);
}

LeaderSolution solve_leader(const GramianContext& ctx, const LeaderOptions& opts) {
  return solve_leader(ctx, ctx.problem().y0, ctx.problem().targets, opts);
}

LeaderSolution solve_leader(const GramianContext& ctx, const Field& y0, const std::array<SpaceTimeField, 2>& targets,
                            const LeaderOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw ConfigError("penalty epsilon must be positive");
  if (!(opts.cg_tol > 0.0)) throw ConfigError("cg tolerance must be positive");
  const auto& prob = ctx.problem();
  const int M = prob.time.steps();
  const double eps = opts.epsilon;
  const double inner_tol = std::min(ctx.options().tol, opts.cg_tol / 100.0);
  const bool mono = ctx.options().monolithic;

  auto apply_lambda = [&](const Field& a) {
    const CoupledAdjoint adj = adjoint_dispatch(ctx, a, mono, inner_tol);
    const SpaceTimeField u = control_from_adjoint(ctx, adj.phi);
    return primal_dispatch(ctx, u, Field::zeros(prob.grid), nullptr, mono, inner_tol).y.slice(M);
  };

  LeaderSolution sol;
  sol.epsilon = eps;
  const Field b = primal_dispatch(ctx, prob.zeros(), y0, &targets, mono, inner_tol).y.slice(M);
  const double bnorm = norm(b);
  sol.free_terminal_norm = bnorm;
  sol.J_eps_zero = 0.5 / eps * bnorm * bnorm;

  Field x = Field::zeros(prob.grid);
  if (bnorm > 0.0) {
    Field r{prob.grid, -b.values};
    Field p = r;
    double rs = inner_product(r, r);
    sol.cg_residuals.push_back(std::sqrt(rs) / bnorm);
    double best = sol.cg_residuals.back();
    int since_best = 0;
    int it = 0;
    while (sol.cg_residuals.back() > opts.cg_tol) {
      if (it++ >= opts.cg_max) {
        throw NonConvergenceError("leader CG did not reach the requested tolerance", sol.cg_residuals);
      }
      Field Ap = apply_lambda(p);
      Ap.values += eps * p.values;
      const double pAp = inner_product(p, Ap);
      if (!(pAp > 0.0)) throw ConditioningError("regularized Gramian is not positive; increase epsilon or lambda");
      const double alpha = rs / pAp;
      x.values += alpha * p.values;
      r.values -= alpha * Ap.values;
      const double rs_new = inner_product(r, r);
      sol.cg_residuals.push_back(std::sqrt(rs_new) / bnorm);
      if (sol.cg_residuals.back() < best) {
        best = sol.cg_residuals.back();
        since_best = 0;
      } else if (++since_best >= opts.stagnation_window) {
        std::ostringstream msg;
        msg << "leader CG stagnated at relative residual " << best << " for " << opts.stagnation_window
            << " iterations; increase epsilon or lambda";
        throw ConditioningError(msg.str());
      }
      p.values = r.values + (rs_new / rs) * p.values;
      rs = rs_new;
    }
  }

  sol.phi_T = x;
  if (bnorm > 0.0) {
    sol.phi = adjoint_dispatch(ctx, x, mono, inner_tol).phi;
    sol.u = control_from_adjoint(ctx, sol.phi);
  } else {
    sol.phi = prob.zeros();
    sol.u = prob.zeros();
  }
  sol.state = primal_dispatch(ctx, sol.u, y0, &targets, mono, inner_tol);
  const Field terminal = sol.state.y.slice(M);
  sol.terminal_norm = norm(terminal);
  sol.J_eps_value = penalized_functional(ctx, sol.u, terminal, eps);
  return sol;
}

}  // namespace hiercontrol
