#include "hiercontrol/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

namespace {

double sup(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

SparseMatrix identity(int n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

void require_dirichlet(const Field& f, const char* what) {
  if (!f.is_dirichlet()) throw ConfigError(std::string(what) + " must vanish on the boundary");
  if (!f.is_finite()) throw ConfigError(std::string(what) + " has non-finite values");
}

void require_source(const SpaceTimeField& s, const GridPtr& grid, const TimeGrid& time) {
  if (!s.grid || !(*s.grid == *grid) || !(s.time == time) || s.num_slices() != time.steps() + 1) {
    throw ShapeError("source trajectory does not match the coefficient grids");
  }
}

Vector checked(Vector v, int m) {
  if (!v.allFinite()) throw SolverError("linear solve produced non-finite values", m);
  return v;
}

}  // namespace

CoefficientSlice CoefficientSlice::constant(int nodes, double diffusion, double reaction) {
  CoefficientSlice s;
  s.b = SymTensorField::constant(nodes, diffusion, 0.0, diffusion);
  s.f = VectorField::zeros(nodes);
  s.f0 = Vector::Constant(nodes, reaction);
  s.B = s.b;
  s.g = VectorField::zeros(nodes);
  s.g0 = Vector::Constant(nodes, -reaction);
  return s;
}

LinearCoefficients LinearCoefficients::constant(GridPtr grid, const TimeGrid& time, const CoefficientSlice& s,
                                                double rho0) {
  LinearCoefficients c;
  c.grid = std::move(grid);
  c.time = time;
  c.slices.assign(time.steps() + 1, s);
  c.rho0 = rho0;
  c.time_independent = true;
  return c;
}

double LinearCoefficients::budget() const {
  double b = 0.0;
  const bool two = grid->dim() == 2;
  auto tensor = [&](const SymTensorField& t) {
    double v = sup(t.xx);
    if (two) v += 2.0 * sup(t.xy) + sup(t.yy);
    return v;
  };
  auto vec = [&](const VectorField& v) { return sup(v.x) + (two ? sup(v.y) : 0.0); };
  double bt = 0, Bt = 0, ft = 0, gt = 0, f0 = 0, g0 = 0;
  for (const auto& s : slices) {
    bt = std::max(bt, tensor(s.b));
    Bt = std::max(Bt, tensor(s.B));
    ft = std::max(ft, vec(s.f));
    gt = std::max(gt, vec(s.g));
    f0 = std::max(f0, sup(s.f0));
    g0 = std::max(g0, sup(s.g0));
  }
  b = bt + Bt + ft + gt + f0 + g0;
  return b;
}

SparseMatrix assemble_operator(const SpatialGrid& grid, const SymTensorField& b, const VectorField& f,
                               const Vector& f0, double rho0) {
  SparseMatrix L = assemble_divergence_operator(grid, b, rho0);
  L += assemble_advection(grid, f);
  L += assemble_reaction(grid, f0);
  L.makeCompressed();
  return L;
}

SparseMatrix LinearCoefficients::state_operator(int m) const {
  const auto& s = slices.at(m);
  return assemble_operator(*grid, s.b, s.f, s.f0, rho0);
}

SparseMatrix LinearCoefficients::follower_operator(int m) const {
  const auto& s = slices.at(m);
  VectorField mg{-s.g.x, -s.g.y};
  return assemble_operator(*grid, s.B, mg, -s.g0, rho0);
}

StepSolver::StepSolver(const LinearCoefficients& c, Family family)
    : grid_(c.grid), time_(c.time), time_independent_(c.time_independent) {
  if (static_cast<int>(c.slices.size()) != c.time.steps() + 1) {
    throw ShapeError("coefficients need one slice per time node");
  }
  const int count = time_independent_ ? 1 : c.time.steps() + 1;
  const double tau = time_.tau();
  const SparseMatrix I = identity(grid_->num_interior());
  for (int m = 0; m < count; ++m) {
    SparseMatrix K = family == Family::state ? c.state_operator(m) : SparseMatrix(c.follower_operator(m).transpose());
    SparseMatrix F = I + tau * K;
    F.makeCompressed();
    auto lu = std::make_unique<LU>();
    lu->compute(F);
    if (lu->info() != Eigen::Success) {
      throw SolverError("step matrix factorization failed at slice " + std::to_string(m), m);
    }
    factors_.push_back(std::move(lu));
  }
}

Vector StepSolver::solve(int m, const Vector& rhs) const { return checked(lu(m).solve(rhs), m); }

Vector StepSolver::solve_transpose(int m, const Vector& rhs) const {
  auto& f = const_cast<LU&>(lu(m));
  return checked(f.transpose().solve(rhs), m);
}

SpaceTimeField forward(const StepSolver& steps, const SpaceTimeField& source, const Field& y0) {
  const auto& grid = steps.grid();
  const auto& time = steps.time();
  require_source(source, grid, time);
  require_dirichlet(y0, "initial datum");
  const double tau = time.tau();
  SpaceTimeField y = SpaceTimeField::zeros(grid, time);
  y.slices[0] = y0.values;
  Vector cur = y0.interior();
  for (int m = 1; m <= time.steps(); ++m) {
    Vector rhs = cur + tau * source.slice(m).interior();
    cur = steps.solve(m, rhs);
    y.slices[m] = Field::from_interior(grid, cur).values;
  }
  return y;
}

SpaceTimeField backward(const StepSolver& steps, const SpaceTimeField& source, const Field& terminal,
                        BackwardForm form) {
  const auto& grid = steps.grid();
  const auto& time = steps.time();
  require_source(source, grid, time);
  require_dirichlet(terminal, "terminal datum");
  const double tau = time.tau();
  const int M = time.steps();
  SpaceTimeField p = SpaceTimeField::zeros(grid, time);
  Vector cur = terminal.interior();
  if (form == BackwardForm::adjoint_of_forward) {
    for (int m = M; m >= 1; --m) {
      cur = steps.solve_transpose(m, cur + tau * source.slice(m).interior());
      p.slices[m] = Field::from_interior(grid, cur).values;
    }
    p.slices[0] = p.slices[1];
  } else {
    p.slices[M] = terminal.values;
    for (int m = M - 1; m >= 0; --m) {
      cur = steps.solve_transpose(m, cur + tau * source.slice(m).interior());
      p.slices[m] = Field::from_interior(grid, cur).values;
    }
  }
  return p;
}

SpaceTimeField solve_forward_linear(const LinearCoefficients& c, const SpaceTimeField& source, const Field& y0,
                                    Family family) {
  StepSolver steps(c, family);
  return forward(steps, source, y0);
}

SpaceTimeField solve_backward_linear(const LinearCoefficients& c, const SpaceTimeField& source,
                                     const Field& terminal, BackwardForm form, Family family) {
  StepSolver steps(c, family);
  return backward(steps, source, terminal, form);
}

FrozenCoefficients freeze(const Nonlinearity& nl, const Field& z) {
  const auto& g = *z.grid;
  const int n = g.num_nodes();
  const VectorField dz = gradient(z);
  FrozenCoefficients out{SymTensorField::constant(n, 0.0), VectorField::zeros(n), Vector::Zero(n)};
  const auto& rule = gauss_legendre8();
  for (int k = 0; k < n; ++k) {
    const double s = z.values[k];
    const Vec2 zeta{dz.x[k], g.dim() == 2 ? dz.y[k] : 0.0};
    const Sym2 a = nl.a(s, zeta);
    out.a.xx[k] = a.xx;
    out.a.xy[k] = a.xy;
    out.a.yy[k] = a.yy;
    double f1 = 0.0;
    Vec2 f2{0.0, 0.0};
    for (const auto& [node, w] : rule) {
      const Vec2 zs{node * zeta[0], node * zeta[1]};
      f1 += w * nl.f_y(node * s, zs);
      const Vec2 fz = nl.f_zeta(node * s, zs);
      f2[0] += w * fz[0];
      f2[1] += w * fz[1];
    }
    out.F1[k] = f1;
    out.F2.x[k] = f2[0];
    out.F2.y[k] = f2[1];
  }
  return out;
}

SpaceTimeField solve_forward_quasilinear(const Nonlinearity& nl, const SpaceTimeField& source, const Field& y0,
                                         const QuasilinearOptions& opts) {
  require_dirichlet(y0, "initial datum");
  const GridPtr grid = source.grid;
  const TimeGrid time = source.time;
  require_source(source, grid, time);
  if (!(*y0.grid == *grid)) throw ShapeError("initial datum and source live on different grids");

  const double tau = time.tau();
  const SparseMatrix I = identity(grid->num_interior());
  SpaceTimeField y = SpaceTimeField::zeros(grid, time);
  y.slices[0] = y0.values;
  Field prev = y0;
  const int sweeps = opts.converge ? std::max(opts.max_refreshes, opts.refreshes) : opts.refreshes;

  for (int m = 1; m <= time.steps(); ++m) {
    const Vector rhs = prev.interior() + tau * source.slice(m).interior();
    Field z = prev;
    Vector last;
    double change = 0.0;
    for (int r = 0; r <= sweeps; ++r) {
      const FrozenCoefficients fc = freeze(nl, z);
      SparseMatrix F = I + tau * assemble_operator(*grid, fc.a, fc.F2, fc.F1, nl.rho0);
      F.makeCompressed();
      Eigen::SparseLU<SparseMatrix> lu(F);
      if (lu.info() != Eigen::Success) throw SolverError("quasi-linear step factorization failed", m);
      Vector next = lu.solve(rhs);
      if (!next.allFinite()) throw BlowUpError("quasi-linear step produced non-finite values", m);
      if (r > 0) {
        const double scale = std::max(next.norm(), 1e-300);
        change = (next - last).norm() / scale;
      }
      last = std::move(next);
      z = Field::from_interior(grid, last);
      if (opts.converge && r >= opts.refreshes && change <= opts.tol) break;
    }
    if (change > opts.blowup_ratio) {
      std::ostringstream msg;
      msg << "quasi-linear step diverged at slice " << m << " (relative change " << change << ")";
      throw BlowUpError(msg.str(), m);
    }
    y.slices[m] = z.values;
    prev = z;
  }
  return y;
}

SpaceTimeField control_source(const ControlCutoffs& cut, const SpaceTimeField& u, const SpaceTimeField& v1,
                              const SpaceTimeField& v2) {
  SpaceTimeField s = u.times(cut.xi0);
  s += v1.times(cut.xi1);
  s += v2.times(cut.xi2);
  return s;
}

SpaceTimeField solve_forward_quasilinear(const Nonlinearity& nl, const SpaceTimeField& u, const SpaceTimeField& v1,
                                         const SpaceTimeField& v2, const ControlCutoffs& cut, const Field& y0,
                                         const QuasilinearOptions& opts) {
  return solve_forward_quasilinear(nl, control_source(cut, u, v1, v2), y0, opts);
}

}  // namespace hiercontrol
