#include "hiercontrol/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

namespace {

using Triplet = Eigen::Triplet<double>;

// Cutoff profile along one axis.
double axis_profile(double x, const Interval& inner, const Interval& outer) {
  if (x <= outer.lo || x >= outer.hi) return 0.0;
  if (x < inner.lo) return smoothstep5((x - outer.lo) / (inner.lo - outer.lo));
  if (x > inner.hi) return smoothstep5((outer.hi - x) / (outer.hi - inner.hi));
  return 1.0;
}

void check_axis(const Interval& inner, const Interval& outer, double h, const char* axis) {
  std::ostringstream msg;
  msg << "cutoff along " << axis << ": ";
  if (!(outer.lo >= 0.0 && outer.hi <= 1.0 && outer.lo < outer.hi)) {
    msg << "outer (" << outer.lo << "," << outer.hi << ") is not inside (0,1)";
    throw GeometryError(msg.str());
  }
  if (!(inner.lo < inner.hi)) {
    msg << "inner (" << inner.lo << "," << inner.hi << ") is empty";
    throw GeometryError(msg.str());
  }
  const double margin = std::min(inner.lo - outer.lo, outer.hi - inner.hi);
  if (!(margin > 0.0)) {
    msg << "closure of inner (" << inner.lo << "," << inner.hi << ") is not inside outer ("
        << outer.lo << "," << outer.hi << ")";
    throw GeometryError(msg.str());
  }
  if (margin < h) {
    msg << "transition band " << margin << " is thinner than one cell (h=" << h << ")";
    throw GeometryError(msg.str());
  }
}

double min_eigenvalue(const SymTensorField& b, int k, int dim) {
  if (dim == 1) return b.xx[k];
  const double m = 0.5 * (b.xx[k] + b.yy[k]);
  const double r = std::hypot(0.5 * (b.xx[k] - b.yy[k]), b.xy[k]);
  return m - r;
}

}  // namespace

bool Region::contains(const SpatialGrid& g, int node) const {
  if (!x.contains(g.coord(node, 0))) return false;
  return g.dim() == 1 || y.contains(g.coord(node, 1));
}

bool regions_intersect(const Region& a, const Region& b, int dim) {
  Region c = intersection(a, b);
  return c.x.lo < c.x.hi && (dim == 1 || c.y.lo < c.y.hi);
}

Region intersection(const Region& a, const Region& b) {
  return {{std::max(a.x.lo, b.x.lo), std::min(a.x.hi, b.x.hi)},
          {std::max(a.y.lo, b.y.lo), std::min(a.y.hi, b.y.hi)}};
}

Vector CutoffRegion::outer_indicator() const {
  const auto& g = *xi.grid;
  Vector ind = Vector::Zero(g.num_nodes());
  for (int k = 0; k < g.num_nodes(); ++k) ind[k] = outer.contains(g, k) ? 1.0 : 0.0;
  return ind;
}

double smoothstep5(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

CutoffRegion build_cutoff(GridPtr grid, const Region& inner, const Region& outer) {
  const double h = grid->h();
  check_axis(inner.x, outer.x, h, "x");
  if (grid->dim() == 2) check_axis(inner.y, outer.y, h, "y");

  CutoffRegion c;
  c.inner = inner;
  c.outer = outer;
  c.xi = Field::from_function(grid, [&](double x, double y) {
    double v = axis_profile(x, inner.x, outer.x);
    if (grid->dim() == 2) v *= axis_profile(y, inner.y, outer.y);
    return v;
  });
  // ξ vanishes on ∂Ω because the profile is 0 at outer endpoints
  for (int k = 0; k < grid->num_nodes(); ++k)
    if (grid->is_boundary(k)) c.xi.values[k] = 0.0;

  // max |s''| = 10/sqrt(3) at s = (3 - sqrt(3))/6
  const double s2max = 10.0 / std::sqrt(3.0);
  auto band = [](const Interval& i, const Interval& o) {
    return std::min(i.lo - o.lo, o.hi - i.hi);
  };
  double bx = band(inner.x, outer.x);
  c.second_difference_bound = s2max / (bx * bx);
  if (grid->dim() == 2) {
    double by = band(inner.y, outer.y);
    c.second_difference_bound = std::max(c.second_difference_bound, s2max / (by * by));
  }

  const int n = grid->nodes_per_axis();
  const int axes = grid->dim();
  double worst = 0.0;
  for (int k = 0; k < grid->num_nodes(); ++k) {
    auto ij = grid->index(k);
    for (int a = 0; a < axes; ++a) {
      if (ij[a] == 0 || ij[a] == n - 1) continue;
      const int stride = a == 0 ? 1 : n;
      const double d2 = (c.xi.values[k + stride] - 2.0 * c.xi.values[k] + c.xi.values[k - stride]) / (h * h);
      worst = std::max(worst, std::abs(d2));
    }
  }
  c.max_second_difference = worst;
  return c;
}

SparseMatrix assemble_divergence_operator(const SpatialGrid& grid, const SymTensorField& b, double rho0) {
  const int dim = grid.dim();
  const int nn = grid.num_nodes();
  if (b.xx.size() != nn || (dim == 2 && (b.xy.size() != nn || b.yy.size() != nn))) {
    throw ShapeError("diffusion coefficient has wrong length");
  }
  for (int k = 0; k < nn; ++k) {
    const double lam = min_eigenvalue(b, k, dim);
    if (!(lam >= rho0) || !std::isfinite(lam)) {
      std::ostringstream msg;
      msg << "diffusion loses ellipticity at node " << k << " (x=" << grid.coord(k, 0);
      if (dim == 2) msg << ", y=" << grid.coord(k, 1);
      msg << "): smallest eigenvalue " << lam << " < " << rho0;
      throw CoefficientError(msg.str(), k);
    }
  }

  const int ni = grid.num_interior();
  const double h2 = grid.h() * grid.h();
  const int n = grid.nodes_per_axis();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(ni) * (dim == 1 ? 3 : 5));

  // principal diagonal parts via face fluxes
  for (int r = 0; r < ni; ++r) {
    const int k = grid.interior_nodes()[r];
    for (int a = 0; a < dim; ++a) {
      const Vector& c = a == 0 ? b.xx : b.yy;
      const int stride = a == 0 ? 1 : n;
      const double fm = 0.5 * (c[k] + c[k - stride]);
      const double fp = 0.5 * (c[k] + c[k + stride]);
      trip.emplace_back(r, r, (fm + fp) / h2);
      const int lm = grid.interior_index(k - stride);
      const int lp = grid.interior_index(k + stride);
      if (lm >= 0) trip.emplace_back(r, lm, -fm / h2);
      if (lp >= 0) trip.emplace_back(r, lp, -fp / h2);
    }
  }
  SparseMatrix A(ni, ni);
  A.setFromTriplets(trip.begin(), trip.end());

  if (dim == 2 && b.xy.cwiseAbs().maxCoeff() > 0.0) {
    SparseMatrix Dx = central_difference(grid, 0);
    SparseMatrix Dy = central_difference(grid, 1);
    Vector bi(ni);
    for (int r = 0; r < ni; ++r) bi[r] = b.xy[grid.interior_nodes()[r]];
    SparseMatrix mixed = SparseMatrix(Dx.transpose()) * bi.asDiagonal() * Dy;
    SparseMatrix mixed_t = mixed.transpose();
    A += mixed + mixed_t;
  }
  A.makeCompressed();
  return A;
}

SparseMatrix central_difference(const SpatialGrid& grid, int axis) {
  const int ni = grid.num_interior();
  const int stride = axis == 0 ? 1 : grid.nodes_per_axis();
  const double c = 0.5 / grid.h();
  std::vector<Triplet> trip;
  for (int r = 0; r < ni; ++r) {
    const int k = grid.interior_nodes()[r];
    const int lm = grid.interior_index(k - stride);
    const int lp = grid.interior_index(k + stride);
    if (lp >= 0) trip.emplace_back(r, lp, c);
    if (lm >= 0) trip.emplace_back(r, lm, -c);
  }
  SparseMatrix D(ni, ni);
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

SparseMatrix assemble_advection(const SpatialGrid& grid, const VectorField& f) {
  const int ni = grid.num_interior();
  SparseMatrix out(ni, ni);
  for (int a = 0; a < grid.dim(); ++a) {
    const Vector& comp = a == 0 ? f.x : f.y;
    if (comp.size() != grid.num_nodes()) throw ShapeError("advection field has wrong length");
    Vector fi(ni);
    for (int r = 0; r < ni; ++r) fi[r] = comp[grid.interior_nodes()[r]];
    out += fi.asDiagonal() * central_difference(grid, a);
  }
  out.makeCompressed();
  return out;
}

SparseMatrix assemble_reaction(const SpatialGrid& grid, const Vector& c) {
  if (c.size() != grid.num_nodes()) throw ShapeError("reaction field has wrong length");
  const int ni = grid.num_interior();
  SparseMatrix out(ni, ni);
  out.reserve(Eigen::VectorXi::Constant(ni, 1));
  for (int r = 0; r < ni; ++r) out.insert(r, r) = c[grid.interior_nodes()[r]];
  out.makeCompressed();
  return out;
}

Field apply(const SparseMatrix& op, const Field& f) {
  if (op.cols() != f.grid->num_interior()) throw ShapeError("operator does not match field grid");
  return Field::from_interior(f.grid, op * f.interior());
}

double inner_product(const Field& f, const Field& g) {
  require_same_grid(f, g);
  const auto& grid = *f.grid;
  double s = 0.0;
  for (int k = 0; k < grid.num_nodes(); ++k) s += grid.quadrature_weight(k) * f.values[k] * g.values[k];
  return s;
}

double inner_product(const SpaceTimeField& f, const SpaceTimeField& g) {
  require_same_grid(f, g);
  double s = 0.0;
  for (int m = 1; m < f.num_slices(); ++m) s += inner_product(f.slice(m), g.slice(m));
  return f.time.tau() * s;
}

double norm(const Field& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }
double norm(const SpaceTimeField& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

VectorField gradient(const Field& f) {
  const auto& g = *f.grid;
  const int n = g.nodes_per_axis();
  const double h = g.h();
  VectorField out = VectorField::zeros(g.num_nodes());
  for (int k = 0; k < g.num_nodes(); ++k) {
    auto ij = g.index(k);
    for (int a = 0; a < g.dim(); ++a) {
      const int stride = a == 0 ? 1 : n;
      double d;
      if (ij[a] == 0) {
        d = (f.values[k + stride] - f.values[k]) / h;
      } else if (ij[a] == n - 1) {
        d = (f.values[k] - f.values[k - stride]) / h;
      } else {
        d = (f.values[k + stride] - f.values[k - stride]) / (2.0 * h);
      }
      (a == 0 ? out.x : out.y)[k] = d;
    }
  }
  return out;
}

}  // namespace hiercontrol
