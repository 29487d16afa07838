#pragma once

#include <Eigen/SparseCore>

#include "hiercontrol/grid.hpp"

namespace hiercontrol {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Open interval (lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double x) const { return lo < x && x < hi; }
  double width() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Axis-aligned box; only `x` is used on 1D grids.
struct Region {
  Interval x;
  Interval y;

  bool contains(const SpatialGrid& g, int node) const;
  bool operator==(const Region&) const = default;
};

/// Intersection of two regions, or nullopt-like empty flag.
bool regions_intersect(const Region& a, const Region& b, int dim);
Region intersection(const Region& a, const Region& b);

/// Smooth cutoff: 1 on `inner`, 0 outside `outer`, quintic smoothstep between.
struct CutoffRegion {
  Region inner;
  Region outer;
  Field xi;
  int smoothness = 2;
  /// Largest sampled |second difference| / h^2 over the grid.
  double max_second_difference = 0.0;
  /// A priori bound on that quantity from the profile.
  double second_difference_bound = 0.0;

  /// Indicator of nodes strictly inside the outer region.
  Vector outer_indicator() const;
};

/// Quintic smoothstep 6s^5 - 15s^4 + 10s^3 clamped to [0,1].
double smoothstep5(double s);

CutoffRegion build_cutoff(GridPtr grid, const Region& inner, const Region& outer);

/// -div(b grad .) on interior unknowns; flux form with arithmetic-mean face
/// coefficients (2D mixed terms via central differences). Exactly symmetric.
/// Throws CoefficientError when the smallest eigenvalue of b at a node is below rho0.
SparseMatrix assemble_divergence_operator(const SpatialGrid& grid, const SymTensorField& b,
                                          double rho0 = 0.0);

/// Central difference d/dx_axis on interior unknowns (zero Dirichlet data). Skew.
SparseMatrix central_difference(const SpatialGrid& grid, int axis);

/// diag(f_x) D_x + diag(f_y) D_y, with f sampled on all nodes.
SparseMatrix assemble_advection(const SpatialGrid& grid, const VectorField& f);

SparseMatrix assemble_reaction(const SpatialGrid& grid, const Vector& c);

/// Apply an interior operator to a Dirichlet field.
Field apply(const SparseMatrix& op, const Field& f);

/// Trapezoid rule in space.
double inner_product(const Field& f, const Field& g);
/// Space pairing summed over slices 1..M with weight tau (backward-Euler rule).
double inner_product(const SpaceTimeField& f, const SpaceTimeField& g);
double norm(const Field& f);
double norm(const SpaceTimeField& f);

/// Central differences inside, one-sided first order on the boundary.
VectorField gradient(const Field& f);

}  // namespace hiercontrol
