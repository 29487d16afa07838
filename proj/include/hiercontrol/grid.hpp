#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace hiercontrol {

using Vector = Eigen::VectorXd;

/// Uniform node lattice on (0,1)^dim with dim in {1,2}.
///
/// Nodes are numbered x-fastest. Unknowns of Dirichlet problems are the
/// interior nodes, numbered in the same order.
class SpatialGrid {
 public:
  SpatialGrid(int dim, int cells);

  int dim() const { return dim_; }
  int cells() const { return cells_; }
  double h() const { return h_; }
  int nodes_per_axis() const { return cells_ + 1; }
  int num_nodes() const { return num_nodes_; }
  int num_interior() const { return static_cast<int>(interior_.size()); }

  int node(int i, int j = 0) const { return i + j * (cells_ + 1); }
  std::array<int, 2> index(int node) const;
  double coord(int node, int axis) const;
  bool is_boundary(int node) const { return boundary_[node]; }

  const std::vector<int>& interior_nodes() const { return interior_; }
  /// Position of `node` in the interior numbering, -1 on the boundary.
  int interior_index(int node) const { return interior_index_[node]; }

  /// Trapezoid weight of a node (h^dim, halved per boundary axis).
  double quadrature_weight(int node) const;

  bool operator==(const SpatialGrid& other) const {
    return dim_ == other.dim_ && cells_ == other.cells_;
  }

 private:
  int dim_;
  int cells_;
  double h_;
  int num_nodes_;
  std::vector<bool> boundary_;
  std::vector<int> interior_;
  std::vector<int> interior_index_;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

GridPtr build_grid(int dim, int cells);

/// Uniform time lattice t_m = m*tau, m = 0..M.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double T, int steps);

  double T() const { return T_; }
  int steps() const { return steps_; }
  double tau() const { return T_ / steps_; }
  double t(int m) const { return m == steps_ ? T_ : m * tau(); }

  bool operator==(const TimeGrid& o) const { return T_ == o.T_ && steps_ == o.steps_; }

 private:
  double T_ = 1.0;
  int steps_ = 16;
};

/// Node values of a scalar function on a SpatialGrid.
struct Field {
  GridPtr grid;
  Vector values;

  static Field zeros(GridPtr grid);
  static Field from_function(GridPtr grid, const std::function<double(double, double)>& fn);
  /// Scatter interior unknowns into a field with zero boundary values.
  static Field from_interior(GridPtr grid, const Vector& interior);

  Vector interior() const;
  /// True when every boundary value is exactly zero.
  bool is_dirichlet() const;
  bool is_finite() const;
};

/// One Field per time node, slices 0..M.
struct SpaceTimeField {
  GridPtr grid;
  TimeGrid time;
  std::vector<Vector> slices;

  static SpaceTimeField zeros(GridPtr grid, const TimeGrid& time);
  static SpaceTimeField from_function(GridPtr grid, const TimeGrid& time,
                                      const std::function<double(double, double, double)>& fn);

  int num_slices() const { return static_cast<int>(slices.size()); }
  Field slice(int m) const { return Field{grid, slices[m]}; }
  bool is_finite() const;

  SpaceTimeField& operator+=(const SpaceTimeField& o);
  SpaceTimeField& operator-=(const SpaceTimeField& o);
  SpaceTimeField& operator*=(double s);
  /// this += s * o
  SpaceTimeField& axpy(double s, const SpaceTimeField& o);
  /// Pointwise product with a time-independent node field.
  SpaceTimeField times(const Vector& node_factor) const;
};

SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b);
SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b);
SpaceTimeField operator*(double s, SpaceTimeField a);

/// Throws ShapeError unless both live on equal grids (and time grids).
void require_same_grid(const Field& a, const Field& b);
void require_same_grid(const SpaceTimeField& a, const SpaceTimeField& b);

/// Per-node symmetric 2x2 tensor, stored by component. In 1D only xx is used.
struct SymTensorField {
  Vector xx, xy, yy;

  static SymTensorField constant(int n, double xx, double xy = 0.0, double yy = 0.0);
};

/// Per-node vector field; in 1D only x is used.
struct VectorField {
  Vector x, y;

  static VectorField zeros(int n);
};

}  // namespace hiercontrol
