#include "hiercontrol/grid.hpp"

#include <cmath>
#include <string>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

SpatialGrid::SpatialGrid(int dim, int cells) : dim_(dim), cells_(cells) {
  if (dim != 1 && dim != 2) {
    throw ConfigError("grid dimension must be 1 or 2, got " + std::to_string(dim));
  }
  if (cells < 8) {
    throw ConfigError("grid needs at least 8 cells per axis, got " + std::to_string(cells));
  }
  h_ = 1.0 / cells;
  const int n = cells + 1;
  num_nodes_ = dim == 1 ? n : n * n;
  boundary_.assign(num_nodes_, false);
  interior_index_.assign(num_nodes_, -1);
  for (int k = 0; k < num_nodes_; ++k) {
    auto [i, j] = index(k);
    bool on_edge = i == 0 || i == cells;
    if (dim == 2) on_edge = on_edge || j == 0 || j == cells;
    boundary_[k] = on_edge;
    if (!on_edge) {
      interior_index_[k] = static_cast<int>(interior_.size());
      interior_.push_back(k);
    }
  }
}

std::array<int, 2> SpatialGrid::index(int node) const {
  const int n = cells_ + 1;
  if (dim_ == 1) return {node, 0};
  return {node % n, node / n};
}

double SpatialGrid::coord(int node, int axis) const {
  auto ij = index(node);
  // i == cells maps to 1 exactly
  return ij[axis] == cells_ ? 1.0 : ij[axis] * h_;
}

double SpatialGrid::quadrature_weight(int node) const {
  auto [i, j] = index(node);
  double w = h_;
  if (i == 0 || i == cells_) w *= 0.5;
  if (dim_ == 2) {
    w *= h_;
    if (j == 0 || j == cells_) w *= 0.5;
  }
  return w;
}

GridPtr build_grid(int dim, int cells) { return std::make_shared<const SpatialGrid>(dim, cells); }

TimeGrid::TimeGrid(double T, int steps) : T_(T), steps_(steps) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("final time T must be positive");
  if (steps < 16) throw ConfigError("time grid needs at least 16 steps, got " + std::to_string(steps));
}

Field Field::zeros(GridPtr grid) {
  const int n = grid->num_nodes();
  return Field{std::move(grid), Vector::Zero(n)};
}

Field Field::from_function(GridPtr grid, const std::function<double(double, double)>& fn) {
  Field f = zeros(grid);
  for (int k = 0; k < grid->num_nodes(); ++k) {
    f.values[k] = fn(grid->coord(k, 0), grid->dim() == 2 ? grid->coord(k, 1) : 0.0);
  }
  return f;
}

Field Field::from_interior(GridPtr grid, const Vector& interior) {
  if (interior.size() != grid->num_interior()) throw ShapeError("interior vector has wrong length");
  Field f = zeros(grid);
  const auto& nodes = grid->interior_nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) f.values[nodes[i]] = interior[i];
  return f;
}

Vector Field::interior() const {
  const auto& nodes = grid->interior_nodes();
  Vector out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = values[nodes[i]];
  return out;
}

bool Field::is_dirichlet() const {
  for (int k = 0; k < grid->num_nodes(); ++k) {
    if (grid->is_boundary(k) && values[k] != 0.0) return false;
  }
  return true;
}

bool Field::is_finite() const { return values.allFinite(); }

SpaceTimeField SpaceTimeField::zeros(GridPtr grid, const TimeGrid& time) {
  SpaceTimeField f{grid, time, {}};
  f.slices.assign(time.steps() + 1, Vector::Zero(grid->num_nodes()));
  return f;
}

SpaceTimeField SpaceTimeField::from_function(
    GridPtr grid, const TimeGrid& time, const std::function<double(double, double, double)>& fn) {
  SpaceTimeField f = zeros(grid, time);
  for (int m = 0; m <= time.steps(); ++m) {
    const double t = time.t(m);
    for (int k = 0; k < grid->num_nodes(); ++k) {
      f.slices[m][k] = fn(t, grid->coord(k, 0), grid->dim() == 2 ? grid->coord(k, 1) : 0.0);
    }
  }
  return f;
}

bool SpaceTimeField::is_finite() const {
  for (const auto& s : slices)
    if (!s.allFinite()) return false;
  return true;
}

SpaceTimeField& SpaceTimeField::operator+=(const SpaceTimeField& o) { return axpy(1.0, o); }
SpaceTimeField& SpaceTimeField::operator-=(const SpaceTimeField& o) { return axpy(-1.0, o); }

SpaceTimeField& SpaceTimeField::operator*=(double s) {
  for (auto& v : slices) v *= s;
  return *this;
}

SpaceTimeField& SpaceTimeField::axpy(double s, const SpaceTimeField& o) {
  require_same_grid(*this, o);
  for (std::size_t m = 0; m < slices.size(); ++m) slices[m] += s * o.slices[m];
  return *this;
}

SpaceTimeField SpaceTimeField::times(const Vector& node_factor) const {
  SpaceTimeField out = *this;
  for (auto& v : out.slices) v = v.cwiseProduct(node_factor);
  return out;
}

SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) { return a += b; }
SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) { return a -= b; }
SpaceTimeField operator*(double s, SpaceTimeField a) { return a *= s; }

void require_same_grid(const Field& a, const Field& b) {
  if (!a.grid || !b.grid || !(*a.grid == *b.grid)) throw ShapeError("fields live on different grids");
}

void require_same_grid(const SpaceTimeField& a, const SpaceTimeField& b) {
  if (!a.grid || !b.grid || !(*a.grid == *b.grid) || !(a.time == b.time) ||
      a.slices.size() != b.slices.size()) {
    throw ShapeError("trajectories live on different space-time grids");
  }
}

SymTensorField SymTensorField::constant(int n, double xx, double xy, double yy) {
  return {Vector::Constant(n, xx), Vector::Constant(n, xy), Vector::Constant(n, yy)};
}

VectorField VectorField::zeros(int n) { return {Vector::Zero(n), Vector::Zero(n)}; }

}  // namespace hiercontrol
