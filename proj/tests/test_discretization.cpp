#include <doctest.h>

#include <cmath>
#include <random>

#include "hiercontrol/discretization.hpp"
#include "hiercontrol/errors.hpp"
#include "support.hpp"

using namespace hiercontrol;

namespace {

Region interval(double lo, double hi) { return Region{Interval{lo, hi}, Interval{}}; }

int node_at(const SpatialGrid& g, double x) { return static_cast<int>(std::lround(x * g.cells())); }

}  // namespace

TEST_CASE("grid nodes and boundary mask") {
  const auto g = build_grid(1, 10);
  CHECK(g->num_nodes() == 11);
  for (int k = 0; k <= 10; ++k) CHECK(g->coord(k, 0) == doctest::Approx(k / 10.0).epsilon(1e-15));
  CHECK(g->is_boundary(0));
  CHECK(g->is_boundary(10));
  for (int k = 1; k < 10; ++k) CHECK_FALSE(g->is_boundary(k));

  CHECK(build_grid(1, 8)->h() == 0.125);

  const auto g2 = build_grid(2, 8);
  CHECK(g2->num_nodes() == 81);
  int perimeter = 0;
  for (int j = 0; j <= 8; ++j)
    for (int i = 0; i <= 8; ++i)
      if (i == 0 || j == 0 || i == 8 || j == 8) ++perimeter;
  int marked = 0;
  for (int k = 0; k < g2->num_nodes(); ++k) marked += g2->is_boundary(k);
  CHECK(marked == perimeter);
  CHECK(marked == 32);
  CHECK(g2->num_interior() == 49);
}

TEST_CASE("grid and time grid reject bad sizes") {
  CHECK_THROWS_AS(build_grid(3, 10), ConfigError);
  CHECK_THROWS_AS(build_grid(1, 7), ConfigError);
  CHECK_THROWS_AS(TimeGrid(1.0, 15), ConfigError);
  CHECK_THROWS_AS(TimeGrid(0.0, 16), ConfigError);
  const TimeGrid t(2.0, 16);
  CHECK(t.t(0) == 0.0);
  CHECK(t.t(16) == 2.0);
  for (int m = 0; m < 16; ++m) CHECK(t.t(m) < t.t(m + 1));
}

TEST_CASE("cutoff profile values") {
  const auto g = build_grid(1, 100);
  const CutoffRegion c = build_cutoff(g, interval(0.4, 0.6), interval(0.3, 0.7));
  CHECK(c.xi.values[node_at(*g, 0.5)] == 1.0);
  CHECK(c.xi.values[node_at(*g, 0.2)] == 0.0);
  CHECK(c.xi.values[node_at(*g, 0.35)] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(smoothstep5(0.5) == 0.5);
  CHECK(c.max_second_difference <= c.second_difference_bound * (1.0 + 1e-12));
}

TEST_CASE("cutoff geometry errors") {
  const auto g = build_grid(1, 64);
  // inner touching outer
  CHECK_THROWS_AS(build_cutoff(g, interval(0.3, 0.6), interval(0.3, 0.7)), GeometryError);
  // margin shrinking below the mesh size
  CHECK_THROWS_AS(build_cutoff(g, interval(0.301, 0.699), interval(0.3, 0.7)), GeometryError);
  // inner outside outer
  CHECK_THROWS_AS(build_cutoff(g, interval(0.2, 0.6), interval(0.3, 0.7)), GeometryError);
  // outer leaving the domain
  CHECK_THROWS_AS(build_cutoff(g, interval(0.2, 0.6), interval(-0.1, 0.7)), GeometryError);
}

TEST_CASE("cutoff sandwich holds node by node") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int dim : {1, 2}) {
    const auto g = build_grid(dim, 40);
    for (int trial = 0; trial < 10; ++trial) {
      auto axis = [&] {
        const double lo = 0.05 + 0.3 * u(rng), hi = lo + 0.3 + 0.2 * u(rng);
        return std::pair<Interval, Interval>{Interval{lo + 0.06, hi - 0.06}, Interval{lo, hi}};
      };
      const auto [ix, ox] = axis();
      const auto [iy, oy] = axis();
      const Region inner{ix, dim == 2 ? iy : Interval{}}, outer{ox, dim == 2 ? oy : Interval{}};
      const CutoffRegion c = build_cutoff(g, inner, outer);
      for (int k = 0; k < g->num_nodes(); ++k) {
        const double xi = c.xi.values[k];
        CHECK(xi >= 0.0);
        CHECK(xi <= 1.0);
        if (inner.contains(*g, k)) CHECK(xi == 1.0);
        if (!outer.contains(*g, k)) CHECK(xi == 0.0);
      }
    }
  }
}

TEST_CASE("divergence operator with unit coefficient is the standard stencil") {
  const auto g = build_grid(1, 16);
  const double h = g->h();
  const SparseMatrix A = assemble_divergence_operator(*g, SymTensorField::constant(g->num_nodes(), 1.0));
  const Eigen::MatrixXd D(A);
  for (int i = 0; i < D.rows(); ++i) {
    CHECK(D(i, i) == doctest::Approx(2.0 / (h * h)).epsilon(1e-14));
    if (i > 0) CHECK(D(i, i - 1) == doctest::Approx(-1.0 / (h * h)).epsilon(1e-14));
    if (i + 1 < D.rows()) CHECK(D(i, i + 1) == doctest::Approx(-1.0 / (h * h)).epsilon(1e-14));
    for (int j = 0; j < D.cols(); ++j)
      if (std::abs(i - j) > 1) CHECK(D(i, j) == 0.0);
  }
}

TEST_CASE("divergence operator rows for b = 1 + x") {
  const auto g = build_grid(1, 20);
  const double h = g->h();
  SymTensorField b = SymTensorField::constant(g->num_nodes(), 0.0);
  for (int k = 0; k < g->num_nodes(); ++k) b.xx[k] = 1.0 + g->coord(k, 0);
  const Eigen::MatrixXd D(assemble_divergence_operator(*g, b));
  for (int r = 1; r + 1 < D.rows(); ++r) {
    const double x = g->coord(g->interior_nodes()[r], 0);
    CHECK(D(r, r - 1) == doctest::Approx(-(1.0 + x - h / 2) / (h * h)).epsilon(1e-12));
    CHECK(D(r, r + 1) == doctest::Approx(-(1.0 + x + h / 2) / (h * h)).epsilon(1e-12));
    CHECK(D(r, r) == doctest::Approx(2.0 * (1.0 + x) / (h * h)).epsilon(1e-12));
  }
}

TEST_CASE("divergence operator is exactly symmetric and positive semidefinite") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int dim : {1, 2}) {
    const auto g = build_grid(dim, 12);
    SymTensorField b = SymTensorField::constant(g->num_nodes(), 0.0);
    for (int k = 0; k < g->num_nodes(); ++k) {
      b.xx[k] = 1.0 + u(rng);
      if (dim == 2) {
        b.yy[k] = 1.0 + u(rng);
        b.xy[k] = 0.4 * (u(rng) - 0.5);
      }
    }
    const SparseMatrix A = assemble_divergence_operator(*g, b, 0.1);
    const SparseMatrix At = A.transpose();
    CHECK((A - At).norm() == 0.0);
    for (int s = 0; s < 50; ++s) {
      const Field f = testing::random_field(g, rng);
      CHECK(inner_product(apply(A, f), f) >= 0.0);
    }
  }
}

TEST_CASE("ellipticity violation names the node") {
  const auto g = build_grid(1, 16);
  SymTensorField b = SymTensorField::constant(g->num_nodes(), 1.0);
  b.xx[7] = 0.01;
  try {
    assemble_divergence_operator(*g, b, 0.1);
    FAIL("expected a coefficient error");
  } catch (const CoefficientError& e) {
    CHECK(e.node() == 7);
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("assembled operators satisfy the adjoint identity") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int dim : {1, 2}) {
    const auto g = build_grid(dim, 10);
    const int n = g->num_nodes();
    SymTensorField b = SymTensorField::constant(n, 1.0, 0.0, dim == 2 ? 1.0 : 0.0);
    VectorField f = VectorField::zeros(n);
    Vector f0(n);
    for (int k = 0; k < n; ++k) {
      b.xx[k] += 0.5 * u(rng);
      f.x[k] = u(rng);
      f.y[k] = dim == 2 ? u(rng) : 0.0;
      f0[k] = u(rng);
    }
    const SparseMatrix L = assemble_divergence_operator(*g, b) + assemble_advection(*g, f) + assemble_reaction(*g, f0);
    const SparseMatrix Lt = L.transpose();
    for (int s = 0; s < 10; ++s) {
      const Field y = testing::random_field(g, rng), p = testing::random_field(g, rng);
      CHECK(testing::rel(inner_product(apply(L, y), p), inner_product(y, apply(Lt, p))) <= 1e-13);
    }
  }
  const SparseMatrix D = central_difference(*build_grid(1, 10), 0);
  CHECK((SparseMatrix(D.transpose()) + D).norm() == 0.0);
}

TEST_CASE("trapezoid inner products") {
  const auto g = build_grid(1, 64);
  const Field one = Field::from_function(g, [](double, double) { return 1.0; });
  const Field x = Field::from_function(g, [](double x, double) { return x; });
  CHECK(inner_product(one, one) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(inner_product(x, x) - 1.0 / 3.0) <= 1e-4);
  CHECK(inner_product(x, one) == doctest::Approx(inner_product(one, x)).epsilon(1e-15));
  CHECK(inner_product(Field::zeros(g), Field::zeros(g)) == 0.0);
  CHECK(inner_product(x, x) > 0.0);
  CHECK_THROWS_AS(inner_product(x, Field::zeros(build_grid(1, 32))), ShapeError);

  auto err = [](int cells) {
    const auto gg = build_grid(1, cells);
    const Field sq = Field::from_function(gg, [](double x, double) { return x * x; });
    const Field o = Field::from_function(gg, [](double, double) { return 1.0; });
    return std::abs(inner_product(sq, o) - 1.0 / 3.0);
  };
  CHECK(err(16) / err(32) >= 3.5);
  CHECK(err(32) / err(64) >= 3.5);
}

TEST_CASE("gradient examples") {
  const auto g = build_grid(1, 64);
  const VectorField c = gradient(Field::from_function(g, [](double, double) { return 3.0; }));
  CHECK(c.x.cwiseAbs().maxCoeff() == 0.0);
  const VectorField lin = gradient(Field::from_function(g, [](double x, double) { return x; }));
  for (int k : g->interior_nodes()) CHECK(lin.x[k] == doctest::Approx(1.0).epsilon(1e-12));
  const VectorField sq = gradient(Field::from_function(g, [](double x, double) { return x * x; }));
  CHECK(std::abs(sq.x[32] - 1.0) <= 1e-12);
}
