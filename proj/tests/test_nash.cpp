#include <doctest.h>

#include <cmath>

#include "hiercontrol/errors.hpp"
#include "hiercontrol/verification.hpp"
#include "support.hpp"

using namespace hiercontrol;

namespace {

HierarchicProblem zero_data(HierarchicProblem p) {
  p.y0 = Field::zeros(p.grid);
  p.targets = {p.zeros(), p.zeros()};
  return p;
}

NashOptions tight() {
  NashOptions o;
  o.tol = 1e-13;
  o.max_iter = 500;
  return o;
}

double max_abs(const SpaceTimeField& f) {
  double m = 0.0;
  for (const auto& s : f.slices) m = std::max(m, s.cwiseAbs().maxCoeff());
  return m;
}

/// Tracking plus control cost summed node by node with the trapezoid weights.
double cost_by_hand(const HierarchicProblem& p, const SpaceTimeField& y, const SpaceTimeField& v, int k) {
  const auto& g = *p.grid;
  double control = 0.0, tracking = 0.0;
  for (int m = 1; m <= p.time.steps(); ++m)
    for (int n = 0; n < g.num_nodes(); ++n) {
      const double w = g.quadrature_weight(n) * p.time.tau();
      const bool in = p.followers[k - 1].outer.contains(g, n);
      control += in ? w * v.slices[m][n] * v.slices[m][n] : 0.0;
      const double d = y.slices[m][n] - p.targets[k - 1].slices[m][n];
      tracking += w * p.xi_star()[n] * d * d;
    }
  return 0.5 * p.mu[k - 1] * control + 0.5 * p.nu[k - 1] * tracking;
}

}  // namespace

TEST_CASE("linearized coefficients for a gradient-dependent diffusion") {
  const auto g = build_grid(1, 16);
  const TimeGrid time(1.0, 16);
  IsotropicParams p;
  p.ag = 0.05;
  const SpaceTimeField y = SpaceTimeField::from_function(g, time, [](double, double x, double) { return x; });
  const LinearCoefficients c = coefficients_from_state(make_isotropic(1, p), y);
  for (int m : {0, 7, 16})
    for (int k : g->interior_nodes()) {
      CHECK(c.slices[m].b.xx[k] == doctest::Approx(1.05).epsilon(1e-12));
      CHECK(c.slices[m].B.xx[k] == doctest::Approx(1.15).epsilon(1e-12));
      CHECK(std::abs(c.slices[m].g.x[k]) <= 1e-14);
      CHECK(std::abs(c.slices[m].g0[k]) <= 1e-14);
    }
}

TEST_CASE("linearized coefficients for the Burgers preset") {
  const auto g = build_grid(1, 16);
  const TimeGrid time(1.0, 16);
  const SpaceTimeField y = SpaceTimeField::from_function(g, time, [](double, double x, double) { return x; });
  const LinearCoefficients c = coefficients_from_state(make_preset("burgers", 1), y);
  // a = 1 + 0.05 y^2, f = 0.1 y y_x: the a_y and f_zeta contributions to e cancel for y = x
  for (int k : g->interior_nodes()) {
    const double x = g->coord(k, 0);
    const auto& s = c.slices[5];
    CHECK(s.b.xx[k] == doctest::Approx(1.0 + 0.05 * x * x).epsilon(1e-12));
    CHECK(s.B.xx[k] == doctest::Approx(1.0 + 0.05 * x * x).epsilon(1e-12));
    CHECK(s.f.x[k] == doctest::Approx(0.05 * x).epsilon(1e-12));
    CHECK(s.f0[k] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(std::abs(s.g.x[k]) <= 1e-14);
    CHECK(std::abs(s.g0[k]) <= 1e-12);
  }
}

TEST_CASE("large states violate the linearized ellipticity") {
  const auto g = build_grid(1, 16);
  const TimeGrid time(1.0, 16);
  IsotropicParams p;
  p.ag = -1.0;
  const SpaceTimeField y = SpaceTimeField::from_function(g, time, [](double, double x, double) { return 4.0 * x; });
  CHECK_THROWS_AS(coefficients_from_state(make_isotropic(1, p), y), CoefficientError);
}

TEST_CASE("zero data gives the zero equilibrium") {
  const HierarchicProblem p = zero_data(testing::problem("lq_16x32.cfg"));
  const NashSolution s = compute_nash(p, p.zeros());
  CHECK(max_abs(s.y) == 0.0);
  CHECK(max_abs(s.v[0]) == 0.0);
  CHECK(max_abs(s.v[1]) == 0.0);
  const auto [o1, o2] = kkt_nash_oracle(p, p.zeros());
  CHECK(max_abs(o1) == 0.0);
  CHECK(max_abs(o2) == 0.0);
}

TEST_CASE("followers without tracking weight stay idle") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  p.nu = {0.0, 0.0};
  const NashSolution s = compute_nash(p, p.zeros());
  CHECK(max_abs(s.v[0]) == 0.0);
  CHECK(max_abs(s.v[1]) == 0.0);
  const SpaceTimeField free = ForwardModel(p).solve(p.zeros(), p.zeros(), p.zeros());
  CHECK(max_abs(s.y - free) == 0.0);
}

TEST_CASE("Picard equilibrium agrees with the stacked optimality system") {
  const HierarchicProblem p = testing::problem("lq_16x32.cfg");
  const SpaceTimeField u = SpaceTimeField::from_function(
      p.grid, p.time, [](double t, double x, double) { return std::sin(M_PI * t) * std::sin(2.0 * M_PI * x); });
  for (const SpaceTimeField& leader : {p.zeros(), u}) {
    const auto [g1, g2] = nash_oracle_gap(p, leader);
    CHECK(g1 <= 1e-6);
    CHECK(g2 <= 1e-6);
  }
}

TEST_CASE("follower costs") {
  const HierarchicProblem p = testing::problem("lq_16x32.cfg");
  const NashSolution s = compute_nash(p, p.zeros(), tight());
  for (int k : {1, 2}) {
    const double J = cost_from_state(p, s.y, s.v[k - 1], k);
    CHECK(testing::rel(J, cost_by_hand(p, s.y, s.v[k - 1], k)) <= 1e-12);
    CHECK(testing::rel(J, evaluate_cost(p, p.zeros(), s.v[0], s.v[1], k)) <= 1e-10);
  }
  // no data and no controls cost nothing
  const HierarchicProblem z = zero_data(p);
  CHECK(evaluate_cost(z, z.zeros(), z.zeros(), z.zeros(), 1) == 0.0);
  CHECK_THROWS_AS(evaluate_cost(p, p.zeros(), p.zeros(), p.zeros(), 3), ConfigError);
}

TEST_CASE("equilibrium controls are supported in the follower regions") {
  const HierarchicProblem p = testing::problem("lq_24x48.cfg");
  const NashSolution s = compute_nash(p, p.zeros(), tight());
  for (int k : {1, 2}) {
    const Vector ind = p.follower_indicator(k);
    for (int m = 0; m <= p.time.steps(); ++m)
      for (int n = 0; n < p.grid->num_nodes(); ++n) {
        if (ind[n] == 0.0) CHECK(s.v[k - 1].slices[m][n] == 0.0);
        const double r = p.mu[k - 1] * s.v[k - 1].slices[m][n] - p.xi(k)[n] * s.p[k - 1].slices[m][n];
        CHECK(std::abs(r) <= 1e-14 * (1.0 + std::abs(s.p[k - 1].slices[m][n])));
      }
  }
}

TEST_CASE("Gateaux derivatives vanish at the equilibrium and match finite differences") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  NashSolution s = compute_nash(p, p.zeros(), tight());
  const LinearCoefficients lin = coefficients_from_state(p.nl, s.y);
  for (int k : {1, 2}) {
    const auto dirs = random_directions(p, k, 5, 99u);
    NashSolution copy = s;
    const auto [r1, r2] = gateaux_residual(p, p.zeros(), copy, dirs);
    CHECK((k == 1 ? r1 : r2) <= 1e-8);

    // away from the equilibrium the derivative is nonzero, linear in w and matches central differences
    NashSolution off = s;
    off.v[k - 1] *= 1.5;
    const ForwardModel model(p);
    off.y = model.solve(p.zeros(), off.v[0], off.v[1]);
    const double d0 = directional_derivative(p, off, lin, dirs[0], k);
    const double d1 = directional_derivative(p, off, lin, dirs[1], k);
    const double d01 = directional_derivative(p, off, lin, dirs[0] + 2.0 * dirs[1], k);
    CHECK(std::abs(d0) > 1e-6);
    CHECK(std::abs(d01 - (d0 + 2.0 * d1)) <= 1e-12 * (std::abs(d0) + std::abs(d1)));

    const double h = 1e-4;
    auto J = [&](double t) {
      std::array<SpaceTimeField, 2> v = off.v;
      v[k - 1].axpy(t, dirs[0]);
      return evaluate_cost(p, p.zeros(), v[0], v[1], k);
    };
    const double fd = (J(h) - J(-h)) / (2.0 * h);
    CHECK(std::abs(fd - d0) <= 1e-8 * (1.0 + std::abs(J(0.0))));
  }
}

TEST_CASE("Picard update norms decrease toward the end") {
  const HierarchicProblem p = testing::problem("lq_24x48.cfg");
  const NashSolution s = compute_nash(p, p.zeros(), tight());
  const auto& h = s.update_history;
  REQUIRE(h.size() >= 6);
  for (std::size_t i = h.size() - 5; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
  CHECK(s.final_update_norm <= 1e-13);
}

TEST_CASE("Picard budget exhaustion reports the history") {
  const HierarchicProblem p = testing::problem("lq_16x32.cfg");
  NashOptions o;
  o.tol = 1e-15;
  o.max_iter = 3;
  try {
    compute_nash(p, p.zeros(), o);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.history().size() == 3);
  }
  o.damping = 0.0;
  CHECK_THROWS_AS(compute_nash(p, p.zeros(), o), ConfigError);
}
