#include <doctest.h>

#include <cmath>
#include <random>

#include "hiercontrol/errors.hpp"
#include "hiercontrol/fixedpoint.hpp"
#include "hiercontrol/verification.hpp"
#include "support.hpp"

using namespace hiercontrol;

namespace {

struct Setup {
  HierarchicProblem prob;
  std::unique_ptr<GramianContext> ctx;
};

/// Context frozen at the zero state; the problem lives on the heap so the context reference stays valid.
std::unique_ptr<Setup> setup(HierarchicProblem p, CoupledOptions opts = {}) {
  auto s = std::make_unique<Setup>();
  s->prob = std::move(p);
  s->ctx = std::make_unique<GramianContext>(linearize_at(s->prob, s->prob.zeros(), default_weights(s->prob), opts));
  return s;
}

double max_abs(const SpaceTimeField& f) {
  double m = 0.0;
  for (const auto& s : f.slices) m = std::max(m, s.cwiseAbs().maxCoeff());
  return m;
}

LeaderOptions leader_opts(double eps) {
  LeaderOptions o;
  o.epsilon = eps;
  o.cg_tol = 1e-10;
  return o;
}

}  // namespace

TEST_CASE("coupled systems vanish for zero data") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  p.y0 = Field::zeros(p.grid);
  p.targets = {p.zeros(), p.zeros()};
  const auto s = setup(p);
  const CoupledPrimal pr = solve_coupled_primal(*s->ctx, p.zeros(), p.y0, true);
  CHECK(max_abs(pr.y) == 0.0);
  CHECK(max_abs(pr.p[0]) == 0.0);
  const CoupledAdjoint ad = solve_coupled_adjoint(*s->ctx, Field::zeros(p.grid));
  CHECK(max_abs(ad.phi) == 0.0);
  CHECK(max_abs(ad.theta[1]) == 0.0);
  CHECK(norm(gramian_apply(*s->ctx, Field::zeros(p.grid))) == 0.0);

  const LeaderSolution l = solve_leader(*s->ctx, leader_opts(1e-3));
  CHECK(max_abs(l.u) == 0.0);
  CHECK(l.terminal_norm == 0.0);
  CHECK(l.cg_residuals.empty());
}

TEST_CASE("expensive followers decouple from the state") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  p.mu = {1e12, 1e12};
  const auto s = setup(p);
  const SpaceTimeField u = SpaceTimeField::from_function(
      p.grid, p.time, [](double t, double x, double) { return t * std::sin(M_PI * x); });
  const CoupledPrimal pr = solve_coupled_primal(*s->ctx, u, p.y0, true);
  const SpaceTimeField alone = ForwardModel(p).solve(u, p.zeros(), p.zeros());
  CHECK(norm(pr.y - alone) <= 1e-8 * norm(alone));
}

TEST_CASE("Picard and monolithic coupled solves agree") {
  const auto s = setup(testing::problem("lq_16x32.cfg"));
  const auto& p = s->prob;
  REQUIRE(s->ctx->monolithic_allowed());
  const SpaceTimeField u = SpaceTimeField::from_function(
      p.grid, p.time, [](double t, double x, double) { return std::cos(M_PI * t) * x * (1.0 - x); });
  const CoupledPrimal a = solve_coupled_primal(*s->ctx, u, p.y0, true, false);
  const CoupledPrimal b = solve_coupled_primal(*s->ctx, u, p.y0, true, true);
  CHECK(norm(a.y - b.y) <= 1e-8 * norm(b.y));
  CHECK(norm(a.p[0] - b.p[0]) <= 1e-8 * norm(b.p[0]));
  CHECK(norm(a.p[1] - b.p[1]) <= 1e-8 * norm(b.p[1]));

  const Field phiT = random_low_mode_field(p.grid, 3u);
  const CoupledAdjoint c = solve_coupled_adjoint(*s->ctx, phiT, false);
  const CoupledAdjoint d = solve_coupled_adjoint(*s->ctx, phiT, true);
  CHECK(norm(c.phi - d.phi) <= 1e-8 * norm(d.phi));
  CHECK(norm(c.theta[0] - d.theta[0]) <= 1e-8 * norm(d.theta[0]));
}

TEST_CASE("adjoint without tracking reduces to a single backward solve") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  p.nu = {0.0, 0.0};
  const auto s = setup(p);
  const Field phiT = random_low_mode_field(p.grid, 5u);
  const CoupledAdjoint ad = solve_coupled_adjoint(*s->ctx, phiT);
  const SpaceTimeField plain = backward(s->ctx->state_steps(), p.zeros(), phiT);
  CHECK(max_abs(ad.phi - plain) == 0.0);
  CHECK_THROWS_AS(solve_coupled_adjoint(*s->ctx, Field{p.grid, Vector::Ones(p.grid->num_nodes())}), ConfigError);
}

TEST_CASE("primal and adjoint coupled systems are in duality") {
  for (const char* file : {"lq_16x32.cfg", "lq_2d_16x32.cfg"}) {
    const auto s = setup(testing::problem(file));
    const auto& p = s->prob;
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 3; ++trial) {
      const SpaceTimeField u = testing::random_trajectory(p.grid, p.time, rng);
      const Field phiT = testing::random_field(p.grid, rng);
      const CoupledPrimal pr = solve_coupled_primal(*s->ctx, u, p.y0, true);
      const CoupledAdjoint ad = solve_coupled_adjoint(*s->ctx, phiT);
      const int M = p.time.steps();
      const double lhs = inner_product(pr.y.slice(M), phiT);
      double rhs = inner_product(u.times(p.xi(0)), ad.phi) + inner_product(p.y0, ad.phi.slice(0));
      for (int k = 0; k < 2; ++k) rhs += p.nu[k] * inner_product(p.targets[k].times(p.xi_star()), ad.theta[k]);
      CHECK(std::abs(lhs - rhs) <= 1e-9 * (std::abs(lhs) + std::abs(rhs)));
    }
  }
}

TEST_CASE("Gramian is symmetric and positive semidefinite") {
  const auto s = setup(testing::problem("lq_16x32.cfg"));
  const auto& g = s->prob.grid;
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const Field a = testing::random_field(g, rng), b = testing::random_field(g, rng);
    const Field La = gramian_apply(*s->ctx, a), Lb = gramian_apply(*s->ctx, b);
    const double ab = inner_product(La, b), ba = inner_product(a, Lb);
    CHECK(std::abs(ab - ba) <= 1e-10 * std::max({std::abs(ab), std::abs(ba), 1e-300}));
    CHECK(inner_product(La, a) >= -1e-12 * norm(La) * norm(a));
  }
}

TEST_CASE("leader control trades terminal size against control cost") {
  const auto s = setup(testing::problem("lq_16x32.cfg"));
  const auto& ctx = *s->ctx;
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const LeaderSolution l = solve_leader(ctx, leader_opts(eps));
    CHECK(l.terminal_norm <= previous);
    previous = l.terminal_norm;
    CHECK(l.terminal_norm * l.terminal_norm <= 2.0 * eps * l.J_eps_value * (1.0 + 1e-12));
    CHECK(l.J_eps_value <= l.J_eps_zero);
    CHECK(l.cg_residuals.back() <= 1e-10);
    // u is the weighted adjoint restricted to the leader region
    CHECK(max_abs(l.u - control_from_adjoint(ctx, l.phi)) == 0.0);
    for (int n = 0; n < s->prob.grid->num_nodes(); ++n)
      if (s->prob.xi(0)[n] == 0.0) CHECK(l.u.slices[s->prob.time.steps() / 2][n] == 0.0);
  }
  const LeaderSolution lazy = solve_leader(ctx, leader_opts(1e6));
  CHECK(lazy.terminal_norm >= 0.99 * lazy.free_terminal_norm);
  CHECK_THROWS_AS(solve_leader(ctx, leader_opts(0.0)), ConfigError);
}

TEST_CASE("leader control minimizes the penalized functional") {
  const auto s = setup(testing::problem("lq_16x32.cfg"));
  const auto& ctx = *s->ctx;
  const auto& p = s->prob;
  const double eps = 1e-3;
  const LeaderSolution l = solve_leader(ctx, leader_opts(eps));
  const int M = p.time.steps();
  auto J = [&](const SpaceTimeField& u) {
    return penalized_functional(ctx, u, solve_coupled_primal(ctx, u, p.y0, true).y.slice(M), eps);
  };
  const double J0 = J(l.u);
  CHECK(testing::rel(J0, l.J_eps_value) <= 1e-10);
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    SpaceTimeField d = testing::random_trajectory(p.grid, p.time, rng).times(p.xi(0));
    d.slices[M].setZero();
    d *= 1e-3 * norm(l.u) / norm(d);
    CHECK(J(l.u + d) >= J0 * (1.0 - 1e-10));
    CHECK(J(l.u - d) >= J0 * (1.0 - 1e-10));
  }
}

TEST_CASE("leader CG reports its budget") {
  const auto s = setup(testing::problem("lq_16x32.cfg"));
  LeaderOptions o = leader_opts(1e-6);
  o.cg_max = 2;
  o.cg_tol = 1e-14;
  CHECK_THROWS_AS(solve_leader(*s->ctx, o), NonConvergenceError);
}
