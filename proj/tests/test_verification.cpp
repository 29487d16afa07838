#include <doctest.h>

#include <cmath>

#include "hiercontrol/errors.hpp"
#include "hiercontrol/scenario.hpp"
#include "hiercontrol/verification.hpp"
#include "support.hpp"

using namespace hiercontrol;

namespace {

double max_abs(const SpaceTimeField& f) {
  double m = 0.0;
  for (const auto& s : f.slices) m = std::max(m, s.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("duality check at zero and nonzero states") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  const ProbeReport z = check_duality(p, p.zeros(), 10, 1u);
  CHECK(z.pass);
  CHECK(z.worst_ratio <= 1e-10);
  CHECK(z.budget == 1e-10);

  const SpaceTimeField y = ForwardModel(p).solve(p.zeros(), p.zeros(), p.zeros());
  const ProbeReport a = check_duality(p, y, 10, 2u);
  CHECK(a.pass);
  CHECK(a.samples + a.excluded == 10);

  // the identity is invariant under scaling the tracking weight
  p.nu[0] *= 7.0;
  const ProbeReport b = check_duality(p, y, 10, 2u);
  CHECK(b.worst_ratio <= 1e-10);
}

TEST_CASE("stacked oracle handles trivial games") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  p.nu = {0.0, 0.0};
  const auto [v1, v2] = kkt_nash_oracle(p, p.zeros());
  CHECK(max_abs(v1) == 0.0);
  CHECK(max_abs(v2) == 0.0);

  const HierarchicProblem big = testing::problem("heat_1d.cfg");
  CHECK_THROWS_AS(kkt_nash_oracle(big, big.zeros()), ConfigError);
}

TEST_CASE("second derivative representation") {
  HierarchicProblem p = testing::problem("lq_16x32.cfg");
  const NashSolution nash = compute_nash(p, p.zeros());
  const SpaceTimeField w = random_directions(p, 1, 1, 8u).front();
  const SecondOrderResult r = check_second_order(p, p.zeros(), nash.v[0], nash.v[1], w);
  CHECK(r.relative_gap <= 1e-2);
  CHECK(r.rep_value > 0.0);

  // without tracking only the control term remains
  p.nu[0] = 0.0;
  const SecondOrderResult c = check_second_order(p, p.zeros(), nash.v[0], nash.v[1], w);
  const double expected = p.mu[0] * inner_product(w.times(p.follower_indicator(1)), w);
  CHECK(std::abs(c.rep_value - expected) <= 1e-12 * expected);

  const SecondOrderResult zero = check_second_order(p, p.zeros(), nash.v[0], nash.v[1], p.zeros());
  CHECK(zero.rep_value == 0.0);
}

TEST_CASE("mu sweep of the second derivative is increasing") {
  const HierarchicProblem p = testing::problem("lq_16x32.cfg");
  const NashSolution nash = compute_nash(p, p.zeros());
  const SpaceTimeField w = random_directions(p, 1, 1, 8u).front();
  const SecondOrderSweep s = sweep_second_order(p, p.zeros(), nash.v[0], nash.v[1], w, {1e-4, 1e-2, 1.0, 1e2});
  REQUIRE(s.rep.size() == 4);
  for (std::size_t i = 1; i < s.rep.size(); ++i) CHECK(s.rep[i] > s.rep[i - 1]);
}

TEST_CASE("low-mode terminal data") {
  for (int dim : {1, 2}) {
    const auto g = build_grid(dim, 16);
    const Field f = random_low_mode_field(g, 9u);
    CHECK(norm(f) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.is_dirichlet());
    const Field again = random_low_mode_field(g, 9u);
    CHECK((f.values - again.values).cwiseAbs().maxCoeff() == 0.0);
  }
  // the smooth part is shared between grids: coarse nodes agree up to the noise level
  const Field c = random_low_mode_field(build_grid(1, 16), 4u);
  const Field f = random_low_mode_field(build_grid(1, 32), 4u);
  double diff = 0.0;
  for (int k = 0; k <= 16; ++k) diff = std::max(diff, std::abs(c.values[k] - f.values[2 * k]));
  CHECK(diff <= 0.1 * c.values.cwiseAbs().maxCoeff());
}

TEST_CASE("observability and Carleman probes produce finite ratios") {
  const Scenario sc = testing::scenario("lq_16x32.cfg");
  const HierarchicProblem p = testing::problem(sc);
  const CarlemanWeights w = build_weights(sc, p);
  const GramianContext ctx = linearize_at(p, p.zeros(), w);
  const ProbeReport o = probe_observability(ctx, 3, 1u);
  CHECK(o.samples == 3);
  CHECK(std::isfinite(o.worst_ratio));
  CHECK(o.worst_ratio > 0.0);
  CHECK(o.pass);

  const ProbeReport c = probe_carleman(ctx.coefficients(), w, default_focus(p), 3, 1u);
  CHECK(std::isfinite(c.worst_ratio));
  CHECK(c.worst_ratio >= 1.0);
  const nlohmann::json j = to_json(c);
  CHECK(j["samples"] == 3);
  CHECK(j.contains("worst_ratio"));
}

TEST_CASE("probe report bookkeeping") {
  ProbeReport r;
  r.budget = 1.0;
  r.ratios = {0.5, 0.25};
  r.finalize();
  CHECK(r.pass);
  CHECK(r.worst_ratio == 0.5);
  CHECK(r.samples == 2);
  r.ratios.push_back(2.0);
  r.finalize();
  CHECK_FALSE(r.pass);
  r.budget = std::numeric_limits<double>::infinity();
  r.ratios.push_back(std::numeric_limits<double>::infinity());
  r.finalize();
  CHECK_FALSE(r.pass);
}
