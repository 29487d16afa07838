// Acceptance driver: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <path to the hiercontrol binary>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hiercontrol/errors.hpp"
#include "hiercontrol/output.hpp"
#include "hiercontrol/scenario.hpp"
#include "hiercontrol/verification.hpp"

using namespace hiercontrol;
namespace fs = std::filesystem;

namespace {

std::string scenario_path(const std::string& file) { return std::string(HIERCONTROL_SCENARIO_DIR) + "/" + file; }

struct Bench {
  Scenario sc;
  HierarchicProblem prob;
};

std::unique_ptr<Bench> bench(const std::string& file) {
  auto b = std::make_unique<Bench>();
  b->sc = load_scenario(scenario_path(file));
  b->prob = build_problem(b->sc, HIERCONTROL_SCENARIO_DIR);
  return b;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

int failures = 0;

void report(int id, const std::string& title, const std::function<std::pair<bool, std::string>()>& body) {
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << detail << std::endl;
}

NashOptions nash_opts(const Scenario& sc) { return fixed_point_options(sc).nash; }

std::pair<bool, std::string> duality() {
  double worst = 0.0;
  int samples = 0;
  unsigned seed = 100;
  for (const char* file : {"heat_1d.cfg", "burgers_1d.cfg", "lq_24x48.cfg"}) {
    const auto b = bench(file);
    const NashSolution nash = compute_nash(b->prob, b->prob.zeros(), nash_opts(b->sc));
    const ProbeReport r = check_duality(b->prob, nash.y, 50, seed++);
    worst = std::max(worst, r.worst_ratio);
    samples += r.samples;
  }
  return {worst <= 1e-10 && samples > 0, "worst relative gap " + sci(worst) + " over " + std::to_string(samples) +
                                             " directions (budget 1e-10)"};
}

std::pair<bool, std::string> oracle() {
  double worst = 0.0;
  for (const char* file : {"lq_16x32.cfg", "lq_24x48.cfg", "lq_2d_16x32.cfg"}) {
    const auto b = bench(file);
    const auto& p = b->prob;
    const SpaceTimeField u = SpaceTimeField::from_function(
        p.grid, p.time, [](double t, double x, double) { return std::sin(M_PI * t) * std::sin(2.0 * M_PI * x); });
    for (const SpaceTimeField& leader : {p.zeros(), u}) {
      const auto [g1, g2] = nash_oracle_gap(p, leader);
      worst = std::max({worst, g1, g2});
    }
  }
  return {worst <= 1e-6, "worst relative L2 gap " + sci(worst) + " (budget 1e-6)"};
}

std::pair<bool, std::string> first_order() {
  double worst = 0.0;
  const double h = 1e-4;
  for (const char* file : {"heat_1d.cfg", "burgers_1d.cfg", "lq_24x48.cfg"}) {
    const auto b = bench(file);
    const auto& p = b->prob;
    const SpaceTimeField u = p.zeros();
    const NashSolution nash = compute_nash(p, u, nash_opts(b->sc));
    for (int k : {1, 2}) {
      const double J = cost_from_state(p, nash.y, nash.v[k - 1], k);
      for (const auto& w : random_directions(p, k, 10, b->sc.seed)) {
        auto cost = [&](double t) {
          std::array<SpaceTimeField, 2> v = nash.v;
          v[k - 1].axpy(t, w);
          return evaluate_cost(p, u, v[0], v[1], k);
        };
        worst = std::max(worst, std::abs(cost(h) - cost(-h)) / (2.0 * h) / (1.0 + std::abs(J)));
      }
    }
  }
  return {worst <= 1e-5, "worst |dJ_k| / (1 + |J_k|) " + sci(worst) + " (budget 1e-5)"};
}

std::pair<bool, std::string> gramian() {
  const auto b = bench("heat_1d.cfg");
  const auto& p = b->prob;
  const GramianContext ctx = linearize_at(p, p.zeros(), build_weights(b->sc, p), fixed_point_options(b->sc).coupled);
  double sym = 0.0, pos = 0.0;
  for (unsigned s = 0; s < 20; ++s) {
    const Field a = random_low_mode_field(p.grid, 1000 + 2 * s), c = random_low_mode_field(p.grid, 1001 + 2 * s);
    const Field La = gramian_apply(ctx, a), Lc = gramian_apply(ctx, c);
    const double ac = inner_product(La, c), ca = inner_product(a, Lc);
    const double scale = std::max({std::abs(ac), std::abs(ca), 1e-300});
    sym = std::max(sym, std::abs(ac - ca) / scale);
    pos = std::min(pos, inner_product(La, a));
  }
  return {sym <= 1e-10 && pos >= -1e-12,
          "symmetry gap " + sci(sym) + " (budget 1e-10), min <La,a> " + sci(pos) + " (floor -1e-12)"};
}

std::pair<bool, std::string> penalty_sweep() {
  const auto b = bench("heat_1d.cfg");
  const auto& p = b->prob;
  const FixedPointOptions fo = fixed_point_options(b->sc);
  const GramianContext ctx = linearize_at(p, p.zeros(), build_weights(b->sc, p), fo.coupled);
  bool ok = true;
  double previous = std::numeric_limits<double>::infinity();
  std::ostringstream d;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    LeaderOptions lo = fo.leader;
    lo.epsilon = eps;
    const LeaderSolution l = solve_leader(ctx, lo);
    const double y2 = l.terminal_norm * l.terminal_norm;
    ok = ok && l.terminal_norm <= previous && y2 <= 2.0 * eps * l.J_eps_value &&
         l.J_eps_value <= l.J_eps_zero;
    previous = l.terminal_norm;
    d << " eps=" << eps << ":|y(T)|=" << sci(l.terminal_norm);
  }
  return {ok, "monotone terminal norm, |y(T)|^2 <= 2 eps J and J <= J(0);" + d.str()};
}

std::pair<bool, std::string> burgers() {
  const auto b = bench("burgers_1d.cfg");
  const FixedPointReport r = solve_hierarchic(b->prob, build_weights(b->sc, b->prob), fixed_point_options(b->sc));
  double ratio = 0.0;
  for (std::size_t i = 1; i < r.update_norms.size(); ++i)
    ratio = std::max(ratio, r.update_norms[i] / r.update_norms[i - 1]);
  const double res = std::max(r.nash_residuals[0], r.nash_residuals[1]);
  const bool ok = r.converged && r.iterations <= 10 && r.update_norms.size() >= 2 && ratio < 0.5 && res <= 1e-4 &&
                  r.terminal_norm <= 3.0 * r.linearized_terminal_norm;
  return {ok, std::to_string(r.iterations) + " outer iterations, worst update ratio " + sci(ratio) +
                  ", Nash residual " + sci(res) + ", |y(T)| " + sci(r.terminal_norm) + " vs linearized " +
                  sci(r.linearized_terminal_norm)};
}

std::pair<bool, std::string> second_order() {
  double worst = 0.0, exact = 0.0;
  for (const char* file : {"heat_1d.cfg", "burgers_1d.cfg"}) {
    const auto b = bench(file);
    HierarchicProblem p = b->prob;
    const NashSolution nash = compute_nash(p, p.zeros(), nash_opts(b->sc));
    const auto dirs = random_directions(p, 1, 3, b->sc.seed);
    for (const auto& w : dirs)
      worst = std::max(worst, check_second_order(p, p.zeros(), nash.v[0], nash.v[1], w).relative_gap);
    p.nu[0] = 0.0;
    for (const auto& w : dirs) {
      const double rep = check_second_order(p, p.zeros(), nash.v[0], nash.v[1], w).rep_value;
      const double expected = p.mu[0] * inner_product(w.times(p.follower_indicator(1)), w);
      exact = std::max(exact, std::abs(rep - expected) / expected);
    }
  }
  return {worst <= 1e-2 && exact <= 1e-12,
          "worst relative gap " + sci(worst) + " (budget 1e-2), nu_1 = 0 deviation " + sci(exact) + " (budget 1e-12)"};
}

std::pair<bool, std::string> weight_laws() {
  const auto b = bench("heat_1d.cfg");
  const CarlemanWeights w = build_weights(b->sc, b->prob);
  const TimeGrid& time = b->prob.time;
  const int n = b->prob.grid->num_nodes();
  const double T = time.T();
  std::vector<std::string> broken;
  auto law = [&](bool ok, const std::string& name) {
    if (!ok) broken.push_back(name);
  };
  bool monotone = true;
  double prev = 0.0;
  for (int m = 0; m < time.steps(); ++m) {
    const double r = w.rho_hat(time.t(m));
    monotone = monotone && r >= prev && std::isfinite(r);
    prev = r;
  }
  law(monotone, "rho_hat non-decreasing");
  bool negative = true, beta = true, bar = true;
  for (int m = 1; m < time.steps(); ++m)
    for (int k = 0; k < n; ++k) {
      const CoreWeights c = w.eval(k, time.t(m));
      negative = negative && c.nu < 0.0;
      beta = beta && c.beta >= c.beta0 && c.beta0 > 0.0;
      if (time.t(m) >= 0.5 * T) bar = bar && std::abs(w.eval_terminal(k, time.t(m)).nu_bar - c.nu) <= 1e-14 * std::abs(c.nu);
    }
  law(negative, "nu < 0");
  law(beta, "beta >= beta0 > 0");
  law(bar, "nu_bar = nu on [T/2,T)");
  bool mid = true;
  for (int k = 0; k < n; ++k) {
    const double expected = 4.0 * std::exp(w.mu() * w.eta().values[k]) / (T * T);
    mid = mid && std::abs(w.eval(k, 0.5 * T).beta - expected) <= 1e-12 * expected;
  }
  law(mid, "beta(x,T/2) = 4 e^{mu eta} / T^2");
  law(std::abs(w.l(std::nextafter(0.5 * T, 0.0)) - w.l(0.5 * T)) <= 1e-15, "l continuous at T/2");
  bool threw = false;
  try {
    w.eval(0, 0.0);
  } catch (const EvaluationError&) {
    threw = true;
  }
  law(threw, "endpoint evaluation rejected");
  std::string detail = broken.empty() ? "all 7 laws hold on " + std::to_string(time.steps() - 1) + " interior slices"
                                      : "violated:";
  for (const auto& s : broken) detail += " [" + s + "]";
  return {broken.empty(), detail};
}

struct ProbeRun {
  double observability = 0.0;
  double carleman = 0.0;
};

ProbeRun run_probes(const Bench& b, bool carleman) {
  const CarlemanWeights w = build_weights(b.sc, b.prob);
  const GramianContext ctx = linearize_at(b.prob, b.prob.zeros(), w, fixed_point_options(b.sc).coupled);
  ProbeRun r;
  r.observability = probe_observability(ctx, 10, b.sc.seed).worst_ratio;
  if (carleman) r.carleman = probe_carleman(ctx.coefficients(), w, default_focus(b.prob), 10, b.sc.seed).worst_ratio;
  return r;
}

std::pair<bool, std::string> probes() {
  bool ok = true;
  std::ostringstream d;
  for (const char* file : {"heat_1d.cfg", "burgers_1d.cfg", "lq_16x32.cfg", "lq_24x48.cfg", "lq_2d_16x32.cfg"}) {
    auto b = bench(file);
    const ProbeRun coarse = run_probes(*b, true);
    // the refinement bound is asserted on the desk-scale grids; the oracle-sized ones are reported only
    const bool graded = b->sc.cells >= 64;
    b->sc.cells *= 2;
    b->sc.steps *= 2;
    b->prob = build_problem(b->sc, HIERCONTROL_SCENARIO_DIR);
    const ProbeRun fine = run_probes(*b, false);
    const double factor =
        std::max(coarse.observability / fine.observability, fine.observability / coarse.observability);
    const bool finite = std::isfinite(coarse.observability) && std::isfinite(fine.observability) &&
                        std::isfinite(coarse.carleman) && coarse.observability > 0.0 && fine.observability > 0.0;
    ok = ok && finite && (!graded || factor <= 2.0);
    d << " " << b->sc.name << ": obs " << sci(coarse.observability) << " (two-grid factor " << sci(factor)
      << (graded ? ", bound 2" : ", reported") << "), Carleman " << sci(coarse.carleman) << ";";
  }
  return {ok, "finite ratios everywhere, refinement factor <= 2 on 64-cell benchmarks;" + d.str()};
}

std::pair<bool, std::string> reproducible(const std::string& exe) {
  const fs::path root = fs::temp_directory_path() / "hiercontrol_acceptance";
  fs::remove_all(root);
  std::vector<std::string> dirs;
  for (const char* run : {"a", "b"}) {
    const fs::path out = root / run;
    const std::string cmd = "\"" + exe + "\" solve --config \"" + scenario_path("burgers_1d.cfg") + "\" --out \"" +
                            out.string() + "\" > /dev/null";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) return {false, "solve exited with status " + std::to_string(rc)};
    dirs.push_back(out.string());
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  int compared = 0;
  for (const char* f : {"u.csv", "y.csv", "v1.csv", "v2.csv"}) {
    const std::string a = slurp(fs::path(dirs[0]) / f), b = slurp(fs::path(dirs[1]) / f);
    if (a.empty() || a != b) return {false, std::string(f) + " differs between runs"};
    ++compared;
  }
  fs::remove_all(root);
  return {true, std::to_string(compared) + " CSV files byte-identical across two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <hiercontrol executable>\n";
    return 2;
  }
  const std::string exe = argv[1];
  report(1, "adjoint duality", duality);
  report(2, "Nash equilibrium against the stacked oracle", oracle);
  report(3, "first-order conditions by finite differences", first_order);
  report(4, "Gramian symmetry and positivity", gramian);
  report(5, "penalty sweep", penalty_sweep);
  report(6, "quasi-linear fixed point", burgers);
  report(7, "second-order representation", second_order);
  report(8, "weight laws", weight_laws);
  report(9, "observability and Carleman probes", probes);
  report(10, "reproducible CLI output", [&] { return reproducible(exe); });
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
