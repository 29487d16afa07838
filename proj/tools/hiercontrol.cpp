#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hiercontrol/errors.hpp"
#include "hiercontrol/output.hpp"
#include "hiercontrol/scenario.hpp"
#include "hiercontrol/verification.hpp"

using namespace hiercontrol;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kNonConvergence = 3, kBudget = 4 };

struct Common {
  std::string config;
  std::string out = ".";
};

struct Loaded {
  Scenario scenario;
  std::string base_dir;
  HierarchicProblem problem;
};

Loaded load(const Common& c) {
  Loaded l;
  l.scenario = load_scenario(c.config);
  l.base_dir = fs::path(c.config).parent_path().string();
  if (l.base_dir.empty()) l.base_dir = ".";
  l.problem = build_problem(l.scenario, l.base_dir);
  fs::create_directories(c.out);
  return l;
}

std::string out_path(const Common& c, const std::string& file) { return (fs::path(c.out) / file).string(); }

/// ||f(t)|| per time slice.
Series norm_series(const SpaceTimeField& f, const std::string& name) {
  Series s{name, {}, {}};
  for (int m = 0; m < f.num_slices(); ++m) {
    s.x.push_back(f.time.t(m));
    s.y.push_back(norm(f.slice(m)));
  }
  return s;
}

/// Spatial profiles at t = T/4, T/2, 3T/4 (1D only).
std::vector<Series> profile_series(const SpaceTimeField& f, const std::string& name) {
  std::vector<Series> out;
  if (f.grid->dim() != 1) return out;
  const int M = f.time.steps();
  for (int m : {M / 4, M / 2, 3 * M / 4}) {
    Series s{name + "(t=" + format_value(f.time.t(m)) + ")", {}, {}};
    for (int k = 0; k < f.grid->num_nodes(); ++k) {
      s.x.push_back(f.grid->coord(k, 0));
      s.y.push_back(f.slices[m][k]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

json scenario_info(const Loaded& l, const CarlemanWeights& w) {
  return {{"name", l.scenario.name},     {"dim", l.scenario.dim},     {"cells", l.scenario.cells},
          {"steps", l.scenario.steps},   {"T", l.scenario.T},         {"lambda", w.lambda()},
          {"mu", w.mu()},                {"preset", l.scenario.preset}, {"seed", l.scenario.seed}};
}

// ---------------------------------------------------------------------------

int run_solve(const Common& c) {
  const Loaded l = load(c);
  const CarlemanWeights w = build_weights(l.scenario, l.problem);
  const FixedPointReport r = solve_hierarchic(l.problem, w, fixed_point_options(l.scenario));

  emit_csv(r.u, out_path(c, "u.csv"));
  emit_csv(r.y, out_path(c, "y.csv"));
  emit_csv(r.v[0], out_path(c, "v1.csv"));
  emit_csv(r.v[1], out_path(c, "v2.csv"));
  emit_svg({norm_series(r.y, "||y(t)||")}, out_path(c, "state_norm.svg"), "controlled state", "t", "L2 norm", true);
  Series upd{"update", {}, r.update_norms};
  for (std::size_t i = 0; i < r.update_norms.size(); ++i) upd.x.push_back(static_cast<double>(i + 1));
  emit_svg({upd}, out_path(c, "update_norms.svg"), "outer iteration", "iteration", "update norm", true);

  json j;
  j["scenario"] = scenario_info(l, w);
  j["epsilon"] = l.scenario.epsilon;
  j["iterations"] = r.iterations;
  j["update_norms"] = r.update_norms;
  j["linearized_terminal_norms"] = r.linearized_terminal_norms;
  j["terminal_norm"] = r.terminal_norm;
  j["linearized_terminal_norm"] = r.linearized_terminal_norm;
  j["J_eps"] = r.J_eps_value;
  j["nash_residuals"] = r.nash_residuals;
  j["nash_iterations"] = r.nash_iterations;
  j["converged"] = r.converged;
  j["warnings"] = r.warnings;
  j["norms"] = {{"u", norm(r.u)}, {"v1", norm(r.v[0])}, {"v2", norm(r.v[1])}, {"y", norm(r.y)}};
  emit_report(j, out_path(c, "solve_summary.json"));
  std::cout << j.dump(2) << "\n";
  return r.converged ? kOk : kNonConvergence;
}

int run_nash(const Common& c) {
  const Loaded l = load(c);
  const FixedPointOptions fo = fixed_point_options(l.scenario);
  const SpaceTimeField u = l.problem.zeros();
  NashSolution nash = compute_nash(l.problem, u, fo.nash);
  std::vector<SpaceTimeField> dirs = random_directions(l.problem, 1, fo.residual_directions, fo.seed);
  auto more = random_directions(l.problem, 2, fo.residual_directions, fo.seed);
  dirs.insert(dirs.end(), more.begin(), more.end());
  gateaux_residual(l.problem, u, nash, dirs);

  emit_csv(nash.y, out_path(c, "y.csv"));
  emit_csv(nash.v[0], out_path(c, "v1.csv"));
  emit_csv(nash.v[1], out_path(c, "v2.csv"));
  emit_svg({norm_series(nash.v[0], "||v1(t)||"), norm_series(nash.v[1], "||v2(t)||")},
           out_path(c, "follower_norms.svg"), "follower controls", "t", "L2 norm");

  json j;
  j["scenario"] = l.scenario.name;
  j["iterations"] = nash.picard_iterations;
  j["update_history"] = nash.update_history;
  j["final_update_norm"] = nash.final_update_norm;
  j["damping"] = nash.damping;
  j["residuals"] = nash.residuals;
  j["costs"] = {cost_from_state(l.problem, nash.y, nash.v[0], 1), cost_from_state(l.problem, nash.y, nash.v[1], 2)};
  j["warnings"] = l.problem.warnings();
  emit_report(j, out_path(c, "nash_summary.json"));
  std::cout << j.dump(2) << "\n";
  return kOk;
}

struct LeaderFlags {
  std::optional<double> epsilon, lambda, mu, cg_tol;
  std::optional<int> cg_max;
};

int run_leader(const Common& c, const LeaderFlags& f) {
  Loaded l = load(c);
  if (f.lambda) l.scenario.carleman_lambda = *f.lambda;
  if (f.mu) l.scenario.carleman_mu = *f.mu;
  if (f.epsilon) l.scenario.epsilon = *f.epsilon;
  if (f.cg_tol) l.scenario.tol.cg_tol = *f.cg_tol;
  if (f.cg_max) l.scenario.tol.cg_max = *f.cg_max;
  validate_scenario(l.scenario);
  const CarlemanWeights w = build_weights(l.scenario, l.problem);
  const FixedPointOptions fo = fixed_point_options(l.scenario);

  // linearize at the uncontrolled state
  const ForwardModel model(l.problem);
  const SpaceTimeField zero = l.problem.zeros();
  const GramianContext ctx = linearize_at(l.problem, model.solve(zero, zero, zero), w, fo.coupled);
  const LeaderSolution s = solve_leader(ctx, fo.leader);

  emit_csv(s.u, out_path(c, "u.csv"));
  emit_csv(s.state.y, out_path(c, "y.csv"));
  emit_svg({norm_series(s.state.y, "||y(t)||")}, out_path(c, "state_norm.svg"), "controlled state", "t", "L2 norm",
           true);
  if (l.problem.grid->dim() == 1)
    emit_svg(profile_series(s.u, "u"), out_path(c, "leader_slices.svg"), "leader control", "x", "u");

  json j;
  j["scenario"] = scenario_info(l, w);
  j["epsilon"] = s.epsilon;
  j["terminal_norm"] = s.terminal_norm;
  j["free_terminal_norm"] = s.free_terminal_norm;
  j["J_eps"] = s.J_eps_value;
  j["J_eps_zero"] = s.J_eps_zero;
  j["cg_iterations"] = static_cast<int>(s.cg_residuals.size()) - 1;
  j["cg_residuals"] = s.cg_residuals;
  j["control_norm"] = norm(s.u);
  j["decay_threshold"] = w.decay_threshold(l.scenario.steps);
  emit_report(j, out_path(c, "leader_summary.json"));
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int run_weights_dump(const Common& c) {
  const Loaded l = load(c);
  const CarlemanWeights w = build_weights(l.scenario, l.problem);
  const auto& g = *l.problem.grid;
  const TimeGrid& time = l.problem.time;
  std::string out = g.dim() == 1 ? "t,x,beta,nu,rho_hat\n" : "t,x,y,beta,nu,rho_hat\n";
  for (int m = 1; m < time.steps(); ++m) {
    const double t = time.t(m);
    const std::string rho = format_value(w.rho_hat(t));
    for (int k = 0; k < g.num_nodes(); ++k) {
      const CoreWeights cw = w.eval(k, t);
      out += format_value(t) + ',' + format_value(g.coord(k, 0)) + ',';
      if (g.dim() == 2) out += format_value(g.coord(k, 1)) + ',';
      out += format_value(cw.beta) + ',' + format_value(cw.nu) + ',' + rho + '\n';
    }
  }
  write_text(out, out_path(c, "weights.csv"));
  std::cout << "lambda " << format_value(w.lambda()) << ", mu " << format_value(w.mu()) << ", wrote "
            << out_path(c, "weights.csv") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

ProbeReport suite_duality(const Loaded& l) {
  const HierarchicProblem& prob = l.problem;
  const ForwardModel model(prob);
  const SpaceTimeField zero = prob.zeros();
  const FixedPointOptions fo = fixed_point_options(l.scenario);
  // three linearization contexts: zero state, uncontrolled state, Nash state at u = 0
  const std::vector<SpaceTimeField> contexts = {zero, model.solve(zero, zero, zero), compute_nash(prob, zero, fo.nash).y};
  ProbeReport all;
  all.name = "duality";
  all.budget = 1e-10;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const ProbeReport r = check_duality(prob, contexts[i], 50, l.scenario.seed + static_cast<unsigned>(i));
    all.ratios.insert(all.ratios.end(), r.ratios.begin(), r.ratios.end());
    all.excluded += r.excluded;
    all.warnings.insert(all.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  all.parameters = {{"contexts", 3.0}, {"trials", 50.0}, {"seed", l.scenario.seed}};
  all.finalize();
  return all;
}

ProbeReport suite_nash_oracle(const Loaded& l) {
  ProbeReport r;
  r.name = "nash-oracle";
  r.budget = 1e-6;
  const HierarchicProblem& prob = l.problem;
  if (!prob.nl.linear || prob.grid->cells() > kOracleMaxCells || prob.time.steps() > kOracleMaxSteps) {
    r.warnings.push_back("skipped: the stacked KKT oracle needs linear dynamics and at most " +
                         std::to_string(kOracleMaxCells) + " cells and " + std::to_string(kOracleMaxSteps) + " steps");
    r.finalize();
    return r;
  }
  const SpaceTimeField u = SpaceTimeField::from_function(
      prob.grid, prob.time, [](double t, double x, double) { return std::sin(M_PI * t) * std::sin(2.0 * M_PI * x); });
  for (const SpaceTimeField& leader : {prob.zeros(), u}) {
    const auto [g1, g2] = nash_oracle_gap(prob, leader);
    r.ratios.push_back(g1);
    r.ratios.push_back(g2);
  }
  r.parameters = {{"cells", prob.grid->cells()}, {"steps", prob.time.steps()}};
  r.finalize();
  return r;
}

json suite_second_order(const Loaded& l, bool& pass) {
  const HierarchicProblem& prob = l.problem;
  const FixedPointOptions fo = fixed_point_options(l.scenario);
  const SpaceTimeField u = prob.zeros();
  const NashSolution nash = compute_nash(prob, u, fo.nash);
  const auto dirs = random_directions(prob, 1, 3, l.scenario.seed);
  ProbeReport r;
  r.name = "second-order";
  r.budget = 1e-2;
  json samples = json::array();
  for (const auto& w : dirs) {
    const SecondOrderResult s = check_second_order(prob, u, nash.v[0], nash.v[1], w);
    r.ratios.push_back(s.relative_gap);
    samples.push_back({{"fd_value", s.fd_value}, {"rep_value", s.rep_value}, {"relative_gap", s.relative_gap}});
  }
  r.parameters = {{"fd_step", 1e-3}, {"mu1", prob.mu[0]}, {"nu1", prob.nu[0]}};
  r.finalize();
  pass = r.pass;

  std::vector<double> mus;
  for (int i = -6; i <= 2; ++i) mus.push_back(std::pow(10.0, i));
  const SecondOrderSweep sw = sweep_second_order(prob, u, nash.v[0], nash.v[1], dirs.front(), mus);
  json j = to_json(r);
  j["samples_detail"] = samples;
  j["mu_sweep"] = {{"mu1", sw.mu}, {"rep_value", sw.rep}};
  j["mu_sweep"]["sign_change"] = std::isnan(sw.sign_change) ? json(nullptr) : json(sw.sign_change);
  return j;
}

Loaded refined(const Loaded& l) {
  Loaded r = l;
  r.scenario.cells *= 2;
  r.scenario.steps *= 2;
  r.problem = build_problem(r.scenario, l.base_dir);
  return r;
}

json suite_observability(const Loaded& l, bool& pass) {
  const FixedPointOptions fo = fixed_point_options(l.scenario);
  auto probe = [&](const Loaded& x) {
    const CarlemanWeights w = build_weights(x.scenario, x.problem);
    const GramianContext ctx = linearize_at(x.problem, x.problem.zeros(), w, fo.coupled);
    return probe_observability(ctx, 10, x.scenario.seed);
  };
  ProbeReport coarse = probe(l);
  const Loaded fine_l = refined(l);
  const ProbeReport fine = probe(fine_l);
  const double factor = std::max(coarse.worst_ratio / fine.worst_ratio, fine.worst_ratio / coarse.worst_ratio);
  pass = coarse.pass && fine.pass && factor <= 2.0;
  json j = to_json(coarse);
  j["refined"] = to_json(fine);
  j["refinement_factor"] = std::isfinite(factor) ? json(factor) : json("inf");
  j["pass"] = pass;
  return j;
}

json suite_carleman(const Loaded& l, bool& pass) {
  const CarlemanWeights w = build_weights(l.scenario, l.problem);
  const FixedPointOptions fo = fixed_point_options(l.scenario);
  const GramianContext ctx = linearize_at(l.problem, l.problem.zeros(), w, fo.coupled);
  const Region focus = default_focus(l.problem);
  const ProbeReport r = probe_carleman(ctx.coefficients(), w, focus, 10, l.scenario.seed);
  json sweep = json::array();
  double previous = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    const CarlemanWeights ws(w.eta_function(), w.mu(), s * w.lambda(), w.T());
    const ProbeReport rs = probe_carleman(ctx.coefficients(), ws, focus, 10, l.scenario.seed);
    sweep.push_back({{"lambda", ws.lambda()}, {"worst_ratio", rs.worst_ratio}});
    if (rs.worst_ratio > previous) monotone = false;
    previous = rs.worst_ratio;
  }
  pass = r.pass;
  json j = to_json(r);
  j["lambda_sweep"] = sweep;
  j["lambda_sweep_non_increasing"] = monotone;
  return j;
}

int run_verify(const Common& c, const std::string& suite) {
  const Loaded l = load(c);
  json j;
  bool ok = true;
  auto want = [&](const std::string& s) { return suite == "all" || suite == s; };
  if (want("duality")) {
    const ProbeReport r = suite_duality(l);
    ok = ok && r.pass;
    j["duality"] = to_json(r);
  }
  if (want("nash-oracle")) {
    const ProbeReport r = suite_nash_oracle(l);
    ok = ok && r.pass;
    j["nash-oracle"] = to_json(r);
  }
  if (want("second-order")) {
    bool p = true;
    j["second-order"] = suite_second_order(l, p);
    ok = ok && p;
  }
  if (want("observability")) {
    bool p = true;
    j["observability"] = suite_observability(l, p);
    ok = ok && p;
  }
  if (want("carleman")) {
    bool p = true;
    j["carleman"] = suite_carleman(l, p);
    ok = ok && p;
  }
  j["pass"] = ok;
  emit_report(j, out_path(c, "verify_" + suite + ".json"));
  std::cout << j.dump(2) << "\n";
  return ok ? kOk : kBudget;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchic Stackelberg-Nash control of quasi-linear parabolic equations"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory");
  };

  auto* solve = app.add_subcommand("solve", "quasi-linear fixed point: leader control plus follower equilibrium");
  add_common(solve);
  auto* nash = app.add_subcommand("nash", "follower Nash equilibrium for u = 0");
  add_common(nash);
  auto* leader = app.add_subcommand("leader", "penalized leader control of the linearized system");
  add_common(leader);
  LeaderFlags lf;
  leader->add_option("--epsilon", lf.epsilon, "penalty parameter");
  leader->add_option("--lambda", lf.lambda, "weight parameter lambda (0 = default)");
  leader->add_option("--mu", lf.mu, "weight parameter mu");
  leader->add_option("--cg-tol", lf.cg_tol, "relative CG tolerance");
  leader->add_option("--cg-max", lf.cg_max, "CG iteration cap");
  auto* weights = app.add_subcommand("weights", "weight diagnostics");
  weights->require_subcommand(1);
  auto* dump = weights->add_subcommand("dump", "CSV of beta, nu and rho_hat on the interior time slices");
  add_common(dump);
  auto* verify = app.add_subcommand("verify", "oracle and probe suites");
  add_common(verify);
  std::string suite = "all";
  verify->add_option("--suite", suite, "suite to run")
      ->check(CLI::IsMember({"duality", "nash-oracle", "second-order", "observability", "carleman", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*solve) return run_solve(common);
    if (*nash) return run_nash(common);
    if (*leader) return run_leader(common, lf);
    if (*dump) return run_weights_dump(common);
    if (*verify) return run_verify(common, suite);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const CoefficientError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const ConditioningError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const OracleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
