#pragma once

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hiercontrol/leader.hpp"
#include "hiercontrol/nash.hpp"

namespace hiercontrol {

/// Sampled ratio statistics of an oracle or probe.
struct ProbeReport {
  std::string name;
  int samples = 0;
  int excluded = 0;
  double worst_ratio = 0.0;
  std::vector<double> ratios;
  std::map<std::string, double> parameters;
  /// Ratios above the budget fail; infinity means "finite is enough".
  double budget = std::numeric_limits<double>::infinity();
  bool pass = true;
  std::vector<std::string> warnings;

  /// Recompute worst_ratio and pass from ratios.
  void finalize();
};

nlohmann::json to_json(const ProbeReport& r);

/// Largest grid the stacked KKT oracle accepts.
inline constexpr int kOracleMaxCells = 24;
inline constexpr int kOracleMaxSteps = 48;

/// Follower equilibrium of the linear-quadratic game from one sparse solve of the
/// two players' stacked optimality systems. Assembles its own stencils.
std::pair<SpaceTimeField, SpaceTimeField> kkt_nash_oracle(const HierarchicProblem& prob, const SpaceTimeField& u);

/// Relative L2(Q) distance between compute_nash and the oracle, per control.
std::pair<double, double> nash_oracle_gap(const HierarchicProblem& prob, const SpaceTimeField& u);

/// <xi_1 p_1, w>_Q against -nu_1 <xi_*(y - y_{1,d}), y_1[w]>_Q at the state `y`, over random w.
ProbeReport check_duality(const HierarchicProblem& prob, const SpaceTimeField& y, int trials, unsigned seed);

struct SecondOrderResult {
  double fd_value = 0.0;
  double rep_value = 0.0;
  double relative_gap = 0.0;
};

/// Second Gateaux derivative of J_1 at (u, v1, v2) in direction w: a central second
/// difference with step `fd_step` against mu_1 ||w||^2_{omega_1} + nu_1 <xi_1 w, W>_Q.
SecondOrderResult check_second_order(const HierarchicProblem& prob, const SpaceTimeField& u,
                                     const SpaceTimeField& v1, const SpaceTimeField& v2, const SpaceTimeField& w,
                                     double fd_step = 1e-3);

struct SecondOrderSweep {
  std::vector<double> mu;
  std::vector<double> rep;
  /// First mu at which rep becomes non-negative, NaN if no sign change.
  double sign_change = std::numeric_limits<double>::quiet_NaN();
};

/// rep_value for each mu_1 in `mus` (increasing), with the empirical sign change.
SecondOrderSweep sweep_second_order(const HierarchicProblem& prob, const SpaceTimeField& u,
                                    const SpaceTimeField& v1, const SpaceTimeField& v2, const SpaceTimeField& w,
                                    const std::vector<double>& mus);

/// Unit-norm terminal datum: a random mix of the 10 lowest sine modes plus white noise at -40 dB.
/// Mode coefficients depend only on the seed, so different grids sample the same function.
Field random_low_mode_field(const GridPtr& grid, unsigned seed);

/// (||phi(0)||^2 + sum_k int rho_hat^{-2} theta_k^2) / int int_{omega~_0} e^{2 lambda nu} beta^7 phi^2.
ProbeReport probe_observability(const GramianContext& ctx, int samples, unsigned seed);

/// Single-equation weighted energy ratio
///   int e^{2 lambda nu} (lambda mu^2 beta |grad v|^2 + lambda^3 mu^4 beta^3 v^2)
///   / lambda^3 mu^4 int_{obs} e^{2 lambda nu} beta^3 v^2
/// for backward solutions of the state adjoint with random terminal data.
ProbeReport probe_carleman(const LinearCoefficients& coeffs, const CarlemanWeights& weights, const Region& obs,
                           int samples, unsigned seed);

}  // namespace hiercontrol
