#include "hiercontrol/verification.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseLU>

#include "hiercontrol/errors.hpp"
#include "hiercontrol/parallel.hpp"

namespace hiercontrol {

void ProbeReport::finalize() {
  samples = static_cast<int>(ratios.size());
  worst_ratio = 0.0;
  bool finite = true;
  for (double r : ratios) {
    if (!std::isfinite(r)) finite = false;
    worst_ratio = std::max(worst_ratio, r);
  }
  if (!finite) worst_ratio = std::numeric_limits<double>::infinity();
  pass = finite && (std::isinf(budget) || worst_ratio <= budget);
}

nlohmann::json to_json(const ProbeReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["samples"] = r.samples;
  j["excluded"] = r.excluded;
  j["worst_ratio"] = std::isfinite(r.worst_ratio) ? nlohmann::json(r.worst_ratio) : nlohmann::json("inf");
  j["ratios"] = r.ratios;
  j["parameters"] = r.parameters;
  j["budget"] = std::isfinite(r.budget) ? nlohmann::json(r.budget) : nlohmann::json(nullptr);
  j["pass"] = r.pass;
  j["warnings"] = r.warnings;
  return j;
}

// ---------------------------------------------------------------------------
// Stacked KKT oracle

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Constant-coefficient stencil of -div(a grad) + q . grad + r on interior unknowns,
/// written out node by node.
void stencil(const SpatialGrid& g, const Sym2& a, const Vec2& q, double r, Triplets& out, int row0, int col0,
             double scale, bool transpose) {
  const double h = g.h();
  const int N = g.cells();
  auto add = [&](int row, int col, double v) {
    if (transpose) std::swap(row, col);
    out.emplace_back(row0 + row, col0 + col, scale * v);
  };
  for (int r_i = 0; r_i < g.num_interior(); ++r_i) {
    const auto ij = g.index(g.interior_nodes()[r_i]);
    const int i = ij[0], j = ij[1];
    auto at = [&](int ii, int jj) -> int {
      if (ii <= 0 || ii >= N) return -1;
      if (g.dim() == 2 && (jj <= 0 || jj >= N)) return -1;
      return g.interior_index(g.node(ii, jj));
    };
    double diag = r + 2.0 * a.xx / (h * h);
    const int w = at(i - 1, j), e = at(i + 1, j);
    if (w >= 0) add(r_i, w, -a.xx / (h * h) - q[0] / (2 * h));
    if (e >= 0) add(r_i, e, -a.xx / (h * h) + q[0] / (2 * h));
    if (g.dim() == 2) {
      diag += 2.0 * a.yy / (h * h);
      const int s = at(i, j - 1), n = at(i, j + 1);
      if (s >= 0) add(r_i, s, -a.yy / (h * h) - q[1] / (2 * h));
      if (n >= 0) add(r_i, n, -a.yy / (h * h) + q[1] / (2 * h));
      // -2 a_xy d_x d_y with central differences
      const double c = -2.0 * a.xy / (4.0 * h * h);
      const int ne = at(i + 1, j + 1), nw = at(i - 1, j + 1), se = at(i + 1, j - 1), sw = at(i - 1, j - 1);
      if (ne >= 0) add(r_i, ne, c);
      if (sw >= 0) add(r_i, sw, c);
      if (nw >= 0) add(r_i, nw, -c);
      if (se >= 0) add(r_i, se, -c);
    }
    add(r_i, r_i, diag);
  }
}

}  // namespace

std::pair<SpaceTimeField, SpaceTimeField> kkt_nash_oracle(const HierarchicProblem& prob, const SpaceTimeField& u) {
  prob.validate();
  if (!prob.nl.linear) throw ConfigError("the KKT oracle needs linear dynamics");
  const auto& g = *prob.grid;
  const int M = prob.time.steps();
  if (g.cells() > kOracleMaxCells || M > kOracleMaxSteps) {
    std::ostringstream msg;
    msg << "the KKT oracle accepts at most " << kOracleMaxCells << " cells and " << kOracleMaxSteps << " steps";
    throw ConfigError(msg.str());
  }
  require_same_grid(u, prob.zeros());

  const Vec2 zero{0.0, 0.0};
  const Sym2 a = prob.nl.a(0.0, zero);
  const Vec2 q = prob.nl.f_zeta(0.0, zero);
  const double r = prob.nl.f_y(0.0, zero);
  const double tau = prob.time.tau();
  const int n = g.num_interior();
  const auto& nodes = g.interior_nodes();

  // control unknowns only where the indicator of omega_k is one
  std::array<std::vector<int>, 2> support;
  for (int k = 0; k < 2; ++k) {
    const Vector ind = prob.follower_indicator(k + 1);
    for (int i = 0; i < n; ++i)
      if (ind[nodes[i]] > 0.5) support[k].push_back(i);
  }
  const int nv1 = static_cast<int>(support[0].size()), nv2 = static_cast<int>(support[1].size());
  const int block = 3 * n + nv1 + nv2;
  auto Y = [&](int m) { return (m - 1) * block; };
  auto Lam = [&](int m, int k) { return (m - 1) * block + n + k * n; };
  auto V = [&](int m, int k) { return (m - 1) * block + 3 * n + (k == 0 ? 0 : nv1); };
  const int size = M * block;

  Triplets t;
  Vector rhs = Vector::Zero(size);
  const Vector& xi0 = prob.xi(0);
  const Vector& xs = prob.xi_star();
  for (int m = 1; m <= M; ++m) {
    // state: (I + tau L) y^m - y^{m-1} - tau sum xi_k v_k^m = tau xi_0 u^m (+ y0 at m = 1)
    stencil(g, a, q, r, t, Y(m), Y(m), tau, false);
    for (int i = 0; i < n; ++i) {
      t.emplace_back(Y(m) + i, Y(m) + i, 1.0);
      if (m > 1) t.emplace_back(Y(m) + i, Y(m - 1) + i, -1.0);
      rhs[Y(m) + i] = tau * xi0[nodes[i]] * u.slices[m][nodes[i]] + (m == 1 ? prob.y0.values[nodes[i]] : 0.0);
    }
    for (int k = 0; k < 2; ++k) {
      const Vector& xk = prob.xi(k + 1);
      for (int s = 0; s < static_cast<int>(support[k].size()); ++s) {
        const int i = support[k][s];
        t.emplace_back(Y(m) + i, V(m, k) + s, -tau * xk[nodes[i]]);
      }
    }
    for (int k = 0; k < 2; ++k) {
      // multiplier: (I + tau L)^T lam^m - lam^{m+1} - tau nu_k xi_* y^m = -tau nu_k xi_* y_kd^m
      stencil(g, a, q, r, t, Lam(m, k), Lam(m, k), tau, true);
      const double nu = prob.nu[k];
      for (int i = 0; i < n; ++i) {
        t.emplace_back(Lam(m, k) + i, Lam(m, k) + i, 1.0);
        if (m < M) t.emplace_back(Lam(m, k) + i, Lam(m + 1, k) + i, -1.0);
        t.emplace_back(Lam(m, k) + i, Y(m) + i, -tau * nu * xs[nodes[i]]);
        rhs[Lam(m, k) + i] = -tau * nu * xs[nodes[i]] * prob.targets[k].slices[m][nodes[i]];
      }
      // stationarity: mu_k v_k + xi_k lam_k = 0 on omega_k
      const Vector& xk = prob.xi(k + 1);
      for (int s = 0; s < static_cast<int>(support[k].size()); ++s) {
        const int i = support[k][s];
        t.emplace_back(V(m, k) + s, V(m, k) + s, prob.mu[k]);
        t.emplace_back(V(m, k) + s, Lam(m, k) + i, xk[nodes[i]]);
      }
    }
  }
  SparseMatrix K(size, size);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success) throw OracleError("KKT system is singular: " + lu.lastErrorMessage());
  const Vector x = lu.solve(rhs);
  if (!x.allFinite()) throw OracleError("KKT solve produced non-finite values");

  std::pair<SpaceTimeField, SpaceTimeField> out{prob.zeros(), prob.zeros()};
  for (int m = 1; m <= M; ++m) {
    for (int k = 0; k < 2; ++k) {
      auto& v = (k == 0 ? out.first : out.second).slices[m];
      for (int s = 0; s < static_cast<int>(support[k].size()); ++s) v[nodes[support[k][s]]] = x[V(m, k) + s];
    }
  }
  return out;
}

std::pair<double, double> nash_oracle_gap(const HierarchicProblem& prob, const SpaceTimeField& u) {
  const auto oracle = kkt_nash_oracle(prob, u);
  NashOptions opts;
  opts.tol = 1e-13;
  opts.max_iter = 500;
  const NashSolution nash = compute_nash(prob, u, opts);
  auto rel = [](const SpaceTimeField& a, const SpaceTimeField& b) {
    const double nb = norm(b);
    const double d = norm(a - b);
    return nb > 0.0 ? d / nb : d;
  };
  return {rel(nash.v[0], oracle.first), rel(nash.v[1], oracle.second)};
}

// ---------------------------------------------------------------------------
// Duality and second order

ProbeReport check_duality(const HierarchicProblem& prob, const SpaceTimeField& y, int trials, unsigned seed) {
  require_same_grid(y, prob.zeros());
  ProbeReport rep;
  rep.name = "duality";
  rep.budget = 1e-10;
  rep.parameters["trials"] = trials;
  rep.parameters["seed"] = seed;

  const LinearCoefficients lin = coefficients_from_state(prob.nl, y);
  const StepSolver follower(lin, Family::follower);
  const SpaceTimeField p1 = follower_adjoint(prob, follower, y, 1);
  const SpaceTimeField dev = (y - prob.targets[0]).times(prob.xi_star());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<SpaceTimeField> dirs;
  for (int s = 0; s < trials; ++s) {
    SpaceTimeField w = prob.zeros();
    for (int m = 1; m < w.num_slices(); ++m)
      for (int node : prob.grid->interior_nodes()) w.slices[m][node] = normal(rng);
    dirs.push_back(std::move(w));
  }
  std::vector<double> gaps(trials, 0.0);
  std::vector<int> skip(trials, 0);
  parallel_for(trials, [&](int s) {
    const SpaceTimeField src = dirs[s].times(prob.xi(1));
    const SpaceTimeField y1 = forward(follower, src, Field::zeros(prob.grid));
    const double lhs = inner_product(src, p1);
    const double rhs = -prob.nu[0] * inner_product(dev, y1);
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale < 1e-300) {
      skip[s] = 1;
      return;
    }
    gaps[s] = std::abs(lhs - rhs) / scale;
  });
  for (int s = 0; s < trials; ++s) {
    if (skip[s])
      ++rep.excluded;
    else
      rep.ratios.push_back(gaps[s]);
  }
  if (rep.excluded > 0) rep.warnings.push_back("both sides vanish for some directions; they were excluded");
  rep.finalize();
  return rep;
}

namespace {

struct SecondOrderParts {
  double control;  // ||w||^2 on omega_1
  double pairing;  // <xi_1 w, W>_Q
};

SecondOrderParts second_order_parts(const HierarchicProblem& prob, const SpaceTimeField& y, const SpaceTimeField& w) {
  const LinearCoefficients lin = coefficients_from_state(prob.nl, y);
  const StepSolver follower(lin, Family::follower);
  const Field zero = Field::zeros(prob.grid);
  const SpaceTimeField src = w.times(prob.xi(1));
  const SpaceTimeField s = forward(follower, src, zero);
  const SpaceTimeField q = backward(follower, (y - prob.targets[0]).times(prob.xi_star()), zero);

  SpaceTimeField rhs = s.times(prob.xi_star());
  if (!prob.nl.linear) {
    double smax = 0.0;
    for (const auto& sl : s.slices) smax = std::max(smax, sl.cwiseAbs().maxCoeff());
    if (smax > 0.0) {
      // derivative of the follower operator along s by central differences of the linearization
      const double delta = 1e-5 / smax;
      SpaceTimeField yp = y, ym = y;
      yp.axpy(delta, s);
      ym.axpy(-delta, s);
      const LinearCoefficients lp = coefficients_from_state(prob.nl, yp);
      const LinearCoefficients lm = coefficients_from_state(prob.nl, ym);
      for (int m = 0; m < rhs.num_slices(); ++m) {
        const SparseMatrix dP = (lp.follower_operator(m) - lm.follower_operator(m)) / (2.0 * delta);
        rhs.slices[m] -= apply(dP, q.slice(m)).values;
      }
    }
  }
  const SpaceTimeField W = backward(follower, rhs, zero);
  return {inner_product(w.times(prob.follower_indicator(1)), w), inner_product(src, W)};
}

}  // namespace

SecondOrderResult check_second_order(const HierarchicProblem& prob, const SpaceTimeField& u,
                                     const SpaceTimeField& v1, const SpaceTimeField& v2, const SpaceTimeField& w,
                                     double fd_step) {
  if (!(fd_step > 0.0)) throw ConfigError("second-order step must be positive");
  // fully implicit steps, so the discrete map is differentiated consistently
  HierarchicProblem p = prob;
  p.forward_options.converge = true;
  p.forward_options.tol = 1e-14;
  const ForwardModel model(p);

  const SpaceTimeField y = model.solve(u, v1, v2);
  SpaceTimeField vp = v1, vm = v1;
  vp.axpy(fd_step, w);
  vm.axpy(-fd_step, w);
  const double j0 = cost_from_state(p, y, v1, 1);
  const double jp = cost_from_state(p, model.solve(u, vp, v2), vp, 1);
  const double jm = cost_from_state(p, model.solve(u, vm, v2), vm, 1);

  SecondOrderResult out;
  out.fd_value = (jp - 2.0 * j0 + jm) / (fd_step * fd_step);
  const SecondOrderParts parts = second_order_parts(p, y, w);
  out.rep_value = p.mu[0] * parts.control + p.nu[0] * parts.pairing;
  const double scale = std::max(std::abs(out.fd_value), std::abs(out.rep_value));
  out.relative_gap = scale > 0.0 ? std::abs(out.fd_value - out.rep_value) / scale : 0.0;
  return out;
}

SecondOrderSweep sweep_second_order(const HierarchicProblem& prob, const SpaceTimeField& u,
                                    const SpaceTimeField& v1, const SpaceTimeField& v2, const SpaceTimeField& w,
                                    const std::vector<double>& mus) {
  HierarchicProblem p = prob;
  p.forward_options.converge = true;
  const ForwardModel model(p);
  const SecondOrderParts parts = second_order_parts(p, model.solve(u, v1, v2), w);
  SecondOrderSweep out;
  for (double mu : mus) {
    out.mu.push_back(mu);
    out.rep.push_back(mu * parts.control + p.nu[0] * parts.pairing);
  }
  for (std::size_t i = 1; i < out.rep.size(); ++i) {
    if (out.rep[i - 1] < 0.0 && out.rep[i] >= 0.0) {
      out.sign_change = out.mu[i];
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observability and Carleman probes

Field random_low_mode_field(const GridPtr& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 10> c;
  for (double& v : c) v = normal(rng);

  std::vector<std::array<int, 2>> modes;
  if (grid->dim() == 1) {
    for (int k = 1; k <= 10; ++k) modes.push_back({k, 0});
  } else {
    for (int k = 1; k <= 6; ++k)
      for (int l = 1; l <= 6; ++l) modes.push_back({k, l});
    std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) {
      return a[0] * a[0] + a[1] * a[1] < b[0] * b[0] + b[1] * b[1];
    });
    modes.resize(10);
  }
  Field f = Field::from_function(grid, [&](double x, double y) {
    double s = 0.0;
    for (int i = 0; i < 10; ++i) {
      double v = c[i] * std::sin(modes[i][0] * M_PI * x);
      if (modes[i][1] > 0) v *= std::sin(modes[i][1] * M_PI * y);
      s += v;
    }
    return s;
  });
  for (int node = 0; node < f.values.size(); ++node)
    if (grid->is_boundary(node)) f.values[node] = 0.0;
  // white noise 40 dB below the signal
  Field noise = Field::zeros(grid);
  for (int node : grid->interior_nodes()) noise.values[node] = normal(rng);
  const double ns = norm(noise), fs = norm(f);
  if (ns > 0.0) f.values += (0.01 * fs / ns) * noise.values;
  const double nf = norm(f);
  if (nf > 0.0) f.values /= nf;
  return f;
}

ProbeReport probe_observability(const GramianContext& ctx, int samples, unsigned seed) {
  const HierarchicProblem& prob = ctx.problem();
  const auto& w = ctx.weights();
  const int M = prob.time.steps();
  const double tau = prob.time.tau();
  const Vector obs = [&] {
    Vector v = Vector::Zero(prob.grid->num_nodes());
    for (int k = 0; k < v.size(); ++k) v[k] = prob.leader.inner.contains(*prob.grid, k) ? 1.0 : 0.0;
    return v;
  }();
  std::vector<double> theta_weight(M + 1, 0.0);
  for (int m = 1; m < M; ++m) theta_weight[m] = 1.0 / std::pow(w.rho_hat(prob.time.t(m)), 2);

  ProbeReport rep;
  rep.name = "observability";
  rep.parameters["lambda"] = w.lambda();
  rep.parameters["mu"] = w.mu();
  rep.parameters["cells"] = prob.grid->cells();
  rep.parameters["steps"] = M;
  rep.parameters["seed"] = seed;

  std::vector<double> ratio(samples, 0.0);
  std::vector<int> skip(samples, 0);
  parallel_for(samples, [&](int s) {
    const Field phiT = random_low_mode_field(prob.grid, seed + 101u * static_cast<unsigned>(s));
    const CoupledAdjoint adj = solve_coupled_adjoint(ctx, phiT);
    double lhs = std::pow(norm(adj.phi.slice(0)), 2);
    double rhs = 0.0;
    for (int m = 1; m < M; ++m) {
      for (int k = 0; k < 2; ++k) lhs += tau * theta_weight[m] * std::pow(norm(adj.theta[k].slice(m)), 2);
      const Vector& cw = ctx.control_weight(m);
      for (int node = 0; node < cw.size(); ++node) {
        const double ph = adj.phi.slices[m][node];
        rhs += tau * prob.grid->quadrature_weight(node) * obs[node] * cw[node] * ph * ph;
      }
    }
    if (!(rhs > 1e-300)) {
      skip[s] = 1;
      return;
    }
    ratio[s] = lhs / rhs;
  });
  for (int s = 0; s < samples; ++s) {
    if (skip[s])
      ++rep.excluded;
    else
      rep.ratios.push_back(ratio[s]);
  }
  if (rep.excluded > 0) rep.warnings.push_back("observation term underflowed for some samples; they were excluded");
  rep.finalize();
  return rep;
}

ProbeReport probe_carleman(const LinearCoefficients& coeffs, const CarlemanWeights& weights, const Region& obs,
                           int samples, unsigned seed) {
  const auto& g = *coeffs.grid;
  const int M = coeffs.time.steps();
  const double tau = coeffs.time.tau();
  const double lam = weights.lambda(), mu = weights.mu();
  const StepSolver steps(coeffs, Family::state);

  // log weights of the two energy terms, shifted by a common maximum to avoid underflow
  std::vector<Vector> log1(M + 1), log3(M + 1);
  double shift = -std::numeric_limits<double>::infinity();
  for (int m = 1; m < M; ++m) {
    log1[m] = weights.log_control_weight(coeffs.time.t(m), 1).array() + std::log(lam * mu * mu);
    log3[m] = weights.log_control_weight(coeffs.time.t(m), 3).array() + 3.0 * std::log(lam) + 4.0 * std::log(mu);
    shift = std::max({shift, log1[m].maxCoeff(), log3[m].maxCoeff()});
  }
  Vector in_obs = Vector::Zero(g.num_nodes());
  for (int k = 0; k < g.num_nodes(); ++k) in_obs[k] = obs.contains(g, k) ? 1.0 : 0.0;

  ProbeReport rep;
  rep.name = "carleman";
  rep.parameters["lambda"] = lam;
  rep.parameters["mu"] = mu;
  rep.parameters["cells"] = g.cells();
  rep.parameters["steps"] = M;
  rep.parameters["seed"] = seed;

  std::vector<double> ratio(samples, 0.0);
  std::vector<int> skip(samples, 0);
  parallel_for(samples, [&](int s) {
    const Field vT = random_low_mode_field(coeffs.grid, seed + 101u * static_cast<unsigned>(s));
    const SpaceTimeField v = backward(steps, SpaceTimeField::zeros(coeffs.grid, coeffs.time), vT);
    double lhs = 0.0, rhs = 0.0;
    for (int m = 1; m < M; ++m) {
      const VectorField dv = gradient(v.slice(m));
      for (int k = 0; k < g.num_nodes(); ++k) {
        const double val = v.slices[m][k];
        double grad2 = dv.x[k] * dv.x[k];
        if (g.dim() == 2) grad2 += dv.y[k] * dv.y[k];
        const double wq = tau * g.quadrature_weight(k);
        const double e3 = std::exp(log3[m][k] - shift) * val * val;
        lhs += wq * (std::exp(log1[m][k] - shift) * grad2 + e3);
        rhs += wq * in_obs[k] * e3;
      }
    }
    if (!(rhs > 1e-300)) {
      skip[s] = 1;
      return;
    }
    ratio[s] = lhs / rhs;
  });
  for (int s = 0; s < samples; ++s) {
    if (skip[s])
      ++rep.excluded;
    else
      rep.ratios.push_back(ratio[s]);
  }
  if (rep.excluded > 0) rep.warnings.push_back("observation term underflowed for some samples; they were excluded");
  rep.finalize();
  return rep;
}

}  // namespace hiercontrol
