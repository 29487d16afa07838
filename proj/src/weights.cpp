#include "hiercontrol/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

namespace {

struct Profile1D {
  double c = 0.0;
  double xs = 0.5;     // shift point x*
  double peak = 1.0;   // value at the critical point, used for rescaling
  double crit = 0.5;

  double raw(double x) const { return x * (1.0 - x) * (1.0 + c * (x - xs)); }
  double raw_d(double x) const { return (1.0 - 2.0 * x) * (1.0 + c * (x - xs)) + c * x * (1.0 - x); }
  double value(double x) const { return raw(x) / peak; }
  double deriv(double x) const { return raw_d(x) / peak; }
};

double critical_point(const Profile1D& p) {
  double a = 0.0, b = 1.0;
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double m = 0.5 * (a + b);
    if (p.raw_d(m) > 0.0) a = m; else b = m;
  }
  return 0.5 * (a + b);
}

Profile1D build_profile(const Interval& focus, const char* axis) {
  if (!(focus.lo > 0.0 && focus.hi < 1.0 && focus.lo < focus.hi)) {
    std::ostringstream msg;
    msg << "focus region along " << axis << " must be a nonempty interval compactly inside (0,1)";
    throw ConstructionError(msg.str());
  }
  // The critical point can only reach (1/3, 2/3), and near those ends eta's boundary
  // gradient degenerates, so aim at the middle of the focus clipped to (0.35, 0.65).
  const double target_lo = std::max(focus.lo, 0.35), target_hi = std::min(focus.hi, 0.65);
  if (!(target_lo < target_hi)) {
    std::ostringstream msg;
    msg << "no admissible shape puts the critical point of eta inside (" << focus.lo << "," << focus.hi
        << ") along " << axis << "; reachable critical points lie in (0.35,0.65)";
    throw ConstructionError(msg.str());
  }
  Profile1D p;
  p.xs = 0.5 * (target_lo + target_hi);
  // 1 + c(x - x*) > 0 on [0,1] restricts c to (-1/(1-x*), 1/x*)
  const double shrink = 1.0 - 1e-9;
  double lo = -shrink / (1.0 - p.xs);
  double hi = shrink / p.xs;
  auto offset = [&](double c) {
    Profile1D q = p;
    q.c = c;
    return critical_point(q) - p.xs;
  };
  if (offset(lo) >= 0.0) {
    p.c = lo;
  } else if (offset(hi) <= 0.0) {
    p.c = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double m = 0.5 * (lo + hi);
      if (offset(m) < 0.0) lo = m; else hi = m;
    }
    p.c = 0.5 * (lo + hi);
  }
  if (std::abs(p.xs - 0.5) < 1e-15) p.c = 0.0;
  p.crit = critical_point(p);
  if (!focus.contains(p.crit)) {
    std::ostringstream msg;
    msg << "no admissible shape puts the critical point of eta inside (" << focus.lo << ","
        << focus.hi << ") along " << axis << "; reachable critical points lie in (0.35,0.65)";
    throw ConstructionError(msg.str());
  }
  p.peak = p.raw(p.crit);
  return p;
}

}  // namespace

EtaFunction build_eta(GridPtr grid, const Region& focus, double tol_grad) {
  const Profile1D px = build_profile(focus.x, "x");
  const Profile1D py = grid->dim() == 2 ? build_profile(focus.y, "y") : Profile1D{};
  const int nn = grid->num_nodes();

  EtaFunction e;
  e.eta = Field::zeros(grid);
  e.grad = VectorField::zeros(nn);
  e.critical_x = px.crit;
  e.shape_x = px.c;
  e.critical_y = py.crit;
  e.shape_y = py.c;

  for (int k = 0; k < nn; ++k) {
    const double x = grid->coord(k, 0);
    if (grid->dim() == 1) {
      e.eta.values[k] = grid->is_boundary(k) ? 0.0 : px.value(x);
      e.grad.x[k] = px.deriv(x);
    } else {
      const double y = grid->coord(k, 1);
      e.eta.values[k] = grid->is_boundary(k) ? 0.0 : px.value(x) * py.value(y);
      e.grad.x[k] = px.deriv(x) * py.value(y);
      e.grad.y[k] = px.value(x) * py.deriv(y);
    }
  }

  for (int k = 0; k < nn; ++k) {
    if (focus.contains(*grid, k)) continue;
    if (grid->dim() == 2) {
      auto [i, j] = grid->index(k);
      const int c = grid->cells();
      if ((i == 0 || i == c) && (j == 0 || j == c)) continue;
    }
    const double g = std::hypot(e.grad.x[k], grid->dim() == 2 ? e.grad.y[k] : 0.0);
    if (g < tol_grad) {
      std::ostringstream msg;
      msg << "|grad eta| = " << g << " < " << tol_grad << " at node " << k << " (x=" << grid->coord(k, 0);
      if (grid->dim() == 2) msg << ", y=" << grid->coord(k, 1);
      msg << ") outside the focus region";
      throw ConstructionError(msg.str());
    }
  }
  return e;
}

CarlemanWeights::CarlemanWeights(EtaFunction eta, double mu, double lambda, double T)
    : eta_(std::move(eta)), mu_(mu), lambda_(lambda), T_(T) {
  if (!(mu >= 1.0)) throw ConfigError("Carleman parameter mu must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("Carleman parameter lambda must be positive");
  if (!(T > 0.0)) throw ConfigError("final time must be positive");
  eta_max_ = eta_.eta.values.cwiseAbs().maxCoeff();
}

void CarlemanWeights::check_interior_time(double t) const {
  if (!(t > 0.0 && t < T_)) {
    std::ostringstream msg;
    msg << "Carleman weights are singular at t=" << t << "; need 0 < t < " << T_;
    throw EvaluationError(msg.str());
  }
}

CoreWeights CarlemanWeights::eval(int node, double t) const {
  check_interior_time(t);
  const double s = 1.0 / (t * (T_ - t));
  const double emu = std::exp(mu_ * eta_.eta.values[node]);
  const double e2 = std::exp(2.0 * mu_ * eta_max_);
  return {emu * s, (emu - e2) * s, s, (1.0 - e2) * s};
}

double CarlemanWeights::l(double t) const {
  return t <= 0.5 * T_ ? 0.25 * T_ * T_ : t * (T_ - t);
}

double CarlemanWeights::nu_bar_star(double t) const {
  const double lt = l(t);
  const double e2 = std::exp(2.0 * mu_ * eta_max_);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < eta_.eta.values.size(); ++k) {
    best = std::min(best, (std::exp(mu_ * eta_.eta.values[k]) - e2) / lt);
  }
  return best;
}

double CarlemanWeights::rho_hat(double t) const { return std::exp(-lambda_ * nu_bar_star(t)); }

TerminalWeights CarlemanWeights::eval_terminal(int node, double t) const {
  if (!(t >= 0.0 && t < T_)) {
    std::ostringstream msg;
    msg << "terminal weights need 0 <= t < T, got t=" << t;
    throw EvaluationError(msg.str());
  }
  const double lt = l(t);
  const double emu = std::exp(mu_ * eta_.eta.values[node]);
  const double e2 = std::exp(2.0 * mu_ * eta_max_);
  const double star = nu_bar_star(t);
  return {lt, emu / lt, (emu - e2) / lt, star, std::exp(-lambda_ * star)};
}

Vector CarlemanWeights::log_control_weight(double t, int k) const {
  check_interior_time(t);
  const double ls = -std::log(t * (T_ - t));
  const double s = 1.0 / (t * (T_ - t));
  const double e2 = std::exp(2.0 * mu_ * eta_max_);
  const int n = static_cast<int>(eta_.eta.values.size());
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    const double me = mu_ * eta_.eta.values[i];
    out[i] = 2.0 * lambda_ * (std::exp(me) - e2) * s + k * (me + ls);
  }
  return out;
}

Vector CarlemanWeights::control_weight(double t, int k) const {
  return log_control_weight(t, k).array().exp().matrix();
}

double CarlemanWeights::default_lambda(double mu, double eta_max, double T, double kappa) {
  return kappa * T * T / (8.0 * (std::exp(2.0 * mu * eta_max) - 1.0));
}

double CarlemanWeights::decay_threshold(int steps, int k) const {
  const double tau = T_ / steps;
  const double s1 = 1.0 / (tau * (T_ - tau));
  const double sh = 4.0 / (T_ * T_);
  const double e2 = std::exp(2.0 * mu_ * eta_max_);
  double thr = 0.0;
  for (int i = 0; i < eta_.eta.values.size(); ++i) {
    const double c = e2 - std::exp(mu_ * eta_.eta.values[i]);
    thr = std::max(thr, k * std::log(s1 / sh) / (2.0 * c * (s1 - sh)));
  }
  return thr;
}

}  // namespace hiercontrol
