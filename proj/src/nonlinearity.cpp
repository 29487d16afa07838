#include "hiercontrol/nonlinearity.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

Nonlinearity make_isotropic(int dim, const IsotropicParams& p, std::string name) {
  if (dim != 1 && dim != 2) throw ConfigError("nonlinearity dimension must be 1 or 2");
  Nonlinearity nl;
  nl.name = std::move(name);
  nl.dim = dim;
  nl.linear = p.a2 == 0.0 && p.as == 0.0 && p.ag == 0.0 && p.c3 == 0.0 && p.cb == 0.0;
  const bool two = dim == 2;

  auto iso = [two](double v) { return Sym2{v, 0.0, two ? v : 0.0}; };
  auto zsum = [two](const Vec2& z) { return z[0] + (two ? z[1] : 0.0); };
  auto zsq = [two](const Vec2& z) { return z[0] * z[0] + (two ? z[1] * z[1] : 0.0); };

  nl.a = [=](double s, const Vec2& z) {
    return iso(p.a0 + p.a2 * s * s + p.as * s * s / (1.0 + s * s) + p.ag * zsq(z));
  };
  nl.a_y = [=](double s, const Vec2&) {
    const double d = 1.0 + s * s;
    return iso(2.0 * p.a2 * s + p.as * 2.0 * s / (d * d));
  };
  nl.a_zeta = [=](double, const Vec2& z) {
    return std::array<Sym2, 2>{iso(2.0 * p.ag * z[0]), two ? iso(2.0 * p.ag * z[1]) : Sym2{}};
  };
  nl.f = [=](double s, const Vec2& z) {
    return p.r * s + p.c3 * s * s * s + p.cb * s * zsum(z) + p.q * zsum(z);
  };
  nl.f_y = [=](double s, const Vec2& z) { return p.r + 3.0 * p.c3 * s * s + p.cb * zsum(z); };
  nl.f_zeta = [=](double s, const Vec2&) {
    const double v = p.cb * s + p.q;
    return Vec2{v, two ? v : 0.0};
  };
  return nl;
}

std::vector<std::string> preset_names() { return {"heat", "heat_cubic", "burgers", "gradient_diffusion"}; }

IsotropicParams preset_params(const std::string& name) {
  IsotropicParams p;
  if (name == "heat") return p;
  if (name == "heat_cubic") {
    p.c3 = 1.0;
    return p;
  }
  if (name == "burgers") {
    p.a2 = 0.05;
    p.cb = 0.1;
    return p;
  }
  if (name == "gradient_diffusion") {
    p.ag = 0.05;
    return p;
  }
  throw ConfigError("unknown nonlinearity preset '" + name + "'");
}

Nonlinearity make_preset(const std::string& name, int dim, const std::map<std::string, double>& overrides) {
  IsotropicParams p = preset_params(name);
  for (const auto& [key, value] : overrides) {
    if (key == "a0") p.a0 = value;
    else if (key == "a2") p.a2 = value;
    else if (key == "as") p.as = value;
    else if (key == "ag") p.ag = value;
    else if (key == "r") p.r = value;
    else if (key == "c3") p.c3 = value;
    else if (key == "cb") p.cb = value;
    else if (key == "q") p.q = value;
    else throw ConfigError("unknown nonlinearity parameter '" + key + "'");
  }
  return make_isotropic(dim, p, name);
}

void validate_nonlinearity(const Nonlinearity& nl, unsigned seed) {
  if (!nl.a || !nl.a_y || !nl.a_zeta || !nl.f || !nl.f_y || !nl.f_zeta) {
    throw ConfigError("nonlinearity '" + nl.name + "' is missing an evaluator");
  }
  if (nl.f(0.0, {0.0, 0.0}) != 0.0) throw ConfigError("nonlinearity '" + nl.name + "' violates f(0,0) = 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double step = 1e-6;
  const double tol = 1e-5;
  auto close = [&](double exact, double fd) { return std::abs(exact - fd) <= tol * std::max(1.0, std::abs(exact)); };
  auto fail = [&](const char* what, double s, const Vec2& z) {
    std::ostringstream msg;
    msg << "nonlinearity '" << nl.name << "': " << what << " inconsistent with finite differences at (s="
        << s << ", zeta=(" << z[0] << "," << z[1] << "))";
    throw ConfigError(msg.str());
  };

  for (int trial = 0; trial < 20; ++trial) {
    const double s = unif(rng);
    Vec2 z{unif(rng), nl.dim == 2 ? unif(rng) : 0.0};
    const Sym2 av = nl.a(s, z);
    if (nl.dim == 2 && !std::isfinite(av.xy)) fail("a^{12}", s, z);

    const Sym2 ap = nl.a(s + step, z), am = nl.a(s - step, z), ay = nl.a_y(s, z);
    if (!close(ay.xx, (ap.xx - am.xx) / (2 * step)) || !close(ay.xy, (ap.xy - am.xy) / (2 * step)) ||
        !close(ay.yy, (ap.yy - am.yy) / (2 * step)))
      fail("a_y", s, z);
    if (!close(nl.f_y(s, z), (nl.f(s + step, z) - nl.f(s - step, z)) / (2 * step))) fail("f_y", s, z);

    const auto az = nl.a_zeta(s, z);
    const Vec2 fz = nl.f_zeta(s, z);
    for (int l = 0; l < nl.dim; ++l) {
      Vec2 zp = z, zm = z;
      zp[l] += step;
      zm[l] -= step;
      const Sym2 p = nl.a(s, zp), m = nl.a(s, zm);
      if (!close(az[l].xx, (p.xx - m.xx) / (2 * step)) || !close(az[l].xy, (p.xy - m.xy) / (2 * step)) ||
          !close(az[l].yy, (p.yy - m.yy) / (2 * step)))
        fail("grad_zeta a", s, z);
      if (!close(fz[l], (nl.f(s, zp) - nl.f(s, zm)) / (2 * step))) fail("grad_zeta f", s, z);
    }
  }
}

const std::array<std::pair<double, double>, 8>& gauss_legendre8() {
  static const std::array<std::pair<double, double>, 8> rule = [] {
    // nodes/weights on [-1,1]
    const double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
    const double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    std::array<std::pair<double, double>, 8> r{};
    for (int i = 0; i < 4; ++i) {
      r[2 * i] = {0.5 * (1.0 - x[i]), 0.5 * w[i]};
      r[2 * i + 1] = {0.5 * (1.0 + x[i]), 0.5 * w[i]};
    }
    return r;
  }();
  return rule;
}

}  // namespace hiercontrol
