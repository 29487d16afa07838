#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>

#include "hiercontrol/grid.hpp"

namespace hiercontrol {

using Vec2 = std::array<double, 2>;

struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
};

/// Quasi-linear coefficients a^{ij}(s, zeta) and f(s, zeta) with their partials.
/// zeta has `dim` meaningful components; the rest are zero.
struct Nonlinearity {
  std::string name;
  int dim = 1;
  double rho0 = 0.1;
  /// a constant and f linear in (s, zeta)
  bool linear = false;

  std::function<Sym2(double, const Vec2&)> a;
  std::function<Sym2(double, const Vec2&)> a_y;
  /// d a / d zeta_l for l = 0, 1
  std::function<std::array<Sym2, 2>(double, const Vec2&)> a_zeta;
  std::function<double(double, const Vec2&)> f;
  std::function<double(double, const Vec2&)> f_y;
  std::function<Vec2(double, const Vec2&)> f_zeta;
};

/// Parameters of the isotropic family
///   a = a0 + a2 s^2 + as s^2/(1+s^2) + ag |zeta|^2
///   f = r s + c3 s^3 + cb s sum(zeta) + q sum(zeta)
struct IsotropicParams {
  double a0 = 1.0;
  double a2 = 0.0;
  double as = 0.0;
  double ag = 0.0;
  double r = 0.0;
  double c3 = 0.0;
  double cb = 0.0;
  double q = 0.0;
};

Nonlinearity make_isotropic(int dim, const IsotropicParams& p, std::string name = "custom");

/// Named presets: heat, heat_cubic, burgers, gradient_diffusion. Entries in
/// `overrides` replace the preset's IsotropicParams by field name.
Nonlinearity make_preset(const std::string& name, int dim,
                         const std::map<std::string, double>& overrides = {});
IsotropicParams preset_params(const std::string& name);
std::vector<std::string> preset_names();

/// Checks symmetry, f(0,0) = 0 and the partials against central differences
/// (step 1e-6, tolerance 1e-5 relative) at 20 pseudo-random points.
void validate_nonlinearity(const Nonlinearity& nl, unsigned seed = 20240611u);

/// 8-point Gauss-Legendre nodes/weights on [0,1].
const std::array<std::pair<double, double>, 8>& gauss_legendre8();

}  // namespace hiercontrol
