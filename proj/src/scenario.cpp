#include "hiercontrol/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "hiercontrol/errors.hpp"

namespace hiercontrol {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("scenario key '" + key + "': " + what);
}

void reject_unknown(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
  if (!node.IsMap()) bad(path, "expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) bad(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double read_num(const YAML::Node& node, const std::string& key, const std::string& path, double fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<double>();
  } catch (const YAML::Exception&) {
    bad(join(path, key), "expected a number");
  }
}

int read_int(const YAML::Node& node, const std::string& key, const std::string& path, int fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<int>();
  } catch (const YAML::Exception&) {
    bad(join(path, key), "expected an integer");
  }
}

std::string read_str(const YAML::Node& node, const std::string& key, const std::string& path,
                     const std::string& fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  if (!v.IsScalar()) bad(join(path, key), "expected a string");
  return v.as<std::string>();
}

Interval read_interval(const YAML::Node& v, const std::string& path) {
  if (!v.IsSequence() || v.size() != 2) bad(path, "expected [lo, hi]");
  try {
    return {v[0].as<double>(), v[1].as<double>()};
  } catch (const YAML::Exception&) {
    bad(path, "interval bounds must be numbers");
  }
}

Region read_region(const YAML::Node& v, const std::string& path, int dim) {
  if (!v) bad(path, "missing");
  if (dim == 1) return {read_interval(v, path), Interval{}};
  if (!v.IsSequence() || v.size() != 2 || !v[0].IsSequence()) bad(path, "expected [[x_lo, x_hi], [y_lo, y_hi]]");
  return {read_interval(v[0], path + "[x]"), read_interval(v[1], path + "[y]")};
}

RegionPair read_pair(const YAML::Node& node, const std::string& path, int dim) {
  if (!node) bad(path, "missing");
  reject_unknown(node, path, {"outer", "inner"});
  return {read_region(node["outer"], path + ".outer", dim), read_region(node["inner"], path + ".inner", dim)};
}

ProfileSpec read_profile(const YAML::Node& node, const std::string& path) {
  ProfileSpec p;
  if (!node) return p;
  reject_unknown(node, path,
                 {"profile", "amplitude", "mode", "mode_y", "decay", "center", "center_y", "width", "path"});
  p.kind = read_str(node, "profile", path, "zero");
  p.amplitude = read_num(node, "amplitude", path, p.amplitude);
  p.mode = read_num(node, "mode", path, p.mode);
  p.mode_y = read_num(node, "mode_y", path, p.mode_y);
  p.decay = read_num(node, "decay", path, p.decay);
  p.center = read_num(node, "center", path, p.center);
  p.center_y = read_num(node, "center_y", path, p.center_y);
  p.width = read_num(node, "width", path, p.width);
  p.path = read_str(node, "path", path, "");
  return p;
}

void check_pair(const RegionPair& r, const std::string& key, int dim) {
  auto axis = [&](const Interval& in, const Interval& out, const std::string& ax) {
    if (!(out.lo >= 0.0 && out.hi <= 1.0 && out.lo < out.hi))
      bad(key + ".outer" + ax, "must be a nonempty interval inside (0,1)");
    if (!(in.lo < in.hi)) bad(key + ".inner" + ax, "must be a nonempty interval");
    if (!(out.lo < in.lo && in.hi < out.hi)) bad(key + ".inner" + ax, "closure of inner must lie inside outer");
  };
  axis(r.inner.x, r.outer.x, dim == 2 ? "[x]" : "");
  if (dim == 2) axis(r.inner.y, r.outer.y, "[y]");
}

void positive(double v, const std::string& key) {
  if (!(v > 0.0) || !std::isfinite(v)) bad(key, "must be positive");
}

std::string region_text(const Region& r, int dim) {
  auto iv = [](const Interval& i) { return "[" + fmt(i.lo) + ", " + fmt(i.hi) + "]"; };
  return dim == 1 ? iv(r.x) : "[" + iv(r.x) + ", " + iv(r.y) + "]";
}

std::string profile_text(const ProfileSpec& p) {
  std::ostringstream o;
  o << "{profile: " << p.kind << ", amplitude: " << fmt(p.amplitude) << ", mode: " << fmt(p.mode)
    << ", mode_y: " << fmt(p.mode_y) << ", decay: " << fmt(p.decay) << ", center: " << fmt(p.center)
    << ", center_y: " << fmt(p.center_y) << ", width: " << fmt(p.width);
  if (!p.path.empty()) o << ", path: \"" << p.path << "\"";
  o << "}";
  return o.str();
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find_first_of("abcdefghijklmnopqrstuvwxyz") != std::string::npos) continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

double profile_value(const ProfileSpec& p, int dim, double t, double x, double y) {
  const double time = std::exp(-p.decay * t);
  if (p.kind == "zero") return 0.0;
  if (p.kind == "sine") {
    double v = p.amplitude * std::sin(p.mode * M_PI * x);
    if (dim == 2) v *= std::sin(p.mode_y * M_PI * y);
    return v * time;
  }
  if (p.kind == "gaussian") {
    double r2 = (x - p.center) * (x - p.center);
    double v = 4.0 * x * (1.0 - x);
    if (dim == 2) {
      r2 += (y - p.center_y) * (y - p.center_y);
      v *= 4.0 * y * (1.0 - y);
    }
    return p.amplitude * v * std::exp(-r2 / (2.0 * p.width * p.width)) * time;
  }
  throw ConfigError("unknown profile kind '" + p.kind + "'");
}

const std::set<std::string> kProfiles = {"zero", "sine", "gaussian", "csv"};

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream msg;
    msg << origin << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw ParseError(msg.str(), e.mark.line + 1, e.mark.column + 1);
  }
  if (!root.IsMap()) throw ParseError(origin + ": top level must be a mapping", 1, 1);
  reject_unknown(root, "", {"name", "seed", "grid", "regions", "weights", "nonlinearity", "data", "tolerances",
                            "control_bound"});

  Scenario s;
  s.name = read_str(root, "name", "", s.name);
  s.seed = static_cast<unsigned>(read_int(root, "seed", "", static_cast<int>(s.seed)));
  s.control_bound = read_num(root, "control_bound", "", s.control_bound);

  const YAML::Node grid = root["grid"];
  if (!grid) bad("grid", "missing");
  reject_unknown(grid, "grid", {"dim", "cells", "T", "steps"});
  s.dim = read_int(grid, "dim", "grid", s.dim);
  s.cells = read_int(grid, "cells", "grid", s.cells);
  s.T = read_num(grid, "T", "grid", s.T);
  s.steps = read_int(grid, "steps", "grid", s.steps);
  if (s.dim != 1 && s.dim != 2) bad("grid.dim", "must be 1 or 2");

  const YAML::Node regions = root["regions"];
  if (!regions) bad("regions", "missing");
  reject_unknown(regions, "regions", {"leader", "follower1", "follower2", "observation"});
  s.leader = read_pair(regions["leader"], "regions.leader", s.dim);
  s.follower1 = read_pair(regions["follower1"], "regions.follower1", s.dim);
  s.follower2 = read_pair(regions["follower2"], "regions.follower2", s.dim);
  s.observation = read_pair(regions["observation"], "regions.observation", s.dim);

  if (const YAML::Node w = root["weights"]) {
    reject_unknown(w, "weights", {"mu1", "mu2", "nu1", "nu2", "carleman_mu", "carleman_lambda", "epsilon"});
    s.mu1 = read_num(w, "mu1", "weights", s.mu1);
    s.mu2 = read_num(w, "mu2", "weights", s.mu2);
    s.nu1 = read_num(w, "nu1", "weights", s.nu1);
    s.nu2 = read_num(w, "nu2", "weights", s.nu2);
    s.carleman_mu = read_num(w, "carleman_mu", "weights", s.carleman_mu);
    if (w["carleman_lambda"] && w["carleman_lambda"].IsScalar() &&
        w["carleman_lambda"].as<std::string>() == "auto") {
      s.carleman_lambda = 0.0;
    } else {
      s.carleman_lambda = read_num(w, "carleman_lambda", "weights", s.carleman_lambda);
    }
    s.epsilon = read_num(w, "epsilon", "weights", s.epsilon);
  }

  if (const YAML::Node nl = root["nonlinearity"]) {
    reject_unknown(nl, "nonlinearity", {"preset", "params", "rho0"});
    s.preset = read_str(nl, "preset", "nonlinearity", s.preset);
    s.rho0 = read_num(nl, "rho0", "nonlinearity", s.rho0);
    if (const YAML::Node params = nl["params"]) {
      if (!params.IsMap()) bad("nonlinearity.params", "expected a mapping");
      for (const auto& kv : params) {
        const std::string key = kv.first.as<std::string>();
        s.params[key] = read_num(params, key, "nonlinearity.params", 0.0);
      }
    }
  }

  if (const YAML::Node data = root["data"]) {
    reject_unknown(data, "data", {"y0", "target1", "target2"});
    s.y0 = read_profile(data["y0"], "data.y0");
    s.target1 = read_profile(data["target1"], "data.target1");
    s.target2 = read_profile(data["target2"], "data.target2");
  }

  if (const YAML::Node t = root["tolerances"]) {
    reject_unknown(t, "tolerances",
                   {"nash_tol", "nash_max_iter", "nash_damping", "coupled_tol", "coupled_max_iter", "cg_tol",
                    "cg_max", "outer_tol", "max_outer", "outer_damping", "refreshes", "data_budget"});
    auto& d = s.tol;
    d.nash_tol = read_num(t, "nash_tol", "tolerances", d.nash_tol);
    d.nash_max_iter = read_int(t, "nash_max_iter", "tolerances", d.nash_max_iter);
    d.nash_damping = read_num(t, "nash_damping", "tolerances", d.nash_damping);
    d.coupled_tol = read_num(t, "coupled_tol", "tolerances", d.coupled_tol);
    d.coupled_max_iter = read_int(t, "coupled_max_iter", "tolerances", d.coupled_max_iter);
    d.cg_tol = read_num(t, "cg_tol", "tolerances", d.cg_tol);
    d.cg_max = read_int(t, "cg_max", "tolerances", d.cg_max);
    d.outer_tol = read_num(t, "outer_tol", "tolerances", d.outer_tol);
    d.max_outer = read_int(t, "max_outer", "tolerances", d.max_outer);
    d.outer_damping = read_num(t, "outer_damping", "tolerances", d.outer_damping);
    d.refreshes = read_int(t, "refreshes", "tolerances", d.refreshes);
    d.data_budget = read_num(t, "data_budget", "tolerances", d.data_budget);
  }

  validate_scenario(s);
  return s;
}

void validate_scenario(const Scenario& s) {
  if (s.dim != 1 && s.dim != 2) bad("grid.dim", "must be 1 or 2");
  if (s.cells < 8) bad("grid.cells", "must be at least 8");
  if (s.steps < 16) bad("grid.steps", "must be at least 16");
  positive(s.T, "grid.T");

  check_pair(s.leader, "regions.leader", s.dim);
  check_pair(s.follower1, "regions.follower1", s.dim);
  check_pair(s.follower2, "regions.follower2", s.dim);
  check_pair(s.observation, "regions.observation", s.dim);
  if (!regions_intersect(s.leader.inner, s.observation.inner, s.dim)) {
    bad("regions", "overlap assumption violated: the leader inner region must intersect omega' "
                   "(regions.observation.inner)");
  }

  positive(s.mu1, "weights.mu1");
  positive(s.mu2, "weights.mu2");
  positive(s.nu1, "weights.nu1");
  positive(s.nu2, "weights.nu2");
  if (!(s.carleman_mu >= 1.0)) bad("weights.carleman_mu", "must be >= 1");
  if (!(s.carleman_lambda >= 0.0)) bad("weights.carleman_lambda", "must be positive or 'auto'");
  positive(s.epsilon, "weights.epsilon");
  positive(s.rho0, "nonlinearity.rho0");
  positive(s.control_bound, "control_bound");

  try {
    make_preset(s.preset, s.dim, s.params);
  } catch (const ConfigError& e) {
    bad("nonlinearity", e.what());
  }

  for (const auto& [key, p] : {std::pair<std::string, const ProfileSpec*>{"data.y0", &s.y0},
                               {"data.target1", &s.target1},
                               {"data.target2", &s.target2}}) {
    if (!kProfiles.count(p->kind)) bad(key + ".profile", "unknown profile '" + p->kind + "'");
    if (p->kind == "csv" && p->path.empty()) bad(key + ".path", "csv profile needs a path");
    if (p->kind == "gaussian") positive(p->width, key + ".width");
    if (!std::isfinite(p->amplitude)) bad(key + ".amplitude", "must be finite");
  }

  const auto& t = s.tol;
  positive(t.nash_tol, "tolerances.nash_tol");
  if (t.nash_max_iter < 1) bad("tolerances.nash_max_iter", "must be at least 1");
  if (!(t.nash_damping > 0.0 && t.nash_damping <= 1.0)) bad("tolerances.nash_damping", "must lie in (0,1]");
  positive(t.coupled_tol, "tolerances.coupled_tol");
  if (t.coupled_max_iter < 1) bad("tolerances.coupled_max_iter", "must be at least 1");
  positive(t.cg_tol, "tolerances.cg_tol");
  if (t.cg_max < 1) bad("tolerances.cg_max", "must be at least 1");
  positive(t.outer_tol, "tolerances.outer_tol");
  if (t.max_outer < 1) bad("tolerances.max_outer", "must be at least 1");
  if (!(t.outer_damping > 0.0 && t.outer_damping <= 1.0)) bad("tolerances.outer_damping", "must lie in (0,1]");
  if (t.refreshes < 0) bad("tolerances.refreshes", "must be non-negative");
  positive(t.data_budget, "tolerances.data_budget");
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::string emit_scenario(const Scenario& s) {
  std::ostringstream o;
  o << "name: \"" << s.name << "\"\n";
  o << "seed: " << s.seed << "\n";
  o << "control_bound: " << fmt(s.control_bound) << "\n";
  o << "grid:\n  dim: " << s.dim << "\n  cells: " << s.cells << "\n  T: " << fmt(s.T) << "\n  steps: " << s.steps
    << "\n";
  o << "regions:\n";
  for (const auto& [key, r] : {std::pair<const char*, const RegionPair*>{"leader", &s.leader},
                               {"follower1", &s.follower1},
                               {"follower2", &s.follower2},
                               {"observation", &s.observation}}) {
    o << "  " << key << ":\n    outer: " << region_text(r->outer, s.dim) << "\n    inner: "
      << region_text(r->inner, s.dim) << "\n";
  }
  o << "weights:\n  mu1: " << fmt(s.mu1) << "\n  mu2: " << fmt(s.mu2) << "\n  nu1: " << fmt(s.nu1)
    << "\n  nu2: " << fmt(s.nu2) << "\n  carleman_mu: " << fmt(s.carleman_mu) << "\n  carleman_lambda: "
    << (s.carleman_lambda > 0.0 ? fmt(s.carleman_lambda) : std::string("auto")) << "\n  epsilon: "
    << fmt(s.epsilon) << "\n";
  o << "nonlinearity:\n  preset: " << s.preset << "\n  rho0: " << fmt(s.rho0) << "\n";
  if (!s.params.empty()) {
    o << "  params:\n";
    for (const auto& [k, v] : s.params) o << "    " << k << ": " << fmt(v) << "\n";
  }
  o << "data:\n  y0: " << profile_text(s.y0) << "\n  target1: " << profile_text(s.target1)
    << "\n  target2: " << profile_text(s.target2) << "\n";
  const auto& t = s.tol;
  o << "tolerances:\n"
    << "  nash_tol: " << fmt(t.nash_tol) << "\n  nash_max_iter: " << t.nash_max_iter
    << "\n  nash_damping: " << fmt(t.nash_damping) << "\n  coupled_tol: " << fmt(t.coupled_tol)
    << "\n  coupled_max_iter: " << t.coupled_max_iter << "\n  cg_tol: " << fmt(t.cg_tol)
    << "\n  cg_max: " << t.cg_max << "\n  outer_tol: " << fmt(t.outer_tol) << "\n  max_outer: " << t.max_outer
    << "\n  outer_damping: " << fmt(t.outer_damping) << "\n  refreshes: " << t.refreshes
    << "\n  data_budget: " << fmt(t.data_budget) << "\n";
  return o.str();
}

Field make_field(const ProfileSpec& p, const GridPtr& grid, const std::string& base_dir) {
  Field f = Field::zeros(grid);
  if (p.kind == "csv") {
    const auto rows = read_csv_rows((std::filesystem::path(base_dir) / p.path).string());
    if (static_cast<int>(rows.size()) != grid->num_nodes()) {
      throw ConfigError("data file '" + p.path + "' has " + std::to_string(rows.size()) + " rows, expected " +
                        std::to_string(grid->num_nodes()));
    }
    for (int k = 0; k < grid->num_nodes(); ++k) f.values[k] = rows[k].back();
  } else {
    for (int k = 0; k < grid->num_nodes(); ++k)
      f.values[k] = profile_value(p, grid->dim(), 0.0, grid->coord(k, 0), grid->dim() == 2 ? grid->coord(k, 1) : 0.0);
  }
  for (int k = 0; k < grid->num_nodes(); ++k)
    if (grid->is_boundary(k)) f.values[k] = 0.0;
  return f;
}

SpaceTimeField make_trajectory(const ProfileSpec& p, const GridPtr& grid, const TimeGrid& time,
                               const std::string& base_dir) {
  SpaceTimeField f = SpaceTimeField::zeros(grid, time);
  if (p.kind == "csv") {
    const auto rows = read_csv_rows((std::filesystem::path(base_dir) / p.path).string());
    const std::size_t expected = static_cast<std::size_t>(time.steps() + 1) * grid->num_nodes();
    if (rows.size() != expected) {
      throw ConfigError("data file '" + p.path + "' has " + std::to_string(rows.size()) + " rows, expected " +
                        std::to_string(expected));
    }
    std::size_t r = 0;
    for (int m = 0; m <= time.steps(); ++m)
      for (int k = 0; k < grid->num_nodes(); ++k) f.slices[m][k] = rows[r++].back();
    return f;
  }
  for (int m = 0; m <= time.steps(); ++m)
    for (int k = 0; k < grid->num_nodes(); ++k)
      f.slices[m][k] = profile_value(p, grid->dim(), time.t(m), grid->coord(k, 0),
                                     grid->dim() == 2 ? grid->coord(k, 1) : 0.0);
  return f;
}

HierarchicProblem build_problem(const Scenario& s, const std::string& base_dir) {
  validate_scenario(s);
  HierarchicProblem p;
  p.grid = build_grid(s.dim, s.cells);
  p.time = TimeGrid(s.T, s.steps);
  p.leader = build_cutoff(p.grid, s.leader.inner, s.leader.outer);
  p.followers = {build_cutoff(p.grid, s.follower1.inner, s.follower1.outer),
                 build_cutoff(p.grid, s.follower2.inner, s.follower2.outer)};
  p.observation = build_cutoff(p.grid, s.observation.inner, s.observation.outer);
  p.mu = {s.mu1, s.mu2};
  p.nu = {s.nu1, s.nu2};
  p.targets = {make_trajectory(s.target1, p.grid, p.time, base_dir),
               make_trajectory(s.target2, p.grid, p.time, base_dir)};
  p.y0 = make_field(s.y0, p.grid, base_dir);
  p.nl = make_preset(s.preset, s.dim, s.params);
  p.nl.rho0 = s.rho0;
  validate_nonlinearity(p.nl, s.seed);
  p.control_bound = s.control_bound;
  p.forward_options.refreshes = s.tol.refreshes;
  p.validate();
  return p;
}

CarlemanWeights build_weights(const Scenario& s, const HierarchicProblem& prob) {
  return default_weights(prob, s.carleman_mu, s.carleman_lambda);
}

FixedPointOptions fixed_point_options(const Scenario& s) {
  FixedPointOptions o;
  o.leader.epsilon = s.epsilon;
  o.leader.cg_tol = s.tol.cg_tol;
  o.leader.cg_max = s.tol.cg_max;
  o.coupled.tol = s.tol.coupled_tol;
  o.coupled.max_iter = s.tol.coupled_max_iter;
  o.nash.tol = s.tol.nash_tol;
  o.nash.max_iter = s.tol.nash_max_iter;
  o.nash.damping = s.tol.nash_damping;
  o.outer_tol = s.tol.outer_tol;
  o.max_outer = s.tol.max_outer;
  o.damping = s.tol.outer_damping;
  o.data_budget = s.tol.data_budget;
  o.seed = s.seed;
  return o;
}

}  // namespace hiercontrol
