#include "specmax/config.hpp"

#include <fstream>
#include <sstream>

#include "specmax/error.hpp"
#include "specmax/oracle.hpp"

namespace specmax {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_schedule(const std::string& text, long lineno) {
  std::vector<double> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw config_error("config line " + std::to_string(lineno) +
                         ": bad schedule entry '" + item + "'");
    }
  }
  if (out.empty())
    throw config_error("config line " + std::to_string(lineno) +
                       ": empty schedule");
  return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long lineno = 0;

  auto fail = [&](const std::string& what) {
    return config_error(origin + " line " + std::to_string(lineno) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw fail("malformed section header");
      section = t.substr(1, t.size() - 2);
      if (section != "manifold" && section != "solver" && section != "optimizer" &&
          section != "run")
        throw fail("unknown section [" + section + "]");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty()) throw fail("empty key or value");

    auto as_double = [&]() {
      try {
        return std::stod(val);
      } catch (...) {
        throw fail("bad numeric value '" + val + "'");
      }
    };
    auto as_int = [&]() {
      try {
        return std::stol(val);
      } catch (...) {
        throw fail("bad integer value '" + val + "'");
      }
    };
    auto as_bool = [&]() {
      if (val == "true" || val == "1") return true;
      if (val == "false" || val == "0") return false;
      throw fail("bad boolean value '" + val + "'");
    };

    if (section == "manifold") {
      if (key == "generator") cfg.generator = val;
      else if (key == "radius") cfg.radius = as_double();
      else if (key == "radius2") cfg.radius2 = as_double();
      else if (key == "nodes") cfg.nodes = static_cast<int>(as_int());
      else if (key == "nodes2") cfg.nodes2 = static_cast<int>(as_int());
      else if (key == "dim") cfg.dim = static_cast<int>(as_int());
      else if (key == "potential") { cfg.potential = as_double(); cfg.has_potential = true; }
      else if (key == "mesh") cfg.mesh_path = val;
      else throw fail("unknown key '" + key + "' in [manifold]");
    } else if (section == "solver") {
      if (key == "solver_tol") cfg.solver_tol = as_double();
      else if (key == "cluster_tol") cfg.cluster_tol = as_double();
      else if (key == "null_tol") cfg.null_tol = as_double();
      else if (key == "dense_threshold") cfg.dense_threshold = as_int();
      else if (key == "count") cfg.count = static_cast<int>(as_int());
      else if (key == "residual_tol") cfg.residual_tol = as_double();
      else if (key == "max_basis") cfg.max_basis = static_cast<int>(as_int());
      else throw fail("unknown key '" + key + "' in [solver]");
    } else if (section == "optimizer") {
      if (key == "schedule") cfg.schedule = parse_schedule(val, lineno);
      else if (key == "eul_tol") cfg.eul_tol = as_double();
      else if (key == "c_drop_tol") cfg.c_drop_tol = as_double();
      else if (key == "max_iters") cfg.max_iters = static_cast<int>(as_int());
      else if (key == "backtrack_tol") cfg.backtrack_tol = as_double();
      else if (key == "blowup_factor") cfg.blowup_factor = as_double();
      else if (key == "cert_window_frac") cfg.cert_window_frac = as_double();
      else if (key == "limit_tol") cfg.limit_tol = as_double();
      else if (key == "limit_max_iters") cfg.limit_max_iters = static_cast<int>(as_int());
      else if (key == "polish_eps_max") cfg.polish_eps_max = as_double();
      else if (key == "start") cfg.start = val;
      else if (key == "start_amplitude") cfg.start_amplitude = as_double();
      else throw fail("unknown key '" + key + "' in [optimizer]");
    } else if (section == "run") {
      if (key == "seed") cfg.seed = static_cast<uint64_t>(as_int());
      else if (key == "out") cfg.out_dir = val;
      else if (key == "trials") cfg.trials = static_cast<int>(as_int());
      else if (key == "threads") cfg.threads = static_cast<int>(as_int());
      else if (key == "resume") cfg.resume = as_bool();
      else if (key == "maximality_tol") cfg.maximality_tol = as_double();
      else throw fail("unknown key '" + key + "' in [run]");
    } else {
      throw fail("key outside of any [section]");
    }
  }

  // validation
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0))
      throw config_error(origin + ": " + name + " must be positive");
  };
  positive(cfg.solver_tol, "solver_tol");
  positive(cfg.cluster_tol, "cluster_tol");
  positive(cfg.null_tol, "null_tol");
  positive(cfg.residual_tol, "residual_tol");
  positive(cfg.c_drop_tol, "c_drop_tol");
  positive(cfg.backtrack_tol, "backtrack_tol");
  positive(cfg.blowup_factor, "blowup_factor");
  positive(cfg.limit_tol, "limit_tol");
  if (cfg.maximality_tol < 0.0)
    throw config_error(origin + ": maximality_tol must be nonnegative");
  for (size_t i = 0; i < cfg.schedule.size(); ++i) {
    if (!(cfg.schedule[i] > 0.0))
      throw config_error(origin + ": schedule entries must be positive");
    if (i > 0 && !(cfg.schedule[i] < cfg.schedule[i - 1]))
      throw config_error(origin + ": schedule must be strictly decreasing");
  }
  if (cfg.start != "perturbed" && cfg.start != "constant")
    throw config_error(origin + ": start must be 'perturbed' or 'constant'");
  if (cfg.trials < 1) throw config_error(origin + ": trials must be >= 1");
  if (cfg.threads < 1) throw config_error(origin + ": threads must be >= 1");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

DiscreteManifold instantiate_manifold(const RunConfig& cfg) {
  if (cfg.generator == "circle") {
    DiscreteManifold m = build_circle(cfg.radius, cfg.nodes, cfg.dim);
    if (cfg.has_potential) m = with_potential(m, cfg.potential);
    return m;
  }
  if (cfg.generator == "product_circles") {
    DiscreteManifold a = build_circle(cfg.radius, cfg.nodes);
    DiscreteManifold b =
        build_circle(cfg.radius2, cfg.nodes2, std::max(1, cfg.dim - 1));
    DiscreteManifold p = with_dimension(product(a, b), cfg.dim);
    if (cfg.has_potential) p = with_potential(p, cfg.potential);
    return p;
  }
  if (cfg.generator == "product_example") {
    return build_product_example(cfg.nodes, cfg.nodes2, cfg.radius, cfg.radius2,
                                 cfg.has_potential ? cfg.potential : -2.0,
                                 cfg.dim);
  }
  if (cfg.generator == "nodal_example") {
    return build_nodal_example(cfg.nodes, cfg.dim);
  }
  if (cfg.generator == "mesh") {
    if (cfg.mesh_path.empty())
      throw config_error("generator 'mesh' requires a mesh path");
    DiscreteManifold m = load_mesh(cfg.mesh_path);
    if (cfg.has_potential) m = with_potential(m, cfg.potential);
    return m;
  }
  throw config_error("unknown manifold generator '" + cfg.generator + "'");
}

EigenOptions eigen_options(const RunConfig& cfg) {
  EigenOptions o;
  o.solver_tol = cfg.solver_tol;
  o.cluster_tol_rel = cfg.cluster_tol;
  o.null_tol = cfg.null_tol;
  o.dense_threshold = cfg.dense_threshold;
  o.count = cfg.count;
  o.residual_tol = cfg.residual_tol;
  o.max_basis = cfg.max_basis;
  return o;
}

OptimParams optimizer_params(const RunConfig& cfg, const DiscreteManifold& m) {
  OptimParams p;
  p.eig = eigen_options(cfg);
  p.eul_tol = cfg.eul_tol > 0.0
                  ? cfg.eul_tol
                  : (m.node_count <= cfg.dense_threshold ? 1e-6 : 1e-4);
  p.c_drop_tol = cfg.c_drop_tol;
  p.max_iters = cfg.max_iters;
  p.backtrack_tol = cfg.backtrack_tol;
  p.blowup_factor = cfg.blowup_factor;
  p.cert_window_frac = cfg.cert_window_frac;
  p.schedule = cfg.schedule;
  p.limit_tol = cfg.limit_tol;
  p.limit_max_iters = cfg.limit_max_iters;
  p.polish_eps_max = cfg.polish_eps_max;
  p.resume = cfg.resume;
  return p;
}

}  // namespace specmax
