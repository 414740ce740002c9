#include "vtolmpc/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <toml.hpp>

namespace vtolmpc {
namespace {

double read_number(const toml::node_view<const toml::node>& node, double fallback, std::string_view key) {
  if (!node) return fallback;
  const auto value = node.value<double>();
  if (!value) throw ConfigError("key '" + std::string(key) + "' must be a number");
  return *value;
}

Eigen::VectorXd read_vector(const toml::node_view<const toml::node>& node, const Eigen::VectorXd& fallback,
                            std::string_view key) {
  if (!node) return fallback;
  const toml::array* arr = node.as_array();
  if (arr == nullptr || static_cast<Eigen::Index>(arr->size()) != fallback.size()) {
    throw ConfigError("key '" + std::string(key) + "' must be an array of " + std::to_string(fallback.size()) +
                      " numbers");
  }
  Eigen::VectorXd out(fallback.size());
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto value = (*arr)[i].value<double>();
    if (!value) throw ConfigError("key '" + std::string(key) + "' must contain only numbers");
    out(static_cast<Eigen::Index>(i)) = *value;
  }
  return out;
}

Eigen::Vector3d read_vec3(const toml::node_view<const toml::node>& node, const Eigen::Vector3d& fallback,
                          std::string_view key) {
  return read_vector(node, fallback, key);
}

Eigen::Vector4d read_vec4(const toml::node_view<const toml::node>& node, const Eigen::Vector4d& fallback,
                          std::string_view key) {
  return read_vector(node, fallback, key);
}

int read_int(const toml::node_view<const toml::node>& node, int fallback, std::string_view key) {
  if (!node) return fallback;
  const auto value = node.value<std::int64_t>();
  if (!value) throw ConfigError("key '" + std::string(key) + "' must be an integer");
  return static_cast<int>(*value);
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

SafetyMode parse_mode(std::string_view text) {
  if (text == "cbf" || text == "CBF") return SafetyMode::Cbf;
  if (text == "ed" || text == "ED") return SafetyMode::Ed;
  throw ConfigError("unknown safety mode '" + std::string(text) + "' (expected cbf or ed)");
}

std::string_view to_string(SafetyMode mode) { return mode == SafetyMode::Cbf ? "cbf" : "ed"; }

Scenario parse_scenario(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "scenario parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  const toml::table& doc = root;

  Scenario s = Scenario::sphere_midmap();
  s.obstacles.clear();

  const auto body = doc["body"];
  s.params.m = read_number(body["m"], s.params.m, "body.m");
  s.params.d = read_number(body["d"], s.params.d, "body.d");
  s.params.ix = read_number(body["ix"], s.params.ix, "body.ix");
  s.params.iy = read_number(body["iy"], s.params.iy, "body.iy");
  s.params.iz = read_number(body["iz"], s.params.iz, "body.iz");
  s.params.g = read_number(body["g"], s.params.g, "body.g");

  const auto init = doc["initial"];
  ExtendedState& x0 = s.initial;
  x0.rigid.p = read_vec3(init["p"], x0.rigid.p, "initial.p");
  x0.rigid.eulers = read_vec3(init["eulers"], x0.rigid.eulers, "initial.eulers");
  x0.rigid.v = read_vec3(init["v"], x0.rigid.v, "initial.v");
  x0.rigid.euler_rates = read_vec3(init["rates"], x0.rigid.euler_rates, "initial.rates");
  x0.thrust = read_number(init["thrust"], s.params.m * s.params.g, "initial.thrust");
  x0.thrust_rate = read_number(init["thrust_rate"], 0.0, "initial.thrust_rate");

  const auto goal = doc["goal"];
  s.goal.p = read_vec3(goal["p"], s.goal.p, "goal.p");
  s.goal.yaw = read_number(goal["yaw"], s.goal.yaw, "goal.yaw");

  if (const toml::array* obs = doc["obstacle"].as_array()) {
    for (const toml::node& node : *obs) {
      const toml::table* tbl = node.as_table();
      if (tbl == nullptr) throw ConfigError("[[obstacle]] entries must be tables");
      const toml::table& view = *tbl;
      Obstacle o;
      o.center = read_vec3(view["center"], o.center, "obstacle.center");
      o.radius = read_number(view["radius"], o.radius, "obstacle.radius");
      s.obstacles.push_back(o);
    }
  } else if (doc["obstacle"]) {
    throw ConfigError("obstacles must be given as [[obstacle]] array tables");
  }

  const auto mpc = doc["mpc"];
  MpcConfig& cfg = s.cfg;
  cfg.horizon = read_int(mpc["n"], cfg.horizon, "mpc.n");
  cfg.check_horizon = read_int(mpc["nc"], cfg.check_horizon, "mpc.nc");
  cfg.gamma = read_number(mpc["gamma"], cfg.gamma, "mpc.gamma");
  cfg.delta = read_number(mpc["delta"], cfg.delta, "mpc.delta");
  const Vector14d q_diag = read_vector(mpc["q_diag"], Vector14d(cfg.q.diagonal()), "mpc.q_diag");
  cfg.q = q_diag.asDiagonal();
  const Eigen::Vector4d r_diag = read_vec4(mpc["r_diag"], cfg.r.diagonal(), "mpc.r_diag");
  cfg.r = r_diag.asDiagonal();
  cfg.z_lo = read_vec4(mpc["z_lo"], cfg.z_lo, "mpc.z_lo");
  cfg.z_hi = read_vec4(mpc["z_hi"], cfg.z_hi, "mpc.z_hi");
  cfg.v_lo = read_vec4(mpc["v_lo"], cfg.v_lo, "mpc.v_lo");
  cfg.v_hi = read_vec4(mpc["v_hi"], cfg.v_hi, "mpc.v_hi");
  if (const auto mode = mpc["mode"]) {
    const auto text = mode.value<std::string>();
    if (!text) throw ConfigError("mpc.mode must be a string");
    cfg.mode = parse_mode(*text);
  }
  try {
    cfg.update_terminal();
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("terminal ingredients: ") + e.what());
  }

  const auto sim = doc["sim"];
  s.duration = read_number(sim["duration"], s.duration, "sim.duration");
  s.noise_variance = read_number(sim["noise_variance"], s.noise_variance, "sim.noise_variance");
  s.seed = static_cast<std::uint64_t>(read_int(sim["seed"], static_cast<int>(s.seed), "sim.seed"));
  s.plant_substeps = read_int(sim["plant_substeps"], s.plant_substeps, "sim.plant_substeps");

  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string csv_header() {
  return "t,x,y,z,phi,theta,psi,vx,vy,vz,thrust,u1,u2,u3,u4,v1,v2,v3,v4,h_min,dist_min,cost,solver_status,"
         "solver_iters,solve_ms";
}

void write_csv(const TrajectoryLog& log, std::ostream& out) {
  out << csv_header() << '\n';
  for (const StepRecord& r : log.steps) {
    const RigidState& x = r.truth.rigid;
    double h_min = std::numeric_limits<double>::quiet_NaN();
    for (double h : r.barrier) h_min = std::isnan(h_min) ? h : std::min(h_min, h);
    const double cols[] = {r.t,        x.p.x(),      x.p.y(),      x.p.z(),      x.eulers(0),  x.eulers(1), x.eulers(2),
                           x.v.x(),    x.v.y(),      x.v.z(),      r.truth.thrust, r.u.u1,     r.u.u2,      r.u.u3,
                           r.u.u4,     r.v.v1,       r.v.v2,       r.v.v3,       r.v.v4,       h_min,       r.dist_min,
                           r.cost};
    for (double c : cols) out << fmt9(c) << ',';
    out << to_string(r.status) << ',' << r.iterations << ',' << fmt9(r.solve_ms) << '\n';
  }
}

void write_csv(const TrajectoryLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(log, out);
}

}  // namespace vtolmpc
