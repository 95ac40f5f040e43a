#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "terraga/errors.hpp"
#include "terraga/harness.hpp"

namespace terraga {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"vehicle",
       {"mass", "wheel_radius", "rear_offset", "front_offset", "yaw_inertia",
        "steering_limit_deg", "wheel_speed_limit"}},
      {"terrain", {"mu_s", "mu_w", "slope_deg", "gravity"}},
      {"model", {"sign_epsilon", "exact_sign", "max_substep"}},
      {"track",
       {"file", "desired_speed", "stadium_length", "stadium_width", "stadium_heading_deg",
        "spacing"}},
      {"baseline", {"k_p", "lookahead", "wheelbase"}},
      {"ga",
       {"prediction_lookback", "tracking_horizon", "crossover_rate", "dyn_population",
        "ctrl_population", "breeders", "injected", "w_s", "w_r", "w_k", "dyn_lower", "dyn_upper",
        "ctrl_lower", "ctrl_upper", "mutation_fraction", "injection_horizon", "ridge_lambda",
        "q_threshold", "c_threshold", "gate_window"}},
      {"noise", {"sigma_pos", "sigma_rot", "sigma_slope"}},
      {"estimator", {"velocity_beta", "pose_beta"}},
      {"experiment",
       {"controller", "laps", "seed", "dt_control", "initial_offset", "convergence_window",
        "convergence_eps", "max_time", "record_timing", "dyn_band", "output_dir"}},
  };
  return keys;
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <class T>
  void read(const char* key, T& out) const {
    if (!tree_) return;
    const auto v = tree_->get_optional<std::string>(key);
    if (!v) return;
    std::istringstream ss(*v);
    T parsed{};
    if constexpr (std::is_same_v<T, bool>) {
      std::string word;
      ss >> word;
      if (word == "true" || word == "1" || word == "yes") {
        parsed = true;
      } else if (word == "false" || word == "0" || word == "no") {
        parsed = false;
      } else {
        fail(key, *v);
      }
    } else {
      if (!(ss >> parsed)) fail(key, *v);
      std::string rest;
      if (ss >> rest) fail(key, *v);
    }
    out = parsed;
  }

  void read_deg(const char* key, double& out_rad) const {
    if (!has(key)) return;
    double deg = 0.0;
    read(key, deg);
    out_rad = deg2rad(deg);
  }

  template <std::size_t N>
  void read_array(const char* key, std::array<double, N>& out) const {
    if (!tree_) return;
    const auto v = tree_->get_optional<std::string>(key);
    if (!v) return;
    std::istringstream ss(*v);
    std::array<double, N> parsed{};
    for (auto& x : parsed) {
      if (!(ss >> x)) fail(key, *v);
    }
    std::string rest;
    if (ss >> rest) fail(key, *v);
    out = parsed;
  }

  bool has(const char* key) const { return tree_ && tree_->get_optional<std::string>(key); }

  std::string string(const char* key, const std::string& fallback) const {
    if (!tree_) return fallback;
    return tree_->get<std::string>(key, fallback);
  }

 private:
  [[noreturn]] void fail(const char* key, const std::string& value) const {
    throw ConfigError("config: cannot parse [" + name_ + "] " + key + " = '" + value + "'");
  }

  const pt::ptree* tree_;
  std::string name_;
};

}  // namespace

std::string to_string(ControllerKind kind) {
  return kind == ControllerKind::kBaseline ? "baseline" : "ga";
}

ControllerKind parse_controller(const std::string& name) {
  if (name == "baseline") return ControllerKind::kBaseline;
  if (name == "ga") return ControllerKind::kGa;
  throw ConfigError("unknown controller '" + name + "' (expected baseline or ga)");
}

void ExperimentConfig::validate() const {
  vehicle.validate();
  terrain.validate();
  model.validate();
  baseline.validate();
  ga.validate();
  noise.validate();
  estimator.validate();
  if (laps < 1) throw ConfigError("experiment.laps must be >= 1");
  if (!(dt_control > 0.0)) throw ConfigError("experiment.dt_control must be positive");
  if (!(desired_speed >= 0.0)) throw ConfigError("track.desired_speed must be >= 0");
  if (!(initial_offset >= 0.0)) throw ConfigError("experiment.initial_offset must be >= 0");
  if (!(convergence_window >= 0.0) || !(convergence_eps > 0.0)) {
    throw ConfigError("experiment convergence window/eps must be >= 0 / > 0");
  }
  if (!(max_time >= 0.0)) throw ConfigError("experiment.max_time must be >= 0");
  if (track_file && !std::filesystem::exists(*track_file)) {
    throw ConfigError("track file not readable: " + track_file->string());
  }
}

Track ExperimentConfig::make_track() const {
  if (track_file) return Track::load(*track_file, desired_speed);
  return Track::stadium(stadium.length, stadium.width, stadium.heading, stadium.spacing,
                        desired_speed);
}

double ExperimentConfig::nominal_lap_time(const Track& track) const {
  return desired_speed > 0.0 ? track.length() / desired_speed : 0.0;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const auto& keys = known_keys();
  for (const auto& [name, section] : tree) {
    const auto it = keys.find(name);
    if (it == keys.end()) throw ConfigError("config: unknown section [" + name + "]");
    if (section.empty() && !section.data().empty()) {
      throw ConfigError("config: key '" + name + "' outside of any section");
    }
    for (const auto& [key, value] : section) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key [" + name + "] " + key);
    }
  }
  const auto section = [&](const char* name) {
    return Section(tree.get_child_optional(name).get_ptr(), name);
  };

  ExperimentConfig cfg;
  {
    const auto s = section("vehicle");
    s.read("mass", cfg.vehicle.mass);
    s.read("wheel_radius", cfg.vehicle.wheel_radius);
    s.read("rear_offset", cfg.vehicle.rear_offset);
    s.read("front_offset", cfg.vehicle.front_offset);
    s.read("yaw_inertia", cfg.vehicle.yaw_inertia);
    s.read_deg("steering_limit_deg", cfg.vehicle.steering_limit);
    s.read("wheel_speed_limit", cfg.vehicle.wheel_speed_limit);
  }
  {
    const auto s = section("terrain");
    s.read("mu_s", cfg.terrain.mu_s);
    s.read("mu_w", cfg.terrain.mu_w);
    s.read_deg("slope_deg", cfg.terrain.slope);
    s.read("gravity", cfg.terrain.gravity);
  }
  {
    const auto s = section("model");
    s.read("sign_epsilon", cfg.model.sign_epsilon);
    s.read("exact_sign", cfg.model.exact_sign);
    s.read("max_substep", cfg.model.max_substep);
  }
  {
    const auto s = section("track");
    if (s.has("file")) {
      std::filesystem::path p = s.string("file", "");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.track_file = p;
    }
    s.read("desired_speed", cfg.desired_speed);
    s.read("stadium_length", cfg.stadium.length);
    s.read("stadium_width", cfg.stadium.width);
    s.read_deg("stadium_heading_deg", cfg.stadium.heading);
    s.read("spacing", cfg.stadium.spacing);
  }
  {
    const auto s = section("baseline");
    cfg.baseline.wheelbase = cfg.vehicle.wheelbase();
    s.read("k_p", cfg.baseline.k_p);
    s.read("lookahead", cfg.baseline.lookahead);
    s.read("wheelbase", cfg.baseline.wheelbase);
  }
  {
    const auto s = section("ga");
    auto& g = cfg.ga;
    s.read("prediction_lookback", g.prediction_lookback);
    s.read("tracking_horizon", g.tracking_horizon);
    s.read("crossover_rate", g.crossover_rate);
    s.read("dyn_population", g.dyn_population);
    s.read("ctrl_population", g.ctrl_population);
    s.read("breeders", g.breeders);
    s.read("injected", g.injected);
    s.read_array("w_s", g.w_s);
    s.read_array("w_r", g.w_r);
    s.read_array("w_k", g.w_k);
    s.read_array("dyn_lower", g.dyn_bounds.lower);
    s.read_array("dyn_upper", g.dyn_bounds.upper);
    s.read_array("ctrl_lower", g.ctrl_bounds.lower);
    s.read_array("ctrl_upper", g.ctrl_bounds.upper);
    s.read("mutation_fraction", g.mutation_fraction);
    s.read("injection_horizon", g.injection_horizon);
    s.read("ridge_lambda", g.ridge_lambda);
    s.read("q_threshold", g.q_threshold);
    s.read("c_threshold", g.c_threshold);
    s.read("gate_window", g.gate_window);
  }
  {
    const auto s = section("noise");
    s.read("sigma_pos", cfg.noise.sigma_pos);
    s.read("sigma_rot", cfg.noise.sigma_rot);
    s.read("sigma_slope", cfg.noise.sigma_slope);
  }
  {
    const auto s = section("estimator");
    s.read("velocity_beta", cfg.estimator.velocity_beta);
    s.read("pose_beta", cfg.estimator.pose_beta);
  }
  {
    const auto s = section("experiment");
    cfg.controller = parse_controller(s.string("controller", to_string(cfg.controller)));
    s.read("laps", cfg.laps);
    s.read("seed", cfg.seed);
    s.read("dt_control", cfg.dt_control);
    s.read("initial_offset", cfg.initial_offset);
    s.read("convergence_window", cfg.convergence_window);
    s.read("convergence_eps", cfg.convergence_eps);
    s.read("max_time", cfg.max_time);
    s.read("record_timing", cfg.record_timing);
    s.read("dyn_band", cfg.dyn_band);
    cfg.output_dir = s.string("output_dir", cfg.output_dir.string());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace terraga
