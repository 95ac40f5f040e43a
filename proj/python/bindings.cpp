#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "terraga/errors.hpp"
#include "terraga/harness.hpp"

namespace py = pybind11;
using namespace terraga;

namespace {

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["controller"] = s.controller;
  d["seed"] = s.seed;
  d["J_r"] = s.cost.j_r;
  d["J_V"] = s.cost.j_v;
  d["J_tot"] = s.cost.j_tot;
  d["J_tot_full"] = s.cost_full.j_tot;
  d["converged"] = s.converged;
  d["T_c"] = s.t_c;
  d["T_f"] = s.t_f;
  d["gate_time"] = s.gate_time;
  d["dyn_band_entry_time"] = s.dyn_band_entry_time;
  d["comp_ms_mean"] = s.comp_ms_mean;
  d["comp_ms_std"] = s.comp_ms_std;
  d["laps_completed"] = s.laps_completed;
  d["steps"] = s.steps;
  if (s.final_dyn) d["final_dyn"] = py::make_tuple(s.final_dyn->mu_s(), s.final_dyn->mu_w());
  if (s.final_ctrl) d["final_ctrl"] = s.final_ctrl->genes;
  d["rank_deficient_injections"] = s.rank_deficient_injections;
  return d;
}

template <class F>
py::array_t<double> column(const std::vector<StepLog>& steps, F get) {
  py::array_t<double> out(static_cast<py::ssize_t>(steps.size()));
  auto view = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < steps.size(); ++i) view(static_cast<py::ssize_t>(i)) = get(steps[i]);
  return out;
}

py::dict steps_table(const RunResult& r) {
  const auto& s = r.steps;
  py::dict d;
  d["t"] = column(s, [](const StepLog& l) { return l.t; });
  d["x"] = column(s, [](const StepLog& l) { return l.truth.x; });
  d["y"] = column(s, [](const StepLog& l) { return l.truth.y; });
  d["psi"] = column(s, [](const StepLog& l) { return l.truth.psi; });
  d["phi"] = column(s, [](const StepLog& l) { return l.action.phi; });
  d["omega_w"] = column(s, [](const StepLog& l) { return l.action.omega_w; });
  d["cross_track"] = column(s, [](const StepLog& l) { return l.cross_track; });
  d["v_err"] = column(s, [](const StepLog& l) { return l.v_err; });
  d["learned"] = column(s, [](const StepLog& l) { return l.mode == ControllerMode::kLearned ? 1.0 : 0.0; });
  d["comp_ms"] = column(s, [](const StepLog& l) { return l.comp_ms; });
  d["best_Q"] = column(s, [](const StepLog& l) { return l.best_q; });
  d["mu_s_hat"] = column(s, [](const StepLog& l) { return l.mu_s_hat; });
  d["mu_w_hat"] = column(s, [](const StepLog& l) { return l.mu_w_hat; });
  d["best_C"] = column(s, [](const StepLog& l) { return l.best_c; });
  return d;
}

std::vector<StepLog> logs_from(py::array_t<double> t, py::array_t<double> cross,
                               py::array_t<double> v_err) {
  const auto tv = t.unchecked<1>();
  const auto cv = cross.unchecked<1>();
  const auto vv = v_err.unchecked<1>();
  if (tv.shape(0) != cv.shape(0) || tv.shape(0) != vv.shape(0)) {
    throw py::value_error("t, cross_track and v_err must have the same length");
  }
  std::vector<StepLog> logs(static_cast<std::size_t>(tv.shape(0)));
  for (py::ssize_t i = 0; i < tv.shape(0); ++i) {
    auto& l = logs[static_cast<std::size_t>(i)];
    l.t = tv(i);
    l.cross_track = cv(i);
    l.v_err = vv(i);
  }
  return logs;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GA co-evolution tracking on a slippery incline";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
  py::register_exception<NonMonotoneTimeError>(m, "NonMonotoneTimeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<EmptyWindowError>(m, "EmptyWindowError", base.ptr());

  py::class_<VehicleParams>(m, "VehicleParams")
      .def(py::init<>())
      .def_readwrite("mass", &VehicleParams::mass)
      .def_readwrite("wheel_radius", &VehicleParams::wheel_radius)
      .def_readwrite("rear_offset", &VehicleParams::rear_offset)
      .def_readwrite("front_offset", &VehicleParams::front_offset)
      .def_readwrite("yaw_inertia", &VehicleParams::yaw_inertia)
      .def_readwrite("steering_limit", &VehicleParams::steering_limit)
      .def_readwrite("wheel_speed_limit", &VehicleParams::wheel_speed_limit);

  py::class_<TerrainParams>(m, "TerrainParams")
      .def(py::init<>())
      .def(py::init([](double mu_s, double mu_w, double slope, double gravity) {
             return TerrainParams{mu_s, mu_w, slope, gravity};
           }),
           py::arg("mu_s"), py::arg("mu_w"), py::arg("slope"), py::arg("gravity") = 9.81)
      .def_readwrite("mu_s", &TerrainParams::mu_s)
      .def_readwrite("mu_w", &TerrainParams::mu_w)
      .def_readwrite("slope", &TerrainParams::slope)
      .def_readwrite("gravity", &TerrainParams::gravity);

  py::class_<ModelSettings>(m, "ModelSettings")
      .def(py::init<>())
      .def_readwrite("sign_epsilon", &ModelSettings::sign_epsilon)
      .def_readwrite("exact_sign", &ModelSettings::exact_sign)
      .def_readwrite("max_substep", &ModelSettings::max_substep);

  py::class_<VehicleState>(m, "VehicleState")
      .def(py::init<>())
      .def(py::init([](double x, double y, double vx, double vy, double psi, double psi_dot) {
             return VehicleState{x, y, vx, vy, psi, psi_dot};
           }),
           py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("vx") = 0.0, py::arg("vy") = 0.0,
           py::arg("psi") = 0.0, py::arg("psi_dot") = 0.0)
      .def_readwrite("x", &VehicleState::x)
      .def_readwrite("y", &VehicleState::y)
      .def_readwrite("vx", &VehicleState::vx)
      .def_readwrite("vy", &VehicleState::vy)
      .def_readwrite("psi", &VehicleState::psi)
      .def_readwrite("psi_dot", &VehicleState::psi_dot)
      .def("forward_speed", &VehicleState::forward_speed)
      .def("to_list", &VehicleState::to_array)
      .def("__repr__", [](const VehicleState& s) {
        return "VehicleState(x=" + std::to_string(s.x) + ", y=" + std::to_string(s.y) +
               ", vx=" + std::to_string(s.vx) + ", vy=" + std::to_string(s.vy) +
               ", psi=" + std::to_string(s.psi) + ", psi_dot=" + std::to_string(s.psi_dot) + ")";
      });

  py::class_<Action>(m, "Action")
      .def(py::init([](double phi, double omega_w) { return Action{phi, omega_w}; }),
           py::arg("phi") = 0.0, py::arg("omega_w") = 0.0)
      .def_readwrite("phi", &Action::phi)
      .def_readwrite("omega_w", &Action::omega_w);

  m.def("normal_forces",
        [](const VehicleParams& p, const TerrainParams& t) {
          const auto n = normal_forces(p, t);
          return py::make_tuple(n.rear, n.front);
        },
        py::arg("vehicle") = VehicleParams{}, py::arg("terrain") = TerrainParams{},
        "(rear, front) normal loads in N");
  m.def("step", &step, py::arg("state"), py::arg("action"), py::arg("dt"),
        py::arg("vehicle") = VehicleParams{}, py::arg("terrain") = TerrainParams{},
        py::arg("settings") = ModelSettings{});
  m.def("kinetic_energy", &kinetic_energy, py::arg("state"),
        py::arg("vehicle") = VehicleParams{});

  py::class_<PathQuery>(m, "PathQuery")
      .def_property_readonly("nearest_point",
                             [](const PathQuery& q) {
                               return py::make_tuple(q.nearest_point.x, q.nearest_point.y);
                             })
      .def_property_readonly("tangent",
                             [](const PathQuery& q) { return py::make_tuple(q.tangent.x, q.tangent.y); })
      .def_readonly("cross_track", &PathQuery::cross_track)
      .def_readonly("signed_offset", &PathQuery::signed_offset)
      .def_readonly("arc_position", &PathQuery::arc_position);

  py::class_<Track>(m, "Track")
      .def(py::init([](const std::vector<std::pair<double, double>>& pts, double speed) {
             std::vector<Point2> w;
             for (const auto& [x, y] : pts) w.push_back({x, y});
             return Track(std::move(w), speed);
           }),
           py::arg("waypoints"), py::arg("desired_speed") = 0.2)
      .def_static("stadium", &Track::stadium, py::arg("length") = 3.0, py::arg("width") = 2.0,
                  py::arg("heading") = 0.0, py::arg("spacing") = 0.05,
                  py::arg("desired_speed") = 0.2)
      .def_static("load", &Track::load, py::arg("path"), py::arg("desired_speed") = 0.2)
      .def_property_readonly("length", &Track::length)
      .def_property_readonly("desired_speed", &Track::desired_speed)
      .def_property_readonly("waypoints",
                             [](const Track& t) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto& p : t.waypoints()) out.emplace_back(p.x, p.y);
                               return out;
                             })
      .def("nearest", [](const Track& t, double x, double y) { return t.nearest({x, y}); },
           py::arg("x"), py::arg("y"));

  py::class_<BaselineConfig>(m, "BaselineConfig")
      .def(py::init<>())
      .def_readwrite("k_p", &BaselineConfig::k_p)
      .def_readwrite("lookahead", &BaselineConfig::lookahead)
      .def_readwrite("wheelbase", &BaselineConfig::wheelbase);
  m.def("baseline_action", &baseline_action, py::arg("state"), py::arg("track"),
        py::arg("config") = BaselineConfig{}, py::arg("vehicle") = VehicleParams{});

  m.def(
      "fit_inverse_model",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> features,
         py::array_t<double, py::array::c_style | py::array::forcecast> actions,
         double ridge_lambda) {
        if (features.ndim() != 2 || features.shape(1) != 3 || actions.ndim() != 2 ||
            actions.shape(1) != 2 || features.shape(0) != actions.shape(0)) {
          throw py::value_error("expected features (N, 3) and actions (N, 2)");
        }
        const auto f = features.unchecked<2>();
        const auto a = actions.unchecked<2>();
        std::vector<PolicyFeatures> fv;
        std::vector<Action> av;
        for (py::ssize_t i = 0; i < f.shape(0); ++i) {
          fv.push_back({f(i, 0), f(i, 1), f(i, 2)});
          av.push_back({a(i, 0), a(i, 1)});
        }
        const auto r = fit_inverse_model(fv, av, ridge_lambda, GAConfig{}.ctrl_bounds);
        py::array_t<double> k({2, 3});
        auto kv = k.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < 6; ++i) kv(i / 3, i % 3) = r.member.genes[static_cast<std::size_t>(i)];
        return py::make_tuple(k, r.rank_deficient);
      },
      py::arg("features"), py::arg("actions"), py::arg("ridge_lambda") = 1e-6,
      "Least-squares 2x3 gains mapping [alpha, dV, slope] rows to [phi, omega_w] rows; "
      "returns (gains, rank_deficient).");

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("vehicle", &ExperimentConfig::vehicle)
      .def_readwrite("terrain", &ExperimentConfig::terrain)
      .def_readwrite("model", &ExperimentConfig::model)
      .def_readwrite("baseline", &ExperimentConfig::baseline)
      .def_readwrite("laps", &ExperimentConfig::laps)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("dt_control", &ExperimentConfig::dt_control)
      .def_readwrite("desired_speed", &ExperimentConfig::desired_speed)
      .def_readwrite("initial_offset", &ExperimentConfig::initial_offset)
      .def_readwrite("max_time", &ExperimentConfig::max_time)
      .def_readwrite("record_timing", &ExperimentConfig::record_timing)
      .def_readwrite("track_file", &ExperimentConfig::track_file)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_property(
          "controller", [](const ExperimentConfig& c) { return to_string(c.controller); },
          [](ExperimentConfig& c, const std::string& name) { c.controller = parse_controller(name); })
      .def_property(
          "noise_sigma_pos", [](const ExperimentConfig& c) { return c.noise.sigma_pos; },
          [](ExperimentConfig& c, double v) { c.noise.sigma_pos = v; })
      .def_property(
          "noise_sigma_rot", [](const ExperimentConfig& c) { return c.noise.sigma_rot; },
          [](ExperimentConfig& c, double v) { c.noise.sigma_rot = v; })
      .def("validate", &ExperimentConfig::validate)
      .def("make_track", &ExperimentConfig::make_track);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("base_dir") = std::filesystem::path{});

  py::class_<RunResult>(m, "RunResult")
      .def_property_readonly("summary", [](const RunResult& r) { return summary_dict(r.summary); })
      .def_property_readonly("steps", &steps_table, "column name -> numpy array")
      .def_property_readonly("generation_count", [](const RunResult& r) { return r.generations.size(); })
      .def("write_outputs", [](const RunResult& r, const std::filesystem::path& dir) {
        write_outputs(r, dir);
      }, py::arg("directory"));

  m.def("run", &run, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "tracking_cost",
      [](py::array_t<double> t, py::array_t<double> cross, py::array_t<double> v_err, double t_c,
         double t_f) {
        const auto c = tracking_cost(logs_from(t, cross, v_err), t_c, t_f);
        return py::make_tuple(c.j_r, c.j_v, c.j_tot);
      },
      py::arg("t"), py::arg("cross_track"), py::arg("v_err"), py::arg("t_c"), py::arg("t_f"),
      "(J_r, J_V, J_tot) over [t_c, t_f]");

  py::class_<ComparisonReport>(m, "ComparisonReport")
      .def_readonly("label_a", &ComparisonReport::label_a)
      .def_readonly("label_b", &ComparisonReport::label_b)
      .def_property_readonly("rows",
                             [](const ComparisonReport& r) {
                               py::list out;
                               for (const auto& row : r.rows) {
                                 out.append(py::make_tuple(row.seed, summary_dict(row.a),
                                                           summary_dict(row.b)));
                               }
                               return out;
                             })
      .def("to_text", &ComparisonReport::to_text)
      .def("to_json", &ComparisonReport::to_json);

  m.def(
      "compare",
      [](const ExperimentConfig& a, const ExperimentConfig& b, const std::vector<std::uint64_t>& seeds,
         const std::optional<std::filesystem::path>& out_dir) { return compare(a, b, seeds, out_dir); },
      py::arg("config_a"), py::arg("config_b"), py::arg("seeds"), py::arg("out_dir") = std::nullopt,
      py::call_guard<py::gil_scoped_release>());
}
