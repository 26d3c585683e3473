#include "skypark/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "skypark/io.hpp"
#include "skypark/rng.hpp"

namespace skypark {

using Json = nlohmann::ordered_json;

const char* to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kPlanner: return "planner";
    case Strategy::kHover: return "hover";
    case Strategy::kStraightToPark: return "straight_to_park";
    case Strategy::kIgnore: return "ignore";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "planner") return Strategy::kPlanner;
  if (name == "hover") return Strategy::kHover;
  if (name == "straight_to_park") return Strategy::kStraightToPark;
  if (name == "ignore") return Strategy::kIgnore;
  throw SpecError("unknown strategy '" + name + "' (planner, hover, straight_to_park, ignore)");
}

const char* to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::kActive: return "active";
    case TerminalStatus::kFallenInjected: return "fallen_injected";
    case TerminalStatus::kFallenCascade: return "fallen_cascade";
    case TerminalStatus::kParkedHidden: return "parked_hidden";
    case TerminalStatus::kRecoveredActive: return "recovered_active";
  }
  return "unknown";
}

namespace {

Vec3 vec3_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw SpecError(where + ": expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json vec3_to(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

FailureKind kind_from(const std::string& name) {
  if (name == "drop") return FailureKind::kDrop;
  if (name == "land") return FailureKind::kLand;
  if (name == "return_to_launch") return FailureKind::kReturnToLaunch;
  throw SpecError("unknown failure kind '" + name + "'");
}

void mode_from(const Json& j, FailureMode& mode, const std::string& where) {
  if (j.contains("sigma")) mode.sigma = j["sigma"].get<double>();
  if (j.contains("drag")) mode.drag = j["drag"].get<double>();
  if (j.contains("descent_speed")) mode.descent_speed = j["descent_speed"].get<double>();
  if (j.contains("lateral_damping")) mode.lateral_damping = j["lateral_damping"].get<double>();
  if (j.contains("launch_point")) mode.launch_point = vec3_from(j["launch_point"], where);
}

Json mode_to(const FailureMode& mode) {
  Json j;
  j["sigma"] = mode.sigma;
  j["drag"] = mode.drag;
  j["descent_speed"] = mode.descent_speed;
  j["lateral_damping"] = mode.lateral_damping;
  j["launch_point"] = vec3_to(mode.launch_point);
  return j;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (schema_version != kSchemaVersion)
    throw SpecError("unsupported schema_version " + std::to_string(schema_version));
  stage.validate();
  kinematics.validate();
  predictor.validate();
  planner.validate();
  parking.validate(stage);
  if (explicit_drones.empty()) {
    if (n_drones < 1) throw SpecError("fleet: n_drones must be >= 1");
    show.validate();
  } else {
    std::vector<DroneId> ids;
    for (const auto& d : explicit_drones) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw SpecError("fleet: duplicate explicit drone id");
    for (const auto& d : explicit_drones)
      if (!stage.contains(d.position)) throw SpecError("fleet: explicit drone off-stage");
  }
  for (const Vec3& p : spare_positions)
    if (!stage.contains(p)) throw SpecError("fleet: spare position off-stage");
  if (failure.t0 < stage.t_first || failure.t0 >= stage.t_last)
    throw SpecError("failure: t0 must lie in [t_first, t_last)");
  const int fleet = explicit_drones.empty() ? n_drones : static_cast<int>(explicit_drones.size());
  if (failure.ids.empty()) {
    if (failure.count < 0 || failure.count > fleet)
      throw SpecError("failure: count must be in [0, n_drones]");
  } else {
    for (const DroneId id : failure.ids)
      if (id < 0 || id >= fleet) throw SpecError("failure: injected id does not exist");
  }
  if (evaluation.holdout_samples < 0) throw SpecError("evaluation: holdout_samples must be >= 0");
  for (const auto& [id, alpha] : alpha_overrides)
    if (alpha <= 0.0) throw SpecError("alpha overrides must be positive");
}

ScenarioSpec ScenarioSpec::from_json_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw SpecError(std::string("scenario is not valid JSON: ") + e.what());
  }
  ScenarioSpec spec;
  try {
    spec.schema_version = j.value("schema_version", kSchemaVersion);
    spec.master_seed = j.value("seed", std::uint64_t{1});
    if (j.contains("ground_truth_seed") && !j["ground_truth_seed"].is_null())
      spec.ground_truth_seed = j["ground_truth_seed"].get<std::uint64_t>();

    if (j.contains("stage")) {
      const Json& s = j["stage"];
      if (s.contains("origin")) spec.stage.origin = vec3_from(s["origin"], "stage.origin");
      if (s.contains("extent")) {
        if (!s["extent"].is_array() || s["extent"].size() != 3)
          throw SpecError("stage.extent: expected three cell counts");
        for (int k = 0; k < 3; ++k) spec.stage.extent[k] = s["extent"][k].get<int>();
      }
      spec.stage.cell_size = s.value("cell_size", spec.stage.cell_size);
      spec.stage.t_first = s.value("t_first", spec.stage.t_first);
      spec.stage.t_last = s.value("t_last", spec.stage.t_last);
      spec.stage.dt = s.value("dt", spec.stage.dt);
    }
    if (j.contains("kinematics")) {
      const Json& k = j["kinematics"];
      spec.kinematics.v_max = k.value("v_max", spec.kinematics.v_max);
      spec.kinematics.a_max = k.value("a_max", spec.kinematics.a_max);
      spec.kinematics.radius = k.value("drone_radius", spec.kinematics.radius);
    }
    if (j.contains("fleet")) {
      const Json& f = j["fleet"];
      spec.n_drones = f.value("n_drones", spec.n_drones);
      if (f.contains("show")) {
        const Json& s = f["show"];
        spec.show.lattice_spacing = s.value("lattice_spacing", spec.show.lattice_spacing);
        spec.show.z_min_cell = s.value("z_min_cell", spec.show.z_min_cell);
        spec.show.z_max_cell = s.value("z_max_cell", spec.show.z_max_cell);
        spec.show.segment_min = s.value("segment_min", spec.show.segment_min);
        spec.show.segment_max = s.value("segment_max", spec.show.segment_max);
        spec.show.p_translate = s.value("p_translate", spec.show.p_translate);
        spec.show.p_vertical = s.value("p_vertical", spec.show.p_vertical);
      }
      if (f.contains("explicit")) {
        for (const Json& d : f["explicit"]) {
          ExplicitDrone ed;
          ed.id = d.at("id").get<int>();
          ed.position = vec3_from(d.at("position"), "fleet.explicit.position");
          if (d.contains("actions"))
            for (const Json& a : d["actions"]) ed.actions.push_back(vec3_from(a, "fleet.explicit.actions"));
          spec.explicit_drones.push_back(std::move(ed));
        }
      }
      if (f.contains("spares"))
        for (const Json& p : f["spares"]) spec.spare_positions.push_back(vec3_from(p, "fleet.spares"));
    }
    if (j.contains("failure")) {
      const Json& f = j["failure"];
      spec.failure.t0 = f.value("t0", spec.failure.t0);
      spec.failure.count = f.value("count", spec.failure.count);
      if (f.contains("ids"))
        for (const Json& id : f["ids"]) spec.failure.ids.push_back(id.get<int>());
      if (f.contains("kind") && !f["kind"].is_null())
        spec.failure.forced_kind = kind_from(f["kind"].get<std::string>());
    }
    if (j.contains("modes")) {
      const Json& m = j["modes"];
      if (m.contains("drop")) mode_from(m["drop"], spec.predictor.drop_params, "modes.drop");
      if (m.contains("land")) mode_from(m["land"], spec.predictor.land_params, "modes.land");
      if (m.contains("return_to_launch"))
        mode_from(m["return_to_launch"], spec.predictor.rtl_params, "modes.return_to_launch");
    }
    if (j.contains("prior")) {
      const Json& p = j["prior"];
      spec.predictor.prior.drop = p.value("drop", spec.predictor.prior.drop);
      spec.predictor.prior.land = p.value("land", spec.predictor.prior.land);
      spec.predictor.prior.return_to_launch =
          p.value("return_to_launch", spec.predictor.prior.return_to_launch);
    }
    if (j.contains("predictor")) {
      const Json& p = j["predictor"];
      spec.predictor.history_len = p.value("history_len", spec.predictor.history_len);
      spec.predictor.rollouts = p.value("rollouts", spec.predictor.rollouts);
      spec.predictor.least_squares_velocity =
          p.value("least_squares_velocity", spec.predictor.least_squares_velocity);
    }
    if (j.contains("planner")) {
      const Json& p = j["planner"];
      spec.planner.vertex_budget = p.value("vertex_budget", spec.planner.vertex_budget);
      spec.planner.goal_bias = p.value("goal_bias", spec.planner.goal_bias);
      spec.planner.k_nearest = p.value("k_nearest", spec.planner.k_nearest);
      spec.planner.park_vertex_target =
          p.value("park_vertex_target", spec.planner.park_vertex_target);
      spec.planner.iteration_factor = p.value("iteration_factor", spec.planner.iteration_factor);
      spec.planner.alpha_default = p.value("alpha_default", spec.planner.alpha_default);
    }
    if (j.contains("parking")) {
      spec.parking.z_min_cell = j["parking"].value("z_min_cell", spec.parking.z_min_cell);
      spec.parking.z_max_cell = j["parking"].value("z_max_cell", spec.parking.z_max_cell);
    }
    if (j.contains("alpha_overrides"))
      for (const auto& [key, value] : j["alpha_overrides"].items())
        spec.alpha_overrides[std::stoi(key)] = value.get<double>();
    if (j.contains("evaluation"))
      spec.evaluation.holdout_samples =
          j["evaluation"].value("holdout_samples", spec.evaluation.holdout_samples);
  } catch (const Json::exception& e) {
    throw SpecError(std::string("scenario field error: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string ScenarioSpec::to_json_text() const {
  Json j;
  j["schema_version"] = schema_version;
  j["seed"] = master_seed;
  if (ground_truth_seed) j["ground_truth_seed"] = *ground_truth_seed;
  j["stage"] = {{"origin", vec3_to(stage.origin)},
                {"extent", Json::array({stage.extent[0], stage.extent[1], stage.extent[2]})},
                {"cell_size", stage.cell_size},
                {"t_first", stage.t_first},
                {"t_last", stage.t_last},
                {"dt", stage.dt}};
  j["kinematics"] = {{"v_max", kinematics.v_max},
                     {"a_max", kinematics.a_max},
                     {"drone_radius", kinematics.radius}};
  Json fleet;
  fleet["n_drones"] = n_drones;
  fleet["show"] = {{"lattice_spacing", show.lattice_spacing},
                   {"z_min_cell", show.z_min_cell},
                   {"z_max_cell", show.z_max_cell},
                   {"segment_min", show.segment_min},
                   {"segment_max", show.segment_max},
                   {"p_translate", show.p_translate},
                   {"p_vertical", show.p_vertical}};
  if (!explicit_drones.empty()) {
    Json arr = Json::array();
    for (const auto& d : explicit_drones) {
      Json e;
      e["id"] = d.id;
      e["position"] = vec3_to(d.position);
      Json acts = Json::array();
      for (const Vec3& a : d.actions) acts.push_back(vec3_to(a));
      e["actions"] = std::move(acts);
      arr.push_back(std::move(e));
    }
    fleet["explicit"] = std::move(arr);
  }
  Json spares = Json::array();
  for (const Vec3& p : spare_positions) spares.push_back(vec3_to(p));
  fleet["spares"] = std::move(spares);
  j["fleet"] = std::move(fleet);
  Json fail;
  fail["t0"] = failure.t0;
  fail["ids"] = failure.ids;
  fail["count"] = failure.count;
  if (failure.forced_kind) fail["kind"] = to_string(*failure.forced_kind);
  j["failure"] = std::move(fail);
  j["modes"] = {{"drop", mode_to(predictor.drop_params)},
                {"land", mode_to(predictor.land_params)},
                {"return_to_launch", mode_to(predictor.rtl_params)}};
  j["prior"] = {{"drop", predictor.prior.drop},
                {"land", predictor.prior.land},
                {"return_to_launch", predictor.prior.return_to_launch}};
  j["predictor"] = {{"history_len", predictor.history_len},
                    {"rollouts", predictor.rollouts},
                    {"least_squares_velocity", predictor.least_squares_velocity}};
  j["planner"] = {{"vertex_budget", planner.vertex_budget},
                  {"goal_bias", planner.goal_bias},
                  {"k_nearest", planner.k_nearest},
                  {"park_vertex_target", planner.park_vertex_target},
                  {"iteration_factor", planner.iteration_factor},
                  {"alpha_default", planner.alpha_default}};
  j["parking"] = {{"z_min_cell", parking.z_min_cell}, {"z_max_cell", parking.z_max_cell}};
  if (!alpha_overrides.empty()) {
    Json a;
    for (const auto& [id, alpha] : alpha_overrides) a[std::to_string(id)] = alpha;
    j["alpha_overrides"] = std::move(a);
  }
  j["evaluation"] = {{"holdout_samples", evaluation.holdout_samples}};
  return j.dump(2) + "\n";
}

ScenarioSpec make_default_scenario(int n_drones, int failure_count, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.master_seed = seed;
  spec.stage.origin = Vec3::Zero();
  spec.stage.extent = {30, 30, 12};
  spec.stage.cell_size = 1.0;
  spec.stage.t_first = 0;
  spec.stage.t_last = 240;
  spec.stage.dt = 0.5;
  spec.n_drones = n_drones;
  spec.failure.t0 = 60;
  spec.failure.count = failure_count;

  const Vec3 pad(15.0, 15.0, 0.0);
  spec.predictor.drop_params = {FailureKind::kDrop, 0.25, 0.1, 1.0, 0.8, pad};
  spec.predictor.land_params = {FailureKind::kLand, 0.1, 0.1, 1.0, 0.8, pad};
  spec.predictor.rtl_params = {FailureKind::kReturnToLaunch, 0.1, 0.1, 1.0, 0.8, pad};

  // A few dark spares hovering at the parking band corners.
  const double corners[6][2] = {{4.5, 4.5},  {25.5, 4.5}, {4.5, 25.5},
                                {25.5, 25.5}, {15.5, 4.5}, {15.5, 25.5}};
  for (const auto& c : corners) spec.spare_positions.emplace_back(c[0], c[1], 2.5);
  return spec;
}

std::string IncidentReport::to_json_text() const {
  Json j;
  j["schema_version"] = schema_version;
  j["strategy"] = to_string(strategy);
  j["seed"] = master_seed;
  j["t0"] = t0;
  j["t_end"] = t_end;
  j["t_resume"] = t_resume;
  j["injected"] = injected;
  j["evacuees"] = evacuees;
  Json outs = Json::array();
  for (const DroneOutcome& o : outcomes) {
    Json d;
    d["id"] = o.id;
    d["terminal"] = to_string(o.terminal);
    d["evacuated"] = o.evacuated;
    d["hit"] = o.hit;
    if (o.hit) d["hit_time"] = o.hit_time;
    if (o.psafe >= 0.0) {
      d["psafe"] = o.psafe;
      d["cstar"] = o.cstar;
    }
    if (o.filled_slot >= 0) d["filled_slot"] = o.filled_slot;
    outs.push_back(std::move(d));
  }
  j["outcomes"] = std::move(outs);
  Json caps = Json::array();
  for (const auto& [id, msg] : capacity_errors) {
    Json c;
    c["id"] = id;
    c["error"] = msg;
    caps.push_back(std::move(c));
  }
  j["capacity_errors"] = std::move(caps);
  j["recovery"] = {{"vacancies", vacancies}, {"vacancies_filled", vacancies_filled}};
  j["metrics"] = {{"expected_hits", metrics.expected_hits},
                  {"realized_hits", metrics.realized_hits},
                  {"cascade_hits", metrics.cascade_hits},
                  {"score", metrics.score},
                  {"recovery_fill_ratio", metrics.recovery_fill_ratio},
                  {"collisions", metrics.collisions}};
  if (timings_enabled) j["timings"] = {{"wall_seconds", wall_seconds}};
  return j.dump(2) + "\n";
}

}  // namespace skypark
