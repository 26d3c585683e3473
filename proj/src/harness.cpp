#include "skypark/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "skypark/io.hpp"
#include "skypark/parallel.hpp"
#include "skypark/recovery.hpp"
#include "skypark/rng.hpp"

namespace skypark {

namespace {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Fleet and realized scripts
// ---------------------------------------------------------------------------

struct Fleet {
  std::vector<DroneState> initial;        // at t_first
  std::vector<Plan> assigned;             // empty for spares
  std::vector<bool> is_spare;
  std::map<DroneId, Trajectory> nominal;  // show drones only, [t_first, t_last)
  int show_count = 0;

  int total() const { return static_cast<int>(initial.size()); }
};

Fleet build_fleet(const ScenarioSpec& spec) {
  Fleet fleet;
  const StageConfig& cfg = spec.stage;
  if (spec.explicit_drones.empty()) {
    const auto show = generate_show(spec.n_drones, cfg, spec.kinematics, spec.show,
                                    derive_seed(spec.master_seed, seed_tag("show")));
    for (const ShowDrone& d : show) {
      fleet.initial.push_back(d.initial);
      fleet.assigned.push_back(d.plan);
      fleet.is_spare.push_back(false);
    }
  } else {
    for (const ExplicitDrone& d : spec.explicit_drones) {
      Plan plan;
      for (const Vec3& dv : d.actions) plan.actions.push_back({dv});
      fleet.initial.push_back(DroneState{d.id, d.position, Vec3::Zero(), DroneStatus::kActive});
      fleet.assigned.push_back(std::move(plan));
      fleet.is_spare.push_back(false);
    }
  }
  fleet.show_count = fleet.total();
  DroneId next_id = 0;
  for (const DroneState& s : fleet.initial) next_id = std::max(next_id, s.id + 1);
  for (const Vec3& p : spec.spare_positions) {
    fleet.initial.push_back(DroneState{next_id++, p, Vec3::Zero(), DroneStatus::kHidden});
    fleet.assigned.emplace_back();
    fleet.is_spare.push_back(true);
  }
  for (int i = 0; i < fleet.show_count; ++i)
    fleet.nominal.emplace(fleet.initial[i].id, execute_plan(fleet.initial[i], fleet.assigned[i],
                                                            cfg.t_first, cfg.dt, spec.kinematics));
  // The generator is collision-free by construction; explicit fleets are checked.
  if (!spec.explicit_drones.empty()) {
    std::vector<std::pair<DroneId, ZoneSet>> fps;
    for (const auto& [id, traj] : fleet.nominal)
      fps.emplace_back(id, footprint_of_path(traj.poses, spec.kinematics.radius, cfg));
    for (std::size_t a = 0; a < fps.size(); ++a)
      for (std::size_t b = a + 1; b < fps.size(); ++b)
        if (plans_collide(fps[a].second, fps[b].second))
          throw SpecError("fleet: explicit assigned plans collide (drones " +
                          std::to_string(fps[a].first) + " and " + std::to_string(fps[b].first) +
                          ")");
  }
  return fleet;
}

/// Realized position of every drone at every step of [t_first, t_last).
/// Step slices (tiles covered during [t, t+1)) are memoized because the
/// held-out risk estimate replays them hundreds of times.
class ScriptSet {
 public:
  ScriptSet(const Fleet& fleet, const StageConfig& cfg, double radius)
      : cfg_(cfg), radius_(radius), horizon_(cfg.t_last - 1) {
    const int steps = cfg.show_steps();
    for (int i = 0; i < fleet.total(); ++i) {
      const DroneId id = fleet.initial[i].id;
      std::vector<Vec3>& pos = positions_[id];
      pos.assign(steps, fleet.initial[i].position);
      if (!fleet.is_spare[i]) {
        const Trajectory& traj = fleet.nominal.at(id);
        for (std::size_t k = 0; k < traj.poses.size() && k < pos.size(); ++k)
          pos[k] = traj.poses[k].position;
        for (std::size_t k = traj.poses.size(); k < pos.size(); ++k)
          pos[k] = traj.poses.back().position;
      }
      cache_[id].assign(steps, std::nullopt);
    }
  }

  TimeStep horizon() const { return horizon_; }

  Vec3 position(DroneId id, TimeStep t) const {
    const auto& pos = positions_.at(id);
    const int k = std::clamp<int>(t - cfg_.t_first, 0, static_cast<int>(pos.size()) - 1);
    return pos[k];
  }

  Vec3 velocity(DroneId id, TimeStep t) const {
    if (t <= cfg_.t_first) return Vec3::Zero();
    return (position(id, t) - position(id, t - 1)) / cfg_.dt;
  }

  std::vector<TimedPose> path(DroneId id, TimeStep from, TimeStep to) const {
    std::vector<TimedPose> out;
    out.reserve(to - from + 1);
    for (TimeStep t = from; t <= to; ++t) out.push_back({t, position(id, t)});
    return out;
  }

  /// Installs trajectory positions from traj.start_time() on; the final pose
  /// holds afterwards (a parked drone keeps hovering).
  void overwrite(DroneId id, const Trajectory& traj) {
    auto& pos = positions_.at(id);
    for (const TimedPose& tp : traj.poses) {
      const int k = tp.t - cfg_.t_first;
      if (k >= 0 && k < static_cast<int>(pos.size())) pos[k] = tp.position;
    }
    for (int k = traj.end_time() + 1 - cfg_.t_first; k < static_cast<int>(pos.size()); ++k) {
      if (k < 0) continue;
      pos[k] = traj.poses.back().position;
    }
    auto& cache = cache_.at(id);
    std::fill(cache.begin(), cache.end(), std::nullopt);
  }

  /// Tiles this drone covers during [t, t+1) (pose only at the horizon).
  /// Off-stage portions clip. Safe for concurrent reads once prefilled.
  const ZoneSet& slice(DroneId id, TimeStep t) {
    auto& cache = cache_.at(id);
    const int k = std::clamp<int>(t - cfg_.t_first, 0, static_cast<int>(cache.size()) - 1);
    if (!cache[k]) {
      const Vec3 a = position(id, t);
      if (t >= horizon_) {
        ZoneSet z;
        for (const GridCell& c : cells_of_ball(a, radius_, cfg_)) z.insert({c, t});
        cache[k] = std::move(z);
      } else {
        cache[k] =
            footprint_of_segment(a, position(id, t + 1), radius_, t, cfg_, OffStagePolicy::kClip);
      }
    }
    return *cache[k];
  }

  void prefill(const std::vector<DroneId>& ids, TimeStep from, TimeStep to) {
    for (const DroneId id : ids)
      for (TimeStep t = from; t <= to; ++t) slice(id, t);
  }

 private:
  StageConfig cfg_;
  double radius_;
  TimeStep horizon_;
  std::map<DroneId, std::vector<Vec3>> positions_;
  std::map<DroneId, std::vector<std::optional<ZoneSet>>> cache_;
};

// ---------------------------------------------------------------------------
// Ground-truth execution with cascading failures
// ---------------------------------------------------------------------------

struct Fall {
  DroneId id = 0;
  Trajectory traj;
};

struct HitEvent {
  DroneId id = 0;
  TimeStep t = 0;
  DroneId by = 0;
};

struct SimState {
  std::vector<Fall> falls;
  std::set<DroneId> dead;  // falling or grounded drones
  std::vector<HitEvent> hits;
  int collisions = 0;
};

// Tiles a fall covers during [t, t+1); the terminal pose occupies its own step.
ZoneSet fall_slice(const Fall& fall, TimeStep t, double radius, const StageConfig& cfg) {
  const Trajectory& traj = fall.traj;
  if (traj.empty() || t < traj.start_time() || t > traj.end_time()) return {};
  const int k = t - traj.start_time();
  if (t == traj.end_time()) {
    ZoneSet out;
    for (const GridCell& c : cells_of_ball(traj.poses[k].position, radius, cfg))
      out.insert({c, t});
    return out;
  }
  return footprint_of_segment(traj.poses[k].position, traj.poses[k + 1].position, radius, t, cfg,
                              OffStagePolicy::kClip);
}

// Advances the simulation over [t_begin, t_stop). A drone struck during
// [t, t+1) finishes that interval on its plan and drops from t+1; its fall
// can strike others from the next interval on.
void simulate_span(ScriptSet& scripts, SimState& sim, const std::vector<DroneId>& everyone,
                   TimeStep t_begin, TimeStep t_stop, double radius, const StageConfig& cfg,
                   const KinematicConfig& kin, const FailureMode& drop_params,
                   std::uint64_t cascade_seed, bool count_collisions) {
  for (TimeStep t = t_begin; t < t_stop; ++t) {
    // Which tiles do falling drones cover right now, and who falls there.
    std::unordered_map<Tile, DroneId, TileHash> hazard;
    for (const Fall& fall : sim.falls)
      for (const Tile& tile : fall_slice(fall, t, radius, cfg)) {
        auto [it, inserted] = hazard.try_emplace(tile, fall.id);
        if (!inserted) it->second = std::min(it->second, fall.id);
      }

    std::vector<Fall> new_falls;
    std::unordered_map<Tile, DroneId, TileHash> alive_tiles;
    for (const DroneId id : everyone) {
      if (sim.dead.count(id)) continue;
      const ZoneSet& tiles = scripts.slice(id, t);
      DroneId struck_by = -1;
      for (const Tile& tile : tiles) {
        const auto hit = hazard.find(tile);
        if (hit != hazard.end() && (struck_by < 0 || hit->second < struck_by))
          struck_by = hit->second;
        if (count_collisions) {
          auto [it, inserted] = alive_tiles.try_emplace(tile, id);
          if (!inserted && it->second != id) ++sim.collisions;
        }
      }
      if (struck_by >= 0) {
        sim.hits.push_back({id, t, struck_by});
        DroneState state{id, scripts.position(id, t + 1), scripts.velocity(id, t + 1),
                         DroneStatus::kFallen};
        new_falls.push_back(
            {id, simulate_failure(state, drop_params,
                                  derive_seed(cascade_seed, static_cast<std::uint64_t>(id),
                                              static_cast<std::uint64_t>(t)),
                                  cfg, kin, t + 1)});
      }
    }
    for (Fall& f : new_falls) {
      sim.dead.insert(f.id);
      sim.falls.push_back(std::move(f));
    }
  }
}

// ---------------------------------------------------------------------------
// Evacuation policies
// ---------------------------------------------------------------------------

// Maximal braking: sheds up to a_max*dt of speed per step until at rest.
std::vector<Vec3> braking_positions(Vec3 p, Vec3 v, double dt, const KinematicConfig& kin) {
  std::vector<Vec3> out;
  while (v.norm() > 1e-12) {
    const double speed = v.norm();
    if (speed <= kin.a_max * dt * (1.0 + 1e-9)) {
      v = Vec3::Zero();
    } else {
      v *= (speed - kin.a_max * dt) / speed;
    }
    p += v * dt;
    out.push_back(p);
  }
  return out;
}

Plan hover_policy_plan(const DroneState& state, int window, double dt,
                       const KinematicConfig& kin) {
  std::vector<Vec3> positions = braking_positions(state.position, state.velocity, dt, kin);
  if (static_cast<int>(positions.size()) > window) positions.resize(window);
  const Vec3 rest = positions.empty() ? state.position : positions.back();
  while (static_cast<int>(positions.size()) < window) positions.push_back(rest);
  return plan_from_positions(state, positions, dt, kin);
}

Plan straight_to_park_plan(const DroneState& state, const CellSet& parking, int window,
                           const StageConfig& cfg, const KinematicConfig& kin) {
  std::vector<Vec3> positions = braking_positions(state.position, state.velocity, cfg.dt, kin);
  if (static_cast<int>(positions.size()) > window) positions.resize(window);
  const Vec3 rest = positions.empty() ? state.position : positions.back();
  const int avail = window - static_cast<int>(positions.size());

  const auto cells = parking.sorted_cells();
  if (!cells.empty() && avail > 0) {
    Vec3 target = cell_center(cells.front(), cfg);
    double best = (target - rest).squaredNorm();
    for (const GridCell& c : cells) {
      const Vec3 center = cell_center(c, cfg);
      const double d = (center - rest).squaredNorm();
      if (d < best) {
        best = d;
        target = center;
      }
    }
    const double dist = (target - rest).norm();
    const int need = straight_line_steps(dist, cfg.dt, kin);
    DroneState at_rest{state.id, rest, Vec3::Zero(), state.status};
    if (need <= avail && dist > 1e-12) {
      const Plan flight = plan_straight_line(at_rest, target, avail, cfg.dt, kin, state.id);
      const Trajectory traj = execute_plan(at_rest, flight, 0, cfg.dt, kin);
      for (std::size_t k = 1; k < traj.poses.size(); ++k)
        positions.push_back(traj.poses[k].position);
    } else if (dist > 1e-12) {
      // Cannot reach any parking cell in time; cover as much ground as it can.
      const Vec3 dir = (target - rest) / dist;
      double progress = 0.0;
      Vec3 p = rest;
      for (int k = 1; k <= avail; ++k) {
        const double s = std::min({kin.v_max, k * kin.a_max * cfg.dt,
                                   (avail - k + 1) * kin.a_max * cfg.dt});
        progress = std::min(dist, progress + s * cfg.dt);
        p = rest + dir * progress;
        positions.push_back(p);
      }
    }
  }
  while (static_cast<int>(positions.size()) < window)
    positions.push_back(positions.empty() ? rest : positions.back());
  return plan_from_positions(state, positions, cfg.dt, kin);
}

// ---------------------------------------------------------------------------

std::vector<DroneId> pick_injected(const ScenarioSpec& spec, const Fleet& fleet) {
  std::vector<DroneId> out;
  if (!spec.failure.ids.empty()) {
    out = spec.failure.ids;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  if (spec.failure.count <= 0) return out;
  Rng rng(derive_seed(spec.master_seed, seed_tag("injection")));
  std::set<DroneId> chosen;
  while (static_cast<int>(chosen.size()) < std::min(spec.failure.count, fleet.show_count))
    chosen.insert(fleet.initial[rng.uniform_int(fleet.show_count)].id);
  out.assign(chosen.begin(), chosen.end());
  return out;
}

}  // namespace

double sign_test_p_value(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  // One-sided exact binomial tail P(X <= losses) under a fair coin.
  double p = 0.0;
  for (int k = 0; k <= losses; ++k) {
    const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    p += std::exp(log_c - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

IncidentArtifacts run_incident(const ScenarioSpec& spec_in, const RunOptions& opts,
                               Strategy strategy) {
  const auto wall_start = std::chrono::steady_clock::now();
  ScenarioSpec spec = spec_in;
  if (opts.seed_override) spec.master_seed = *opts.seed_override;
  spec.validate();
  const StageConfig& cfg = spec.stage;
  const KinematicConfig& kin = spec.kinematics;
  const double radius = kin.radius;
  const TimeStep t0 = spec.failure.t0;

  Fleet fleet = build_fleet(spec);
  ScriptSet scripts(fleet, cfg, radius);
  std::vector<DroneId> everyone;
  std::unordered_map<DroneId, int> fleet_index;
  for (int i = 0; i < fleet.total(); ++i) {
    everyone.push_back(fleet.initial[i].id);
    fleet_index.emplace(fleet.initial[i].id, i);
  }
  std::sort(everyone.begin(), everyone.end());
  const auto is_spare = [&](DroneId id) { return fleet.is_spare[fleet_index.at(id)]; };

  IncidentArtifacts art;
  IncidentReport& rep = art.report;
  rep.strategy = strategy;
  rep.master_seed = spec.master_seed;
  rep.t0 = t0;

  const std::vector<DroneId> injected = pick_injected(spec, fleet);
  rep.injected = injected;
  const std::uint64_t gt_seed =
      spec.ground_truth_seed.value_or(derive_seed(spec.master_seed, seed_tag("ground_truth")));

  // Ground-truth falls for the injected drones (held-out stream; the
  // predictor never sees these draws).
  std::vector<Fall> initial_falls;
  for (const DroneId id : injected) {
    FailureKind kind;
    if (spec.failure.forced_kind) {
      kind = *spec.failure.forced_kind;
    } else {
      Rng pick(derive_seed(gt_seed, static_cast<std::uint64_t>(id), 0));
      kind = sample_mode(spec.predictor.prior, pick.uniform());
    }
    DroneState state{id, scripts.position(id, t0), scripts.velocity(id, t0),
                     DroneStatus::kFallen};
    initial_falls.push_back(
        {id, simulate_failure(state, spec.predictor.params_for(kind),
                              derive_seed(gt_seed, static_cast<std::uint64_t>(id), 1), cfg, kin,
                              t0)});
  }

  // Prediction and occupancy.
  TimeStep t_end = t0;
  std::vector<OccupancyField> fields(injected.size());
  IncidentZones& zones = art.zones;
  zones.t0 = t0;
  if (!injected.empty()) {
    const std::uint64_t predictor_seed = derive_seed(spec.master_seed, seed_tag("predictor"));
    const int h = spec.predictor.history_len;
    parallel_for(static_cast<int>(injected.size()), opts.threads, [&](int i) {
      const DroneId id = injected[i];
      PoseHistory history;
      history.id = id;
      for (TimeStep t = t0 - h + 1; t <= t0; ++t)
        history.poses.push_back({t, scripts.position(id, std::max(t, cfg.t_first))});
      const RolloutSet rollouts =
          predict_rollouts(history, spec.predictor.rollouts,
                           derive_seed(predictor_seed, static_cast<std::uint64_t>(id)), cfg, kin,
                           spec.predictor);
      const ZoneSet prior =
          footprint_of_path(scripts.path(id, cfg.t_first, t0), radius, cfg, OffStagePolicy::kClip);
      fields[i] = estimate_occupancy(rollouts, radius, cfg, prior);
    });
    art.combined = combine_occupancy(fields);
    t_end = incident_end_time(fields);
    for (std::size_t i = 0; i < injected.size(); ++i)
      zones.fall_zones.emplace(injected[i], fall_zone(fields[i]));
    zones.hit = hit_zone(fields);
    zones.parking = parking_space(zones.hit, cfg, t0, t_end, spec.parking);
  }
  zones.t_end = t_end;
  rep.t_end = t_end;

  // Evacuee selection: every drone whose own footprint or remaining assigned
  // path touches the hit zone, spares included.
  std::vector<DroneId> evacuees;
  if (!injected.empty()) {
    std::vector<EvacueeCandidate> candidates;
    for (const DroneId id : everyone) {
      if (std::binary_search(injected.begin(), injected.end(), id)) continue;
      EvacueeCandidate c;
      c.state = DroneState{id, scripts.position(id, t0), scripts.velocity(id, t0),
                           DroneStatus::kActive};
      c.remaining_path = scripts.path(id, t0, std::min(t_end, scripts.horizon()));
      candidates.push_back(std::move(c));
    }
    evacuees = select_evacuees(candidates, zones.hit, radius, cfg);
  }
  rep.evacuees = evacuees;

  // Evacuation planning per strategy.
  FormationPlan& formation = art.formation;
  std::set<DroneId> moved;
  if (!evacuees.empty() && strategy != Strategy::kIgnore) {
    // Drones that keep flying the show are reserved so evacuation cannot cut
    // through the ongoing formation.
    ZoneSet show_reserved;
    for (const DroneId id : everyone) {
      if (std::binary_search(injected.begin(), injected.end(), id)) continue;
      if (std::binary_search(evacuees.begin(), evacuees.end(), id)) continue;
      show_reserved.merge(
          footprint_of_path(scripts.path(id, t0, t_end), radius, cfg, OffStagePolicy::kClip));
    }
    std::vector<DroneState> ev_states;
    for (const DroneId id : evacuees)
      ev_states.push_back(DroneState{id, scripts.position(id, t0), scripts.velocity(id, t0),
                                     DroneStatus::kActive});
    const int window = t_end - t0;
    if (strategy == Strategy::kPlanner) {
      formation =
          assemble_formation(ev_states, zones, art.combined, spec.alpha_overrides, cfg, kin,
                             spec.planner, derive_seed(spec.master_seed, seed_tag("planner")),
                             show_reserved, opts.threads);
    } else {
      for (const DroneState& st : ev_states) {
        Plan plan = strategy == Strategy::kHover
                        ? hover_policy_plan(st, window, cfg.dt, kin)
                        : straight_to_park_plan(st, zones.parking, window, cfg, kin);
        EvacuationPlan ev;
        ev.id = st.id;
        ev.plan = std::move(plan);
        const Trajectory traj = execute_plan(st, ev.plan, t0, cfg.dt, kin);
        ev.target = traj.poses.back().position;
        ev.footprint = footprint_of_path(traj.poses, radius, cfg, OffStagePolicy::kClip);
        ev.cost = safe_neg_log_probability(ev.footprint, art.combined);
        ev.psafe = std::isinf(ev.cost) ? 0.0 : std::exp(-ev.cost);
        const auto it = spec.alpha_overrides.find(st.id);
        formation.score +=
            (it != spec.alpha_overrides.end() ? it->second : spec.planner.alpha_default) *
            ev.psafe;
        formation.plans.emplace(st.id, std::move(ev));
      }
    }
    // Install evacuation scripts; capacity failures fall back to hovering.
    for (const DroneState& st : ev_states) {
      const auto it = formation.plans.find(st.id);
      Plan plan = it != formation.plans.end() ? it->second.plan
                                              : hover_policy_plan(st, window, cfg.dt, kin);
      scripts.overwrite(st.id, execute_plan(st, plan, t0, cfg.dt, kin));
      moved.insert(st.id);
    }
  }
  rep.capacity_errors = formation.failures;

  // Realized incident, phase 1: t0 until the predicted end of the incident.
  SimState sim;
  sim.falls = initial_falls;
  for (const DroneId id : injected) sim.dead.insert(id);
  const std::uint64_t cascade_seed = derive_seed(gt_seed, seed_tag("cascade"));
  simulate_span(scripts, sim, everyone, t0, t_end, radius, cfg, kin, spec.predictor.drop_params,
                cascade_seed, true);

  // Recovery: match the surviving hidden pool onto vacant show slots.
  std::set<DroneId> missing_set(injected.begin(), injected.end());
  for (const DroneId id : moved) missing_set.insert(id);
  for (const HitEvent& h : sim.hits) missing_set.insert(h.id);
  std::vector<DroneId> missing(missing_set.begin(), missing_set.end());

  std::vector<DroneState> hidden;
  for (const DroneId id : everyone) {
    const bool pooled = moved.count(id) > 0 || is_spare(id);
    if (!pooled || sim.dead.count(id)) continue;
    hidden.push_back(
        DroneState{id, scripts.position(id, t_end), Vec3::Zero(), DroneStatus::kHidden});
  }

  // The resume time and the slot positions depend on each other (slots keep
  // moving with the show); iterate to a fixed point. t_resume only grows and
  // travel times are bounded by the stage diameter, so this terminates.
  // Recovery flights thread the free layer between the parking band and the
  // show volume when the stage has one.
  std::optional<double> transit_z;
  const int transit_cell = spec.parking.z_max_cell + 1;
  if (spec.explicit_drones.empty() && transit_cell < spec.show.z_min_cell &&
      transit_cell < cfg.extent[2])
    transit_z = cfg.origin.z() + (transit_cell + 0.5) * cfg.cell_size;

  TimeStep t_resume = t_end;
  std::vector<Vacancy> vacancies;
  RecoveryAssignment match;
  for (int round = 0; round < 32; ++round) {
    vacancies = find_vacancies(fleet.nominal, missing, t_resume);
    match = assign_hidden(hidden, vacancies);
    const TimeStep want = resume_time(match, hidden, vacancies, t_end, transit_z, cfg.dt, kin);
    if (want <= t_resume) break;
    t_resume = want;
  }
  FormationPlan recovery_formation;
  if (!match.pairs.empty()) {
    ZoneSet recovery_reserved;
    for (const DroneId id : everyone) {
      if (sim.dead.count(id) || moved.count(id)) continue;
      if (std::find_if(hidden.begin(), hidden.end(),
                       [&](const DroneState& s) { return s.id == id; }) != hidden.end())
        continue;
      recovery_reserved.merge(footprint_of_path(scripts.path(id, t_end, t_resume), radius, cfg,
                                                OffStagePolicy::kClip));
    }
    recovery_formation = plan_recovery(match, hidden, vacancies, t_end, t_resume, transit_z, cfg,
                                       kin, recovery_reserved);
    for (const auto& [id, ev] : recovery_formation.plans) {
      const auto it = std::find_if(hidden.begin(), hidden.end(),
                                   [&](const DroneState& s) { return s.id == id; });
      scripts.overwrite(id, execute_plan(*it, ev.plan, t_end, cfg.dt, kin));
    }
    const auto resumed = resume_show(match, vacancies, cfg.dt, kin);
    for (const ResumedDrone& r : resumed) {
      Trajectory suffix;
      suffix.poses.push_back({t_resume, r.state.position});
      for (std::size_t k = 0; k < vacancies.size(); ++k) {
        if (vacancies[k].missing_id != r.missing_id) continue;
        for (std::size_t s = 0; s < vacancies[k].suffix_positions.size(); ++s)
          suffix.poses.push_back(
              {t_resume + static_cast<TimeStep>(s) + 1, vacancies[k].suffix_positions[s]});
        break;
      }
      scripts.overwrite(r.hidden_id, suffix);
    }
  }
  rep.t_resume = t_resume;
  rep.vacancies = static_cast<int>(vacancies.size());
  rep.vacancies_filled = static_cast<int>(match.pairs.size());
  for (const auto& f : recovery_formation.failures) rep.capacity_errors.push_back(f);
  std::sort(rep.capacity_errors.begin(), rep.capacity_errors.end());

  // Realized incident, phase 2: through the end of the show.
  simulate_span(scripts, sim, everyone, t_end, scripts.horizon(), radius, cfg, kin,
                spec.predictor.drop_params, cascade_seed, true);

  // Held-out expected-hit estimate over the final scripts.
  double expected_hits = 0.0;
  const int m_samples = injected.empty() ? 0 : spec.evaluation.holdout_samples;
  if (m_samples > 0) {
    scripts.prefill(everyone, t0, scripts.horizon());
    std::vector<int> sample_hits(m_samples, 0);
    parallel_for(m_samples, opts.threads, [&](int m) {
      const std::uint64_t sample_seed = derive_seed(gt_seed, seed_tag("holdout"), m);
      SimState s;
      for (const DroneId id : injected) {
        FailureKind kind;
        if (spec.failure.forced_kind) {
          kind = *spec.failure.forced_kind;
        } else {
          Rng pick(derive_seed(sample_seed, static_cast<std::uint64_t>(id), 0));
          kind = sample_mode(spec.predictor.prior, pick.uniform());
        }
        DroneState state{id, scripts.position(id, t0), scripts.velocity(id, t0),
                         DroneStatus::kFallen};
        s.falls.push_back(
            {id, simulate_failure(state, spec.predictor.params_for(kind),
                                  derive_seed(sample_seed, static_cast<std::uint64_t>(id), 1),
                                  cfg, kin, t0)});
        s.dead.insert(id);
      }
      simulate_span(scripts, s, everyone, t0, scripts.horizon(), radius, cfg, kin,
                    spec.predictor.drop_params, derive_seed(sample_seed, seed_tag("cascade")),
                    false);
      sample_hits[m] = static_cast<int>(s.hits.size());
    });
    for (const int h : sample_hits) expected_hits += h;
    expected_hits /= m_samples;
  }

  // Outcomes and metrics.
  std::map<DroneId, DroneId> filled_slot;  // hidden id -> missing id
  for (const auto& [hid, vidx] : match.pairs) filled_slot[hid] = vacancies[vidx].missing_id;
  std::map<DroneId, HitEvent> hit_by;
  for (const HitEvent& h : sim.hits) hit_by.emplace(h.id, h);

  for (const DroneId id : everyone) {
    DroneOutcome o;
    o.id = id;
    o.evacuated = moved.count(id) > 0;
    const auto hit = hit_by.find(id);
    o.hit = hit != hit_by.end();
    if (o.hit) o.hit_time = hit->second.t;
    const auto plan_it = formation.plans.find(id);
    if (plan_it != formation.plans.end()) {
      o.psafe = plan_it->second.psafe;
      o.cstar = plan_it->second.cost;
    }
    const auto slot = filled_slot.find(id);
    if (slot != filled_slot.end()) o.filled_slot = slot->second;
    if (std::binary_search(injected.begin(), injected.end(), id)) {
      o.terminal = TerminalStatus::kFallenInjected;
    } else if (o.hit) {
      o.terminal = TerminalStatus::kFallenCascade;
    } else if (slot != filled_slot.end()) {
      o.terminal = TerminalStatus::kRecoveredActive;
    } else if (o.evacuated || is_spare(id)) {
      o.terminal = TerminalStatus::kParkedHidden;
    } else {
      o.terminal = TerminalStatus::kActive;
    }
    rep.outcomes.push_back(o);
  }

  rep.metrics.realized_hits = static_cast<int>(sim.hits.size());
  int cascade_hits = 0;
  for (const HitEvent& h : sim.hits)
    if (!std::binary_search(injected.begin(), injected.end(), h.by)) ++cascade_hits;
  rep.metrics.cascade_hits = cascade_hits;
  rep.metrics.expected_hits = expected_hits;
  rep.metrics.score = formation.score;
  rep.metrics.recovery_fill_ratio =
      vacancies.empty() ? 1.0
                        : static_cast<double>(match.pairs.size()) / vacancies.size();
  rep.metrics.collisions = sim.collisions;
  rep.timings_enabled = opts.timings;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return art;
}

IncidentArtifacts run_baseline(const ScenarioSpec& spec, Strategy strategy,
                               const RunOptions& opts) {
  return run_incident(spec, opts, strategy);
}

BatchResult evaluate_batch(const ScenarioSpec& base, int count, std::uint64_t seed, int threads,
                           const std::vector<Strategy>& strategies) {
  if (count < 1) throw SpecError("evaluate_batch: count must be >= 1");
  if (strategies.empty()) throw SpecError("evaluate_batch: need at least one strategy");
  BatchResult result;
  const int per = static_cast<int>(strategies.size());
  result.rows.assign(static_cast<std::size_t>(count) * per, BatchRow{});

  parallel_for(count, threads, [&](int idx) {
    ScenarioSpec spec = base;
    spec.master_seed = derive_seed(seed, seed_tag("batch"), idx);
    spec.ground_truth_seed.reset();
    if (spec.failure.ids.empty()) {
      Rng rng(derive_seed(seed, seed_tag("batch_failures"), idx));
      spec.failure.count = 3 + static_cast<int>(rng.uniform_int(6));  // 3..8 failures
    }
    RunOptions opts;
    opts.threads = 1;  // parallelism lives at the batch level
    for (int s = 0; s < per; ++s) {
      const IncidentArtifacts art = run_incident(spec, opts, strategies[s]);
      BatchRow row;
      row.index = idx;
      row.seed = spec.master_seed;
      row.failures = static_cast<int>(art.report.injected.size());
      row.strategy = strategies[s];
      row.metrics = art.report.metrics;
      row.capacity_errors = static_cast<int>(art.report.capacity_errors.size());
      result.rows[static_cast<std::size_t>(idx) * per + s] = row;
    }
  });

  // Aggregates per strategy.
  for (int s = 0; s < per; ++s) {
    const std::string name = to_string(strategies[s]);
    double sum = 0.0, sum_sq = 0.0, sum_exp = 0.0, sum_score = 0.0, sum_fill = 0.0;
    for (int idx = 0; idx < count; ++idx) {
      const Metrics& m = result.rows[static_cast<std::size_t>(idx) * per + s].metrics;
      sum += m.realized_hits;
      sum_sq += static_cast<double>(m.realized_hits) * m.realized_hits;
      sum_exp += m.expected_hits;
      sum_score += m.score;
      sum_fill += m.recovery_fill_ratio;
    }
    const double mean = sum / count;
    result.mean_realized_hits[name] = mean;
    result.stddev_realized_hits[name] = std::sqrt(std::max(0.0, sum_sq / count - mean * mean));
    result.mean_expected_hits[name] = sum_exp / count;
    result.mean_score[name] = sum_score / count;
    result.mean_fill_ratio[name] = sum_fill / count;
  }

  // Paired sign tests: planner vs each baseline on realized hits.
  const auto planner_it = std::find(strategies.begin(), strategies.end(), Strategy::kPlanner);
  if (planner_it != strategies.end()) {
    const int ps = static_cast<int>(planner_it - strategies.begin());
    for (int s = 0; s < per; ++s) {
      if (s == ps) continue;
      PairedSignTest test;
      for (int idx = 0; idx < count; ++idx) {
        const int a = result.rows[static_cast<std::size_t>(idx) * per + ps].metrics.realized_hits;
        const int b = result.rows[static_cast<std::size_t>(idx) * per + s].metrics.realized_hits;
        if (a < b)
          ++test.wins;
        else if (a > b)
          ++test.losses;
        else
          ++test.ties;
      }
      test.p_value = sign_test_p_value(test.wins, test.losses);
      result.sign_tests[to_string(strategies[s])] = test;
    }
  }
  return result;
}

std::string BatchResult::to_csv() const {
  std::ostringstream os;
  os << "index,seed,failures,strategy,realized_hits,expected_hits,cascade_hits,score,"
        "recovery_fill_ratio,collisions,capacity_errors\n";
  for (const BatchRow& r : rows) {
    os << r.index << ',' << r.seed << ',' << r.failures << ',' << to_string(r.strategy) << ','
       << r.metrics.realized_hits << ',' << format_double(r.metrics.expected_hits) << ','
       << r.metrics.cascade_hits << ',' << format_double(r.metrics.score) << ','
       << format_double(r.metrics.recovery_fill_ratio) << ',' << r.metrics.collisions << ','
       << r.capacity_errors << "\n";
  }
  return os.str();
}

std::string BatchResult::summary_json() const {
  Json j;
  Json strategies = Json::object();
  for (const auto& [name, mean] : mean_realized_hits) {
    Json s;
    s["mean_realized_hits"] = mean;
    s["stddev_realized_hits"] = stddev_realized_hits.at(name);
    s["mean_expected_hits"] = mean_expected_hits.at(name);
    s["mean_score"] = mean_score.at(name);
    s["mean_recovery_fill_ratio"] = mean_fill_ratio.at(name);
    strategies[name] = std::move(s);
  }
  j["strategies"] = std::move(strategies);
  Json tests = Json::object();
  for (const auto& [name, t] : sign_tests) {
    Json s;
    s["wins"] = t.wins;
    s["losses"] = t.losses;
    s["ties"] = t.ties;
    s["p_value"] = t.p_value;
    tests[name] = std::move(s);
  }
  j["sign_tests_vs_planner"] = std::move(tests);
  return j.dump(2) + "\n";
}

void write_occupancy_table(std::ostream& os, const OccupancyField& field) {
  os << "ix,iy,iz,t,prob\n";
  for (const Tile& tile : field.sorted_tiles())
    os << tile.cell.ix << ',' << tile.cell.iy << ',' << tile.cell.iz << ',' << tile.t << ','
       << format_double(field.get(tile)) << "\n";
}

void write_plans(std::ostream& os, const FormationPlan& formation, TimeStep t0) {
  os << "formation score " << format_double(formation.score) << " plans "
     << formation.plans.size() << " failures " << formation.failures.size() << "\n";
  for (const auto& [id, ev] : formation.plans) {
    os << "plan " << id << " t0 " << t0 << " steps " << ev.plan.length() << " cstar "
       << format_double(ev.cost) << " psafe " << format_double(ev.psafe) << " target "
       << format_double(ev.target.x()) << ' ' << format_double(ev.target.y()) << ' '
       << format_double(ev.target.z()) << "\n";
    for (const Action& a : ev.plan.actions)
      os << "a " << format_double(a.delta_v.x()) << ',' << format_double(a.delta_v.y()) << ','
         << format_double(a.delta_v.z()) << "\n";
  }
  for (const auto& [id, msg] : formation.failures) os << "capacity " << id << " " << msg << "\n";
}

}  // namespace skypark
