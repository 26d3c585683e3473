#include "skypark/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "skypark/rng.hpp"

namespace skypark {

namespace {
constexpr double kRelTol = 1e-9;  // absorbs float noise in limit checks

bool within(double value, double limit) { return value <= limit * (1.0 + kRelTol) + 1e-12; }
}  // namespace

const char* to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::kDrop: return "drop";
    case FailureKind::kLand: return "land";
    case FailureKind::kReturnToLaunch: return "return_to_launch";
  }
  return "unknown";
}

void KinematicConfig::validate() const {
  if (v_max <= 0.0) throw SpecError("kinematics: v_max must be positive");
  if (a_max <= 0.0) throw SpecError("kinematics: a_max must be positive");
  if (radius <= 0.0) throw SpecError("kinematics: drone radius must be positive");
}

void FailureMode::validate() const {
  if (sigma < 0.0) throw SpecError("failure mode: sigma must be >= 0");
  if (drag < 0.0) throw SpecError("failure mode: drag must be >= 0");
  if (kind != FailureKind::kDrop && descent_speed <= 0.0)
    throw SpecError("failure mode: descent speed must be positive");
  if (lateral_damping < 0.0) throw SpecError("failure mode: lateral damping must be >= 0");
}

void ShowConfig::validate() const {
  if (lattice_spacing < 2) throw SpecError("show: lattice_spacing must be >= 2");
  if (z_min_cell < 0 || z_max_cell < z_min_cell) throw SpecError("show: bad z band");
  if (segment_min < 1 || segment_max < segment_min) throw SpecError("show: bad segment range");
  if (p_translate < 0 || p_vertical < 0 || p_translate + p_vertical > 1.0 + 1e-12)
    throw SpecError("show: segment probabilities must be nonnegative and sum to <= 1");
}

DroneState step(const DroneState& state, const Action& action, double dt,
                const KinematicConfig& kin) {
  if (!within(action.delta_v.norm(), kin.a_max * dt))
    throw InfeasibleActionError("delta_v exceeds a_max*dt");
  DroneState next = state;
  next.velocity = state.velocity + action.delta_v;
  if (!within(next.velocity.norm(), kin.v_max))
    throw InfeasibleActionError("resulting speed exceeds v_max");
  next.position = state.position + next.velocity * dt;
  return next;
}

Trajectory execute_plan(const DroneState& state, const Plan& plan, TimeStep t_start, double dt,
                        const KinematicConfig& kin) {
  Trajectory traj;
  traj.poses.reserve(plan.actions.size() + 1);
  traj.poses.push_back({t_start, state.position});
  DroneState cur = state;
  for (int k = 0; k < plan.length(); ++k) {
    try {
      cur = step(cur, plan.actions[k], dt, kin);
    } catch (const InfeasibleActionError& e) {
      throw InfeasibleActionError(std::string(e.what()) + " at plan step " + std::to_string(k), k);
    }
    traj.poses.push_back({t_start + k + 1, cur.position});
  }
  return traj;
}

Plan plan_from_positions(const DroneState& state, std::span<const Vec3> positions, double dt,
                         const KinematicConfig& kin) {
  Plan plan;
  plan.actions.reserve(positions.size());
  Vec3 p = state.position;
  Vec3 v = state.velocity;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const Vec3 v_cmd = (positions[k] - p) / dt;
    const Vec3 dv = v_cmd - v;
    if (!within(dv.norm(), kin.a_max * dt))
      throw InfeasibleActionError("waypoint needs delta_v beyond a_max*dt", static_cast<int>(k));
    if (!within(v_cmd.norm(), kin.v_max))
      throw InfeasibleActionError("waypoint needs speed beyond v_max", static_cast<int>(k));
    plan.actions.push_back({dv});
    v = v + dv;       // mirrors step() arithmetic so execution reproduces
    p = p + v * dt;   // the same positions bit for bit
  }
  return plan;
}

namespace {

struct FallState {
  Vec3 p;
  Vec3 v;
};

// Gravity plus quadratic drag; drop mode is unpowered.
Vec3 drop_accel(const Vec3& v, double drag) {
  return Vec3(0, 0, -kGravity) - drag * v.norm() * v;
}

// One dt of drop dynamics via RK4 substeps. Constant-gravity falls integrate
// exactly; with drag the step tracks the ODE far below the 1e-6 m oracle tolerance.
FallState integrate_drop(FallState s, double dt, double drag) {
  constexpr int kSub = 16;
  const double h = dt / kSub;
  for (int i = 0; i < kSub; ++i) {
    const Vec3 k1v = drop_accel(s.v, drag);
    const Vec3 k1p = s.v;
    const Vec3 k2v = drop_accel(s.v + 0.5 * h * k1v, drag);
    const Vec3 k2p = s.v + 0.5 * h * k1v;
    const Vec3 k3v = drop_accel(s.v + 0.5 * h * k2v, drag);
    const Vec3 k3p = s.v + 0.5 * h * k2v;
    const Vec3 k4v = drop_accel(s.v + h * k3v, drag);
    const Vec3 k4p = s.v + h * k3v;
    s.p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    s.v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  return s;
}

}  // namespace

Trajectory simulate_failure(const DroneState& state, const FailureMode& mode, std::uint64_t seed,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            TimeStep t_start) {
  mode.validate();
  Rng rng(seed);
  const double ground = cfg.origin.z();

  Trajectory traj;
  traj.poses.push_back({t_start, state.position});
  if (state.position.z() <= ground || !cfg.contains(state.position)) return traj;

  FallState s{state.position, state.velocity};
  bool landing = mode.kind == FailureKind::kLand;
  const int step_cap = std::max(1000, 10 * cfg.show_steps());

  for (int k = 1; k <= step_cap; ++k) {
    if (mode.kind == FailureKind::kDrop) {
      s = integrate_drop(s, cfg.dt, mode.drag);
    } else if (landing) {
      s.v.head<2>() *= std::exp(-mode.lateral_damping * cfg.dt);
      s.v.z() = -mode.descent_speed;
      s.p += s.v * cfg.dt;
    } else {
      // Cruise toward the pad at v_max, acceleration-limited, holding altitude.
      const Vec3 to_pad(mode.launch_point.x() - s.p.x(), mode.launch_point.y() - s.p.y(), 0.0);
      if (to_pad.norm() <= kin.v_max * cfg.dt) {
        landing = true;
        s.v.head<2>() *= std::exp(-mode.lateral_damping * cfg.dt);
        s.v.z() = -mode.descent_speed;
        s.p += s.v * cfg.dt;
      } else {
        const Vec3 v_des = kin.v_max * to_pad.normalized();
        Vec3 dv = v_des - s.v;
        const double dv_cap = kin.a_max * cfg.dt;
        if (dv.norm() > dv_cap) dv *= dv_cap / dv.norm();
        s.v += dv;
        s.p += s.v * cfg.dt;
      }
    }
    if (mode.sigma > 0.0) {
      s.p.x() += rng.normal(0.0, mode.sigma);
      s.p.y() += rng.normal(0.0, mode.sigma);
    }
    if (s.p.z() <= ground) {
      Vec3 final_p = s.p;
      final_p.z() = ground;  // terminal pose clamped to the ground plane
      traj.poses.push_back({t_start + k, final_p});
      break;
    }
    traj.poses.push_back({t_start + k, s.p});
    if (!cfg.contains(s.p)) break;  // left the stage
  }
  return traj;
}

namespace {

struct LatticeSlot {
  int ix;
  int iy;
};

}  // namespace

std::vector<ShowDrone> generate_show(int n_drones, const StageConfig& cfg,
                                     const KinematicConfig& kin, const ShowConfig& show,
                                     std::uint64_t seed) {
  cfg.validate();
  kin.validate();
  show.validate();
  if (n_drones < 1) throw SpecError("show: need at least one drone");
  if (show.z_max_cell >= cfg.extent[2]) throw SpecError("show: z band exceeds the stage");
  const double step_speed = cfg.cell_size / cfg.dt;
  if (step_speed > kin.v_max * (1.0 + 1e-12))
    throw SpecError("show: one cell per step exceeds v_max");
  if (2.0 * step_speed > kin.a_max * cfg.dt * (1.0 + 1e-12))
    throw SpecError("show: choreography direction changes exceed a_max");
  if (kin.radius >= 0.5 * cfg.cell_size)
    throw SpecError("show: drone radius must fit inside one cell");

  // Private lattice columns, spacing cells apart, one margin cell from the border.
  const int margin = 1;
  std::vector<LatticeSlot> slots;
  for (int ix = margin; ix <= cfg.extent[0] - 1 - margin; ix += show.lattice_spacing)
    for (int iy = margin; iy <= cfg.extent[1] - 1 - margin; iy += show.lattice_spacing)
      slots.push_back({ix, iy});
  if (static_cast<int>(slots.size()) < n_drones)
    throw SpecError("show: stage too small for " + std::to_string(n_drones) + " drones");

  // Compact formation: slots nearest the stage center first.
  const double cx = 0.5 * cfg.extent[0], cy = 0.5 * cfg.extent[1];
  std::sort(slots.begin(), slots.end(), [&](const LatticeSlot& a, const LatticeSlot& b) {
    const double da = std::pow(a.ix + 0.5 - cx, 2) + std::pow(a.iy + 0.5 - cy, 2);
    const double db = std::pow(b.ix + 0.5 - cx, 2) + std::pow(b.iy + 0.5 - cy, 2);
    if (da != db) return da < db;
    return std::tie(a.ix, a.iy) < std::tie(b.ix, b.iy);
  });
  slots.resize(n_drones);

  Rng rng(seed);
  const int band = show.z_max_cell - show.z_min_cell + 1;
  std::vector<int> z_cell(n_drones);
  for (int i = 0; i < n_drones; ++i)
    z_cell[i] = show.z_min_cell + static_cast<int>(rng.uniform_int(band));

  const int total_steps = cfg.show_steps() - 1;  // actions per plan
  int min_ix = slots[0].ix, max_ix = slots[0].ix, min_iy = slots[0].iy, max_iy = slots[0].iy;
  for (const auto& s : slots) {
    min_ix = std::min(min_ix, s.ix);
    max_ix = std::max(max_ix, s.ix);
    min_iy = std::min(min_iy, s.iy);
    max_iy = std::max(max_iy, s.iy);
  }

  std::vector<std::vector<Vec3>> positions(n_drones);
  auto slot_center = [&](int i, int fx, int fy) {
    return cell_center({slots[i].ix + fx, slots[i].iy + fy, z_cell[i]}, cfg);
  };
  int fx = 0, fy = 0;  // formation offset, cells
  for (int i = 0; i < n_drones; ++i) positions[i].push_back(slot_center(i, fx, fy));

  const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  int t = 0;
  while (t < total_steps) {
    int len = show.segment_min +
              static_cast<int>(rng.uniform_int(show.segment_max - show.segment_min + 1));
    len = std::min(len, total_steps - t);
    const double r = rng.uniform();
    if (r < show.p_translate) {
      const int d = static_cast<int>(rng.uniform_int(4));
      const int dx = dirs[d][0], dy = dirs[d][1];
      // Longest stretch of this move that keeps every slot inside the margin.
      int feasible = len;
      for (int l = 1; l <= len; ++l) {
        const int nx_min = min_ix + fx + dx * l, nx_max = max_ix + fx + dx * l;
        const int ny_min = min_iy + fy + dy * l, ny_max = max_iy + fy + dy * l;
        if (nx_min < margin || nx_max > cfg.extent[0] - 1 - margin || ny_min < margin ||
            ny_max > cfg.extent[1] - 1 - margin) {
          feasible = l - 1;
          break;
        }
      }
      for (int l = 0; l < len; ++l) {
        if (l < feasible) {
          fx += dx;
          fy += dy;
        }
        for (int i = 0; i < n_drones; ++i) positions[i].push_back(slot_center(i, fx, fy));
      }
    } else if (r < show.p_translate + show.p_vertical) {
      for (int l = 0; l < len; ++l) {
        for (int i = 0; i < n_drones; ++i) {
          const double u = rng.uniform();
          int dz = u < 0.35 ? -1 : (u < 0.7 ? 1 : 0);
          const int nz = z_cell[i] + dz;
          if (nz < show.z_min_cell || nz > show.z_max_cell) dz = 0;
          z_cell[i] += dz;
          positions[i].push_back(slot_center(i, fx, fy));
        }
      }
    } else {
      for (int l = 0; l < len; ++l)
        for (int i = 0; i < n_drones; ++i) positions[i].push_back(slot_center(i, fx, fy));
    }
    t += len;
  }

  std::vector<ShowDrone> out(n_drones);
  for (int i = 0; i < n_drones; ++i) {
    out[i].initial =
        DroneState{i, positions[i].front(), Vec3::Zero(), DroneStatus::kActive};
    out[i].plan = plan_from_positions(
        out[i].initial, std::span<const Vec3>(positions[i]).subspan(1), cfg.dt, kin);
  }
  return out;
}

ZoneSet footprint_of_plan(const Plan& plan, const DroneState& state, TimeStep t_start,
                          double radius, double dt, const StageConfig& cfg,
                          const KinematicConfig& kin) {
  const Trajectory traj = execute_plan(state, plan, t_start, dt, kin);
  return footprint_of_path(traj.poses, radius, cfg, OffStagePolicy::kThrow);
}

}  // namespace skypark
