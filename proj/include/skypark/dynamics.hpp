#ifndef SKYPARK_DYNAMICS_HPP
#define SKYPARK_DYNAMICS_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "skypark/grid.hpp"
#include "skypark/types.hpp"

namespace skypark {

inline constexpr double kGravity = 9.81;  // m/s^2

struct KinematicConfig {
  double v_max = 5.0;   // m/s
  double a_max = 8.0;   // m/s^2
  double radius = 0.3;  // drone body sphere radius, m

  void validate() const;
};

struct DroneState {
  DroneId id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  DroneStatus status = DroneStatus::kActive;
};

/// Velocity change applied over one time step.
struct Action {
  Vec3 delta_v = Vec3::Zero();
};

struct Plan {
  std::vector<Action> actions;

  int length() const { return static_cast<int>(actions.size()); }
  bool empty() const { return actions.empty(); }
};

struct Trajectory {
  std::vector<TimedPose> poses;  // strictly increasing time steps

  bool empty() const { return poses.empty(); }
  int steps() const { return static_cast<int>(poses.size()) - 1; }
  TimeStep start_time() const { return poses.front().t; }
  TimeStep end_time() const { return poses.back().t; }
};

enum class FailureKind { kDrop, kLand, kReturnToLaunch };

const char* to_string(FailureKind kind);

/// Parameters of one failure response. sigma is a per-step lateral position
/// kick in m/sqrt(step), so lateral variance after k steps is k*sigma^2.
struct FailureMode {
  FailureKind kind = FailureKind::kDrop;
  double sigma = 0.0;            // m/sqrt(step), lateral
  double drag = 0.1;             // quadratic drag coefficient, 1/m (drop)
  double descent_speed = 1.0;    // m/s (land, final phase of return)
  double lateral_damping = 0.8;  // 1/s exponential decay of lateral velocity (land)
  Vec3 launch_point = Vec3::Zero();  // return-to-launch target (pad, on the ground)

  void validate() const;
};

/// One integration step: velocity' = velocity + delta_v, position' =
/// position + velocity'*dt (semi-implicit Euler). Throws
/// InfeasibleActionError when the action breaks a kinematic limit.
DroneState step(const DroneState& state, const Action& action, double dt,
                const KinematicConfig& kin);

/// Folds step over the plan; returns all |plan|+1 poses starting at t_start.
/// Infeasibility carries the failing step index.
Trajectory execute_plan(const DroneState& state, const Plan& plan, TimeStep t_start, double dt,
                        const KinematicConfig& kin);

/// Derives the Action sequence that visits `positions` (one per step) from
/// `state`, validating kinematic limits. Positions exclude the start pose.
Plan plan_from_positions(const DroneState& state, std::span<const Vec3> positions, double dt,
                         const KinematicConfig& kin);

/// Simulates one failure response from `state` at `t_start` until the drone
/// reaches the ground (z <= origin.z, terminal pose clamped to the ground
/// plane) or leaves the stage box. Deterministic given the seed; sigma = 0
/// makes the output seed-independent.
///
/// Drop integrates gravity plus quadratic drag (RK4 substeps, so the
/// zero-drag fall matches 1/2*g*t^2 exactly and the dragged fall tracks the
/// ODE to well under 1e-6 m). Land descends at constant speed with
/// exponentially damped lateral velocity. Return-to-launch cruises toward
/// the pad at v_max under the acceleration limit, then lands.
Trajectory simulate_failure(const DroneState& state, const FailureMode& mode, std::uint64_t seed,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            TimeStep t_start);

/// Show choreography parameters. Drones sit on a sparse lattice of private
/// cell columns (lattice_spacing cells apart in x and y) and alternate
/// between whole-formation lateral translations, per-drone vertical drifts
/// inside their own columns, and hovers. That structure keeps every pair of
/// plan footprints disjoint by construction.
struct ShowConfig {
  int lattice_spacing = 2;  // cells between drones in x and y
  int z_min_cell = 6;       // show band, inclusive cell indices
  int z_max_cell = 10;
  int segment_min = 4;  // steps per choreography segment
  int segment_max = 10;
  double p_translate = 0.4;
  double p_vertical = 0.4;  // remainder hovers

  void validate() const;
};

struct ShowDrone {
  DroneState initial;
  Plan plan;
};

/// Generates a collision-free assigned formation plan covering the whole
/// show duration. Throws SpecError when the stage cannot hold n_drones.
std::vector<ShowDrone> generate_show(int n_drones, const StageConfig& cfg,
                                     const KinematicConfig& kin, const ShowConfig& show,
                                     std::uint64_t seed);

/// Footprint of executing `plan` from `state` at t_start: swept tiles of
/// every step interval plus the final pose. Propagates off-stage errors.
ZoneSet footprint_of_plan(const Plan& plan, const DroneState& state, TimeStep t_start,
                          double radius, double dt, const StageConfig& cfg,
                          const KinematicConfig& kin);

}  // namespace skypark

#endif  // SKYPARK_DYNAMICS_HPP
