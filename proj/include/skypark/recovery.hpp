#ifndef SKYPARK_RECOVERY_HPP
#define SKYPARK_RECOVERY_HPP

#include <map>
#include <span>
#include <vector>

#include "skypark/dynamics.hpp"
#include "skypark/planner.hpp"
#include "skypark/types.hpp"

namespace skypark {

/// A show slot left dark by a missing drone: where its assigned trajectory
/// sits at t_resume, plus the positions it would fly afterwards.
struct Vacancy {
  DroneId missing_id = 0;
  Vec3 resume_position = Vec3::Zero();
  std::vector<Vec3> suffix_positions;  // assigned positions after t_resume
};

struct RecoveryAssignment {
  // hidden drone id -> index into the vacancy list
  std::vector<std::pair<DroneId, int>> pairs;
  std::vector<int> unfilled;  // vacancy indices left dark
  double total_distance = 0.0;
};

/// One vacancy per missing drone whose assigned trajectory extends past
/// t_resume. `assigned` maps drone id to its full nominal trajectory.
std::vector<Vacancy> find_vacancies(const std::map<DroneId, Trajectory>& assigned,
                                    std::span<const DroneId> missing_ids, TimeStep t_resume);

/// Minimum-cost assignment (Hungarian) on a rectangular matrix; returns for
/// each row the chosen column or -1. Among equal-cost optima the
/// lexicographically smallest row->column pairing wins (rows in order, each
/// pinned to its smallest feasible column), up to 64 rows/columns; larger
/// instances keep plain optimality.
std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost);

/// Matches hidden drones to vacancies by minimum total Euclidean distance;
/// |pairs| = min(#hidden, #vacancies), leftovers reported.
RecoveryAssignment assign_hidden(std::span<const DroneState> hidden,
                                 std::span<const Vacancy> vacancies);

/// Minimal number of steps to fly a straight line of length `dist` from
/// rest to rest under the kinematic limits.
int straight_line_steps(double dist, double dt, const KinematicConfig& kin);

/// Discrete rest-to-rest straight-line plan from state.position to `target`,
/// arriving in exactly `steps` steps (pad with hover) with the final pose
/// snapped onto the target. Throws CapacityError when `steps` is too small.
Plan plan_straight_line(const DroneState& state, const Vec3& target, int steps, double dt,
                        const KinematicConfig& kin, DroneId id);

/// Travel time of one recovery flight. With a transit altitude the flight is
/// three rest-to-rest legs (up to the transit layer, lateral, up into the
/// slot); without one it is a direct straight line.
int recovery_travel_steps(const Vec3& from, const Vec3& to, std::optional<double> transit_z,
                          double dt, const KinematicConfig& kin);

/// t_end plus the slowest matched flight's travel time.
TimeStep resume_time(const RecoveryAssignment& assignment, std::span<const DroneState> hidden,
                     std::span<const Vacancy> vacancies, TimeStep t_end,
                     std::optional<double> transit_z, double dt, const KinematicConfig& kin);

/// Plans the matched recovery flights from t_end so that everyone reaches
/// its vacancy by t_resume, either directly or via the transit layer, with
/// departure delays chosen against a shared reservation table (earlier
/// flights, drones that stay parked, plus `base_reserved` for the ongoing
/// show). Flights that cannot avoid conflicts within their slack are dropped
/// to unfilled.
FormationPlan plan_recovery(RecoveryAssignment& assignment, std::span<const DroneState> hidden,
                            std::span<const Vacancy> vacancies, TimeStep t_end,
                            TimeStep t_resume, std::optional<double> transit_z,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            const ZoneSet& base_reserved);

/// Per-drone plan that reproduces the missing drone's assigned suffix from
/// t_resume. The drone docks onto the slot (position snapped to the resume
/// point, which the recovery flight already reaches within float error) and
/// its status becomes active.
struct ResumedDrone {
  DroneId hidden_id = 0;
  DroneId missing_id = 0;
  DroneState state;  // docked at the resume position, at rest, active
  Plan suffix_plan;
};

std::vector<ResumedDrone> resume_show(const RecoveryAssignment& assignment,
                                      std::span<const Vacancy> vacancies, double dt,
                                      const KinematicConfig& kin);

}  // namespace skypark

#endif  // SKYPARK_RECOVERY_HPP
