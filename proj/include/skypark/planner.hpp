#ifndef SKYPARK_PLANNER_HPP
#define SKYPARK_PLANNER_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skypark/dynamics.hpp"
#include "skypark/grid.hpp"
#include "skypark/occupancy.hpp"
#include "skypark/types.hpp"

namespace skypark {

struct PlanVertex {
  Vec3 position = Vec3::Zero();
  TimeStep t = 0;
  // Vertices reached faster than the planning speed cap (the root right
  // after a failure, forced braking steps) cannot take arbitrary out-edges.
  bool expandable = true;
};

struct PlanEdge {
  int from = 0;
  int to = 0;
  Vec3 velocity = Vec3::Zero();  // commanded velocity over the step
  double weight = 0.0;           // -log Psafe of the swept tiles, >= 0
};

/// Space-time DAG grown by RRT plus cross-layer densification. Every edge
/// advances time by exactly one step; vertex 0 is the drone's state at t0.
///
/// Edges are kinematically closed under composition: every commanded
/// velocity (past the forced braking prefix) satisfies |v| <= min(v_max,
/// a_max*dt/2), so any two consecutive edges respect the acceleration limit
/// regardless of the path taken. That is what makes the graph a genuine DAG
/// over positions without tracking velocity per path.
class PlanGraph {
 public:
  DroneId drone = 0;
  Vec3 root_velocity = Vec3::Zero();  // velocity at t0, before braking

  int add_vertex(const PlanVertex& v);
  int add_edge(const PlanEdge& e);  // returns edge index

  const std::vector<PlanVertex>& vertices() const { return vertices_; }
  const std::vector<PlanEdge>& edges() const { return edges_; }
  std::span<const int> out_edges(int vertex) const { return out_[vertex]; }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }

  /// Line-oriented dump (v id,x,y,z,t / e from,to,weight,vx,vy,vz);
  /// byte-stable for determinism checks.
  void serialize(std::ostream& os) const;

 private:
  std::vector<PlanVertex> vertices_;
  std::vector<PlanEdge> edges_;
  std::vector<std::vector<int>> out_;
};

struct PlannerConfig {
  int vertex_budget = 3000;
  double goal_bias = 0.3;      // probability of sampling inside the parking space
  int k_nearest = 5;           // cross-layer densification degree
  int park_vertex_target = 0;  // optional early stop once this many vertices can
                               // park; 0 grows to the full budget
  int iteration_factor = 20;   // max RRT iterations = factor * budget
  double alpha_default = 1.0;  // per-drone weight in the formation score

  void validate() const;
  double speed_cap(const KinematicConfig& kin, double dt) const {
    return std::min(kin.v_max, 0.5 * kin.a_max * dt);
  }
};

/// Solo evacuation result for one drone: the plan spans exactly [t0, t_end]
/// (braking prefix, path to the parking vertex, hover padding) and
/// psafe = exp(-cost) equals the tile product of the swept footprint.
struct EvacuationPlan {
  DroneId id = 0;
  Plan plan;
  Vec3 target = Vec3::Zero();  // parking position p*
  double cost = 0.0;           // C*
  double psafe = 1.0;
  ZoneSet footprint;           // all swept tiles of the plan, [t0, t_end]
};

struct FormationPlan {
  std::map<DroneId, EvacuationPlan> plans;
  double score = 0.0;  // sum over drones of alpha_i * psafe_i
  std::vector<std::pair<DroneId, std::string>> failures;  // capacity errors

  bool complete() const { return failures.empty(); }
};

struct EvacueeCandidate {
  DroneState state;                     // at t0
  std::vector<TimedPose> remaining_path;  // assigned positions from t0 onward
};

/// Drones whose footprint at t0, or whose remaining assigned path, touches
/// the hit zone. Returned sorted by id.
std::vector<DroneId> select_evacuees(std::span<const EvacueeCandidate> candidates,
                                     const ZoneSet& hit, double radius, const StageConfig& cfg);

/// -log Psafe of an action's swept tiles, or nullopt when some tile has
/// Pr = 1 (the edge must be rejected, log 0 is undefined).
std::optional<double> edge_weight(const ZoneSet& swept, const OccupancyField& combined);

/// Grows the space-time graph for one drone from its state at t0: forced
/// braking prefix down to the planning speed cap, RRT growth goal-biased
/// toward the parking space, then cross edges between k-nearest vertices of
/// consecutive layers. Tiles in `reserved` behave like Pr = 1. Layers stop
/// at zones.t_end. Deterministic for a fixed seed.
PlanGraph grow_graph(const DroneState& state, const IncidentZones& zones,
                     const OccupancyField& combined, const StageConfig& cfg,
                     const KinematicConfig& kin, const PlannerConfig& pcfg, std::uint64_t seed,
                     int budget, const ZoneSet* reserved = nullptr);

struct ShortestPaths {
  std::vector<double> cost;      // from root; +inf when unreachable
  std::vector<int> parent_edge;  // edge index into graph.edges(), -1 at root
};

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Exact single-source shortest paths by topological (time-layer) order
/// relaxation. Ties resolve to the predecessor with the smaller insertion
/// index because vertices are relaxed in (t, index) order and only strict
/// improvements overwrite.
ShortestPaths shortest_paths(const PlanGraph& graph);

/// Picks the cheapest reachable vertex whose footprint parks entirely inside
/// zones.parking (ties by insertion index), appends hover actions to
/// zones.t_end, and assembles the action sequence. Throws CapacityError when
/// no admissible parking vertex exists.
EvacuationPlan extract_plan(const PlanGraph& graph, const ShortestPaths& sp,
                            const IncidentZones& zones, const OccupancyField& combined,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            const ZoneSet* reserved = nullptr);

/// Prioritized planning for all evacuees: solo plans first (in parallel),
/// then riskiest-first replanning against a shared reservation table built
/// from earlier drones' footprints. Solo plans that touch no reservation are
/// kept unchanged. `base_reserved` carries tiles occupied by drones outside
/// the evacuee set (the ongoing show) so evacuation cannot cut through them.
FormationPlan assemble_formation(std::span<const DroneState> evacuees,
                                 const IncidentZones& zones, const OccupancyField& combined,
                                 const std::map<DroneId, double>& alphas,
                                 const StageConfig& cfg, const KinematicConfig& kin,
                                 const PlannerConfig& pcfg, std::uint64_t seed,
                                 const ZoneSet& base_reserved, int threads = 1);

}  // namespace skypark

#endif  // SKYPARK_PLANNER_HPP
