#ifndef SKYPARK_SCENARIO_HPP
#define SKYPARK_SCENARIO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skypark/dynamics.hpp"
#include "skypark/grid.hpp"
#include "skypark/occupancy.hpp"
#include "skypark/planner.hpp"
#include "skypark/predictor.hpp"
#include "skypark/types.hpp"

namespace skypark {

inline constexpr int kSchemaVersion = 1;

/// Failure injection: which drones fail at t0 and how. With an empty id list
/// `count` drones are drawn from the fleet; with kind unset every failing
/// drone samples its true mode from the prior (the predictor never sees it).
struct FailureInjection {
  TimeStep t0 = 0;
  std::vector<DroneId> ids;
  int count = 0;
  std::optional<FailureKind> forced_kind;
};

/// One drone spelled out explicitly instead of generated choreography.
struct ExplicitDrone {
  DroneId id = 0;
  Vec3 position = Vec3::Zero();
  std::vector<Vec3> actions;  // delta-v per step
};

struct EvaluationConfig {
  int holdout_samples = 200;  // held-out ground-truth draws per incident
};

/// Complete scenario: stage, fleet, failure injection, predictor and planner
/// settings, and the master seed every stream derives from.
struct ScenarioSpec {
  int schema_version = kSchemaVersion;
  std::uint64_t master_seed = 1;
  std::optional<std::uint64_t> ground_truth_seed;  // defaults to a stream off master_seed

  StageConfig stage;
  KinematicConfig kinematics;

  // Fleet: either generated choreography or explicit drones.
  int n_drones = 50;
  ShowConfig show;
  std::vector<ExplicitDrone> explicit_drones;  // non-empty overrides the generator
  std::vector<Vec3> spare_positions;           // pre-placed hidden drones

  FailureInjection failure;
  PredictorConfig predictor;
  PlannerConfig planner;
  ParkingBand parking;
  std::map<DroneId, double> alpha_overrides;
  EvaluationConfig evaluation;

  void validate() const;  // throws SpecError

  static ScenarioSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

/// A ready-to-run default scenario (lattice show, uniform failure prior).
ScenarioSpec make_default_scenario(int n_drones = 50, int failure_count = 5,
                                   std::uint64_t seed = 1);

enum class Strategy { kPlanner, kHover, kStraightToPark, kIgnore };

const char* to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);  // throws SpecError

enum class TerminalStatus {
  kActive,         // flew its assigned plan to the end
  kFallenInjected, // failed at t0
  kFallenCascade,  // struck by a falling drone
  kParkedHidden,   // evacuated or spare, still dark at the end
  kRecoveredActive // hidden drone that filled a vacancy
};

const char* to_string(TerminalStatus status);

struct DroneOutcome {
  DroneId id = 0;
  TerminalStatus terminal = TerminalStatus::kActive;
  bool evacuated = false;
  bool hit = false;
  TimeStep hit_time = -1;
  double psafe = -1.0;  // evacuation plan quality, -1 when not evacuated
  double cstar = -1.0;
  DroneId filled_slot = -1;  // vacancy this drone recovered, -1 otherwise
};

struct Metrics {
  double expected_hits = 0.0;  // Monte-Carlo over held-out fall samples
  int realized_hits = 0;
  int cascade_hits = 0;  // hits caused by drones that were not injected
  double score = 0.0;    // formation score of the evacuation
  double recovery_fill_ratio = 1.0;
  int collisions = 0;  // ground-truth footprint intersections, all pairs
};

struct IncidentReport {
  int schema_version = kSchemaVersion;
  Strategy strategy = Strategy::kPlanner;
  std::uint64_t master_seed = 0;
  TimeStep t0 = 0;
  TimeStep t_end = 0;
  TimeStep t_resume = 0;
  std::vector<DroneId> injected;
  std::vector<DroneId> evacuees;
  std::vector<DroneOutcome> outcomes;  // sorted by id, one per drone
  std::vector<std::pair<DroneId, std::string>> capacity_errors;
  int vacancies = 0;
  int vacancies_filled = 0;
  Metrics metrics;
  bool timings_enabled = false;
  double wall_seconds = 0.0;  // serialized only when timings_enabled

  std::string to_json_text() const;
};

}  // namespace skypark

#endif  // SKYPARK_SCENARIO_HPP
