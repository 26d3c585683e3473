#ifndef SKYPARK_HARNESS_HPP
#define SKYPARK_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "skypark/scenario.hpp"

namespace skypark {

struct RunOptions {
  int threads = 1;
  bool timings = false;
  std::optional<std::uint64_t> seed_override;
};

/// Artifacts of one incident beyond the report, for serialization and tests.
struct IncidentArtifacts {
  IncidentReport report;
  FormationPlan formation;
  IncidentZones zones;
  OccupancyField combined;
  std::vector<std::pair<DroneId, std::string>> serialized_graphs;  // id, text
};

/// Full pipeline: play the show to t0, inject the failures, predict, derive
/// zones, evacuate (per the strategy), execute against independently seeded
/// ground-truth falls with cascading, recover, and report. Planner capacity
/// errors land in the report, never as exceptions.
IncidentArtifacts run_incident(const ScenarioSpec& spec, const RunOptions& opts = {},
                               Strategy strategy = Strategy::kPlanner);

/// run_incident under a baseline evacuation policy, same ground-truth seeds.
IncidentArtifacts run_baseline(const ScenarioSpec& spec, Strategy strategy,
                               const RunOptions& opts = {});

struct BatchRow {
  int index = 0;
  std::uint64_t seed = 0;
  int failures = 0;
  Strategy strategy = Strategy::kPlanner;
  Metrics metrics;
  int capacity_errors = 0;
};

struct PairedSignTest {
  int wins = 0;    // planner strictly better (fewer realized hits)
  int losses = 0;  // planner strictly worse
  int ties = 0;
  double p_value = 1.0;  // one-sided exact binomial
};

struct BatchResult {
  std::vector<BatchRow> rows;  // grouped by scenario index, strategy order fixed
  std::map<std::string, double> mean_realized_hits;   // per strategy name
  std::map<std::string, double> stddev_realized_hits;
  std::map<std::string, double> mean_expected_hits;
  std::map<std::string, double> mean_score;
  std::map<std::string, double> mean_fill_ratio;
  std::map<std::string, PairedSignTest> sign_tests;  // planner vs each baseline

  std::string to_csv() const;
  std::string summary_json() const;
};

/// Runs `count` paired scenarios (planner + the baselines) derived from the
/// base spec with per-index seeds and failure counts, one incident per
/// worker, merged deterministically by index.
BatchResult evaluate_batch(const ScenarioSpec& base, int count, std::uint64_t seed,
                           int threads = 1,
                           const std::vector<Strategy>& strategies = {
                               Strategy::kPlanner, Strategy::kHover, Strategy::kStraightToPark});

/// Tabular occupancy export (ix,iy,iz,t,prob), sorted, for external plotting.
void write_occupancy_table(std::ostream& os, const OccupancyField& field);

/// Line-oriented dump of the formation's plans (targets, costs, actions).
void write_plans(std::ostream& os, const FormationPlan& formation, TimeStep t0);

/// One-sided exact binomial tail P(X <= losses) for n = wins + losses fair
/// coin flips; the paired sign test used by evaluate_batch.
double sign_test_p_value(int wins, int losses);

}  // namespace skypark

#endif  // SKYPARK_HARNESS_HPP
