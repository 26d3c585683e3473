#ifndef SKYPARK_PREDICTOR_HPP
#define SKYPARK_PREDICTOR_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "skypark/dynamics.hpp"
#include "skypark/grid.hpp"
#include "skypark/types.hpp"

namespace skypark {

/// Observed poses of one drone over consecutive steps ending at the incident
/// time t0. At least two poses are needed to estimate velocity.
struct PoseHistory {
  DroneId id = 0;
  std::vector<TimedPose> poses;

  TimeStep t0() const { return poses.back().t; }
  void validate() const;  // throws SpecError on gaps or length < 2
};

/// N sampled futures of one failing drone, all starting at t0.
struct RolloutSet {
  std::vector<Trajectory> trajectories;
  TimeStep t0 = 0;

  int count() const { return static_cast<int>(trajectories.size()); }
};

struct ModePrior {
  double drop = 1.0 / 3.0;
  double land = 1.0 / 3.0;
  double return_to_launch = 1.0 / 3.0;

  void validate() const;  // weights nonnegative, sum positive
};

/// Rollout-ensemble predictor settings. The ensemble stands in for a learned
/// trajectory model behind the same interface: history in, N sampled
/// trajectories out. Downstream occupancy estimation only consumes that
/// contract, so a learned model can replace it without touching callers.
struct PredictorConfig {
  int history_len = 8;
  int rollouts = 1000;
  bool least_squares_velocity = false;  // fit over the full history instead of
                                        // the last backward difference
  ModePrior prior;
  FailureMode drop_params{.kind = FailureKind::kDrop};
  FailureMode land_params{.kind = FailureKind::kLand};
  FailureMode rtl_params{.kind = FailureKind::kReturnToLaunch};

  const FailureMode& params_for(FailureKind kind) const;
  void validate() const;
};

/// (position, velocity) at t0. Velocity is the backward difference of the
/// last two poses, or the least-squares slope over the whole history.
std::pair<Vec3, Vec3> estimate_state(const PoseHistory& history, double dt,
                                     bool least_squares = false);

/// Samples a failure mode index from the prior; exposed for tests.
FailureKind sample_mode(const ModePrior& prior, double u);

/// N independent rollouts of the failing drone from its estimated state.
/// Rollout i draws everything from a seed derived from (seed, i), so the
/// call is deterministic, parallelizable, and poolable across seeds.
RolloutSet predict_rollouts(const PoseHistory& history, int n, std::uint64_t seed,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            const PredictorConfig& pcfg);

}  // namespace skypark

#endif  // SKYPARK_PREDICTOR_HPP
