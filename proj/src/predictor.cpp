#include "skypark/predictor.hpp"

#include <cmath>

#include "skypark/rng.hpp"

namespace skypark {

void PoseHistory::validate() const {
  if (poses.size() < 2) throw SpecError("pose history too short: need at least 2 poses");
  for (std::size_t k = 0; k + 1 < poses.size(); ++k)
    if (poses[k + 1].t != poses[k].t + 1)
      throw SpecError("pose history must cover consecutive time steps");
}

void ModePrior::validate() const {
  if (drop < 0 || land < 0 || return_to_launch < 0)
    throw SpecError("mode prior: weights must be >= 0");
  if (drop + land + return_to_launch <= 0)
    throw SpecError("mode prior: weights must not all be zero");
}

const FailureMode& PredictorConfig::params_for(FailureKind kind) const {
  switch (kind) {
    case FailureKind::kDrop: return drop_params;
    case FailureKind::kLand: return land_params;
    case FailureKind::kReturnToLaunch: return rtl_params;
  }
  return drop_params;
}

void PredictorConfig::validate() const {
  if (history_len < 2) throw SpecError("predictor: history_len must be >= 2");
  if (rollouts < 1) throw SpecError("predictor: rollouts must be >= 1");
  prior.validate();
  drop_params.validate();
  land_params.validate();
  rtl_params.validate();
}

std::pair<Vec3, Vec3> estimate_state(const PoseHistory& history, double dt, bool least_squares) {
  history.validate();
  const auto& poses = history.poses;
  const Vec3 position = poses.back().position;
  if (!least_squares || poses.size() == 2) {
    const Vec3 velocity = (poses.back().position - poses[poses.size() - 2].position) / dt;
    return {position, velocity};
  }
  // Least-squares slope of position against time over the full history.
  const std::size_t n = poses.size();
  double mean_t = 0.0;
  Vec3 mean_p = Vec3::Zero();
  for (const auto& tp : poses) {
    mean_t += tp.t;
    mean_p += tp.position;
  }
  mean_t /= static_cast<double>(n);
  mean_p /= static_cast<double>(n);
  double stt = 0.0;
  Vec3 stp = Vec3::Zero();
  for (const auto& tp : poses) {
    const double d = tp.t - mean_t;
    stt += d * d;
    stp += d * (tp.position - mean_p);
  }
  return {position, stp / (stt * dt)};
}

FailureKind sample_mode(const ModePrior& prior, double u) {
  const double total = prior.drop + prior.land + prior.return_to_launch;
  const double x = u * total;
  if (x < prior.drop) return FailureKind::kDrop;
  if (x < prior.drop + prior.land) return FailureKind::kLand;
  return FailureKind::kReturnToLaunch;
}

RolloutSet predict_rollouts(const PoseHistory& history, int n, std::uint64_t seed,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            const PredictorConfig& pcfg) {
  if (n < 1) throw SpecError("predict_rollouts: need at least one rollout");
  const auto [position, velocity] = estimate_state(history, cfg.dt, pcfg.least_squares_velocity);
  const TimeStep t0 = history.t0();

  RolloutSet out;
  out.t0 = t0;
  out.trajectories.resize(n);
  DroneState start{history.id, position, velocity, DroneStatus::kFallen};
  for (int i = 0; i < n; ++i) {
    // One derived stream per rollout: pooling draws across seeds stays i.i.d.
    Rng pick(derive_seed(seed, static_cast<std::uint64_t>(i), 0));
    const FailureKind kind = sample_mode(pcfg.prior, pick.uniform());
    out.trajectories[i] =
        simulate_failure(start, pcfg.params_for(kind),
                         derive_seed(seed, static_cast<std::uint64_t>(i), 1), cfg, kin, t0);
  }
  return out;
}

}  // namespace skypark
