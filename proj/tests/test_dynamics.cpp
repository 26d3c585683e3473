#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "skypark/dynamics.hpp"
#include "skypark/rng.hpp"

using namespace skypark;

namespace {

StageConfig tall_stage() {
  StageConfig cfg;
  cfg.origin = Vec3(0, 0, 0);
  cfg.extent = {20, 20, 40};
  cfg.cell_size = 1.0;
  cfg.t_first = 0;
  cfg.t_last = 400;
  cfg.dt = 0.5;
  return cfg;
}

KinematicConfig default_kin() { return {}; }

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("step: zero action keeps a resting drone in place") {
    DroneState s{0, Vec3(1, 2, 3), Vec3::Zero(), DroneStatus::kActive};
    const DroneState next = step(s, {Vec3::Zero()}, 0.5, default_kin());
    CHECK(next.position == s.position);
    CHECK(next.velocity == Vec3::Zero());
  }

  TEST_CASE("step: unit delta_v over one second shifts by one meter") {
    DroneState s{0, Vec3::Zero(), Vec3::Zero(), DroneStatus::kActive};
    const DroneState next = step(s, {Vec3(1, 0, 0)}, 1.0, {5.0, 4.0, 0.3});
    CHECK(next.position.isApprox(Vec3(1, 0, 0)));
    CHECK(next.velocity.isApprox(Vec3(1, 0, 0)));
  }

  TEST_CASE("step: two constant actions match the closed-form sum") {
    // Semi-implicit Euler: p_k = p_0 + dt * sum_{j<=k} (v_0 + j*dv).
    const Vec3 dv(0.5, -0.25, 0.75);
    const Vec3 v0(0.5, 0.5, 0);
    const double dt = 0.5;
    DroneState s{0, Vec3(1, 1, 1), v0, DroneStatus::kActive};
    DroneState cur = s;
    cur = step(cur, {dv}, dt, default_kin());
    cur = step(cur, {dv}, dt, default_kin());
    const Vec3 expect = s.position + dt * ((v0 + dv) + (v0 + 2 * dv));
    CHECK(cur.position.isApprox(expect, 1e-15));
  }

  TEST_CASE("step rejects infeasible actions") {
    const KinematicConfig kin{5.0, 4.0, 0.3};
    DroneState s{0, Vec3::Zero(), Vec3(4.5, 0, 0), DroneStatus::kActive};
    CHECK_THROWS_AS(step(s, {Vec3(3, 0, 0)}, 0.5, kin), InfeasibleActionError);    // a_max
    CHECK_THROWS_AS(step(s, {Vec3(1.0, 0, 0)}, 0.5, kin), InfeasibleActionError);  // v_max
  }

  TEST_CASE("execute_plan: empty plan yields a single pose") {
    DroneState s{3, Vec3(1, 1, 1), Vec3::Zero(), DroneStatus::kActive};
    const Trajectory traj = execute_plan(s, {}, 7, 0.5, default_kin());
    REQUIRE(traj.poses.size() == 1);
    CHECK(traj.poses[0].t == 7);
    CHECK(traj.poses[0].position == s.position);
  }

  TEST_CASE("execute_plan: hover plan holds position") {
    DroneState s{3, Vec3(2, 2, 2), Vec3::Zero(), DroneStatus::kActive};
    Plan plan;
    for (int k = 0; k < 6; ++k) plan.actions.push_back({Vec3::Zero()});
    const Trajectory traj = execute_plan(s, plan, 0, 0.5, default_kin());
    REQUIRE(traj.poses.size() == 7);
    for (const TimedPose& tp : traj.poses) CHECK(tp.position == s.position);
  }

  TEST_CASE("execute_plan: random feasible plan matches independent re-integration") {
    Rng rng(5);
    const KinematicConfig kin = default_kin();
    const double dt = 0.5;
    for (int trial = 0; trial < 30; ++trial) {
      DroneState s{0, Vec3(5, 5, 5), Vec3::Zero(), DroneStatus::kActive};
      Plan plan;
      Vec3 v = Vec3::Zero();
      for (int k = 0; k < 12; ++k) {
        Vec3 dv(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        if ((v + dv).norm() > kin.v_max) dv = -v * 0.5;
        plan.actions.push_back({dv});
        v += dv;
      }
      const Trajectory traj = execute_plan(s, plan, 0, dt, kin);
      // Independent fold written against the stated update rule.
      Vec3 p = s.position, vel = s.velocity;
      for (int k = 0; k < plan.length(); ++k) {
        vel += plan.actions[k].delta_v;
        p += vel * dt;
      }
      CHECK(traj.poses.back().position.isApprox(p, 1e-14));
    }
  }

  TEST_CASE("execute_plan reports the failing step index") {
    DroneState s{0, Vec3::Zero(), Vec3::Zero(), DroneStatus::kActive};
    Plan plan;
    plan.actions.push_back({Vec3(0.5, 0, 0)});
    plan.actions.push_back({Vec3(40, 0, 0)});
    try {
      execute_plan(s, plan, 0, 0.5, default_kin());
      FAIL("expected InfeasibleActionError");
    } catch (const InfeasibleActionError& e) {
      CHECK(e.step_index == 1);
    }
  }

  TEST_CASE("simulate_failure drop: zero drag and noise follows 1/2*g*t^2") {
    StageConfig cfg = tall_stage();
    FailureMode mode{FailureKind::kDrop, 0.0, 0.0, 1.0, 0.8, Vec3::Zero()};
    const double h = 30.0;
    DroneState s{0, Vec3(10, 10, h), Vec3::Zero(), DroneStatus::kFallen};
    const Trajectory traj = simulate_failure(s, mode, 1, cfg, default_kin(), 0);
    for (const TimedPose& tp : traj.poses) {
      const double t = tp.t * cfg.dt;
      const double expect = h - 0.5 * kGravity * t * t;
      if (expect > 0) CHECK(tp.position.z() == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(traj.poses.back().position.z() == 0.0);
  }

  TEST_CASE("simulate_failure land: one meter per second grounds from 4 m in 8 steps") {
    StageConfig cfg = tall_stage();
    FailureMode mode{FailureKind::kLand, 0.0, 0.0, 1.0, 0.8, Vec3::Zero()};
    DroneState s{0, Vec3(10, 10, 4), Vec3::Zero(), DroneStatus::kFallen};
    const Trajectory traj = simulate_failure(s, mode, 1, cfg, default_kin(), 0);
    CHECK(traj.steps() == 8);
    CHECK(traj.poses.back().position.z() == 0.0);
  }

  TEST_CASE("simulate_failure drop with drag matches fine-step integration within 1e-6 m") {
    StageConfig cfg = tall_stage();
    FailureMode mode{FailureKind::kDrop, 0.0, 0.1, 1.0, 0.8, Vec3::Zero()};
    DroneState s{0, Vec3(10, 10, 35), Vec3(2, -1, 0), DroneStatus::kFallen};
    const Trajectory traj = simulate_failure(s, mode, 1, cfg, default_kin(), 0);
    for (const TimedPose& tp : traj.poses) {
      if (tp.position.z() <= 0.0) break;  // terminal pose is clamped, not integrated
      const Vec3 expect =
          oracles::drop_position_fine(s.position, s.velocity, mode.drag, tp.t * cfg.dt);
      CHECK((tp.position - expect).norm() < 1e-6);
    }
  }

  TEST_CASE("simulate_failure with sigma=0 is deterministic and seed-independent") {
    StageConfig cfg = tall_stage();
    for (const FailureKind kind :
         {FailureKind::kDrop, FailureKind::kLand, FailureKind::kReturnToLaunch}) {
      FailureMode mode{kind, 0.0, 0.1, 1.0, 0.8, Vec3(10, 10, 0)};
      DroneState s{0, Vec3(5, 15, 20), Vec3(1, 0, 0), DroneStatus::kFallen};
      const Trajectory a = simulate_failure(s, mode, 1, cfg, default_kin(), 3);
      const Trajectory b = simulate_failure(s, mode, 999, cfg, default_kin(), 3);
      REQUIRE(a.poses.size() == b.poses.size());
      for (std::size_t i = 0; i < a.poses.size(); ++i)
        CHECK(a.poses[i].position == b.poses[i].position);
    }
  }

  TEST_CASE("failure trajectories descend monotonically once descent begins") {
    StageConfig cfg = tall_stage();
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const FailureKind kind = trial % 2 ? FailureKind::kDrop : FailureKind::kLand;
      FailureMode mode{kind, 0.2, 0.1, 1.0, 0.8, Vec3(10, 10, 0)};
      DroneState s{0, Vec3(rng.uniform(3, 17), rng.uniform(3, 17), rng.uniform(10, 35)),
                   Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), 0), DroneStatus::kFallen};
      const Trajectory traj = simulate_failure(s, mode, trial, cfg, default_kin(), 0);
      bool descending = false;
      for (std::size_t i = 1; i < traj.poses.size(); ++i) {
        const double dz = traj.poses[i].position.z() - traj.poses[i - 1].position.z();
        if (dz < 0) descending = true;
        if (descending) CHECK(dz <= 1e-12);
      }
    }
  }

  TEST_CASE("return_to_launch heads to the pad and grounds there") {
    StageConfig cfg = tall_stage();
    FailureMode mode{FailureKind::kReturnToLaunch, 0.0, 0.1, 1.0, 0.8, Vec3(10, 10, 0)};
    DroneState s{0, Vec3(3, 17, 25), Vec3::Zero(), DroneStatus::kFallen};
    const Trajectory traj = simulate_failure(s, mode, 1, cfg, default_kin(), 0);
    const Vec3 final = traj.poses.back().position;
    CHECK(final.z() == 0.0);
    // Cruise overshoot decays with the lateral damping; it lands near the pad.
    CHECK((final.head<2>() - Vec3(10, 10, 0).head<2>()).norm() < 6.0);
  }

  TEST_CASE("generate_show: a single drone gets a feasible on-stage plan") {
    StageConfig cfg = tall_stage();
    ShowConfig show;
    show.z_min_cell = 6;
    show.z_max_cell = 10;
    const auto drones = generate_show(1, cfg, default_kin(), show, 42);
    REQUIRE(drones.size() == 1);
    const ZoneSet fp = footprint_of_plan(drones[0].plan, drones[0].initial, cfg.t_first, 0.3,
                                         cfg.dt, cfg, default_kin());
    CHECK_FALSE(fp.empty());  // kThrow would have fired if it left the stage
  }

  TEST_CASE("generate_show: two drones never collide") {
    StageConfig cfg = tall_stage();
    ShowConfig show;
    show.z_min_cell = 6;
    show.z_max_cell = 10;
    const auto drones = generate_show(2, cfg, default_kin(), show, 43);
    const ZoneSet a = footprint_of_plan(drones[0].plan, drones[0].initial, cfg.t_first, 0.3,
                                        cfg.dt, cfg, default_kin());
    const ZoneSet b = footprint_of_plan(drones[1].plan, drones[1].initial, cfg.t_first, 0.3,
                                        cfg.dt, cfg, default_kin());
    CHECK_FALSE(plans_collide(a, b));
  }

  TEST_CASE("generate_show: all 1225 pairs of a 50-drone show are collision-free") {
    StageConfig cfg;
    cfg.extent = {30, 30, 12};
    cfg.t_last = 120;
    ShowConfig show;
    const auto drones = generate_show(50, cfg, default_kin(), show, 44);
    std::vector<ZoneSet> fps;
    for (const ShowDrone& d : drones)
      fps.push_back(
          footprint_of_plan(d.plan, d.initial, cfg.t_first, 0.3, cfg.dt, cfg, default_kin()));
    int colliding = 0;
    for (std::size_t i = 0; i < fps.size(); ++i)
      for (std::size_t j = i + 1; j < fps.size(); ++j)
        if (plans_collide(fps[i], fps[j])) ++colliding;
    CHECK(colliding == 0);
  }

  TEST_CASE("generate_show rejects a stage that cannot hold the fleet") {
    StageConfig cfg;
    cfg.extent = {6, 6, 12};
    cfg.t_last = 40;
    ShowConfig show;
    CHECK_THROWS_AS(generate_show(50, cfg, default_kin(), show, 1), SpecError);
  }

  TEST_CASE("plan_from_positions reproduces its waypoints on execution") {
    const double dt = 0.5;
    Rng rng(7);
    DroneState s{0, Vec3(4.5, 4.5, 4.5), Vec3::Zero(), DroneStatus::kActive};
    std::vector<Vec3> wps;
    Vec3 p = s.position;
    for (int k = 0; k < 10; ++k) {
      p += Vec3(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9));
      wps.push_back(p);
    }
    const Plan plan = plan_from_positions(s, wps, dt, default_kin());
    const Trajectory traj = execute_plan(s, plan, 0, dt, default_kin());
    for (std::size_t k = 0; k < wps.size(); ++k)
      CHECK((traj.poses[k + 1].position - wps[k]).norm() < 1e-12);
  }
}
