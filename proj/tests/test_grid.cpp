#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "skypark/grid.hpp"
#include "skypark/rng.hpp"

using namespace skypark;

namespace {

StageConfig small_stage() {
  StageConfig cfg;
  cfg.origin = Vec3(0, 0, 0);
  cfg.extent = {6, 6, 6};
  cfg.cell_size = 1.0;
  cfg.t_first = 0;
  cfg.t_last = 40;
  cfg.dt = 0.5;
  return cfg;
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("cell_of_point maps the origin to the first cell") {
    const StageConfig cfg = small_stage();
    const auto c = cell_of_point(cfg.origin, cfg);
    REQUIRE(c.has_value());
    CHECK(*c == GridCell{0, 0, 0});
  }

  TEST_CASE("cell_of_point boxes are half-open") {
    const StageConfig cfg = small_stage();
    const auto c = cell_of_point(cfg.origin + Vec3(cfg.cell_size, 0, 0), cfg);
    REQUIRE(c.has_value());
    CHECK(*c == GridCell{1, 0, 0});
  }

  TEST_CASE("cell_of_point returns the outside marker below the stage") {
    const StageConfig cfg = small_stage();
    CHECK_FALSE(cell_of_point(cfg.origin - Vec3(1e-9, 0, 0), cfg).has_value());
    CHECK_FALSE(cell_of_point(cfg.max_corner(), cfg).has_value());
  }

  TEST_CASE("cell_of_point round-trips random interior points") {
    const StageConfig cfg = small_stage();
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
      const Vec3 p(rng.uniform(0.0, 6.0), rng.uniform(0.0, 6.0), rng.uniform(0.0, 6.0));
      const auto c = cell_of_point(p, cfg);
      REQUIRE(c.has_value());
      const Vec3 lo = cell_min_corner(*c, cfg);
      for (int a = 0; a < 3; ++a) {
        CHECK(p[a] >= lo[a]);
        CHECK(p[a] < lo[a] + cfg.cell_size);
      }
    }
  }

  TEST_CASE("footprint_of_pose: strictly interior ball covers one tile") {
    const StageConfig cfg = small_stage();
    const ZoneSet fp = footprint_of_pose(Vec3(2.5, 2.5, 2.5), 0.3, 7, cfg);
    CHECK(fp.size() == 1);
    CHECK(fp.contains({{2, 2, 2}, 7}));
  }

  TEST_CASE("footprint_of_pose: center on a shared face covers two tiles") {
    const StageConfig cfg = small_stage();
    const ZoneSet fp = footprint_of_pose(Vec3(3.0, 2.5, 2.5), 0.2, 0, cfg);
    CHECK(fp.size() == 2);
    CHECK(fp.contains({{2, 2, 2}, 0}));
    CHECK(fp.contains({{3, 2, 2}, 0}));
  }

  TEST_CASE("footprint_of_pose: interior corner covers eight tiles") {
    const StageConfig cfg = small_stage();
    const Vec3 corner(3.0, 3.0, 3.0);
    const ZoneSet fp = footprint_of_pose(corner, 0.25, 3, cfg);
    const auto expect = oracles::ball_cells_brute_force(corner, 0.25, cfg);
    CHECK(expect.size() == 8);
    CHECK(fp.size() == expect.size());
    for (const GridCell& c : expect) CHECK(fp.contains({c, 3}));
  }

  TEST_CASE("footprint_of_pose matches the brute-force scan on random balls") {
    const StageConfig cfg = small_stage();
    Rng rng(23);
    for (int i = 0; i < 200; ++i) {
      const Vec3 p(rng.uniform(0.4, 5.6), rng.uniform(0.4, 5.6), rng.uniform(0.4, 5.6));
      const double r = rng.uniform(0.05, 0.8);
      const ZoneSet fp = footprint_of_pose(p, r, 1, cfg);
      const auto expect = oracles::ball_cells_brute_force(p, r, cfg);
      REQUIRE(fp.size() == expect.size());
      for (const GridCell& c : expect) CHECK(fp.contains({c, 1}));
    }
  }

  TEST_CASE("footprint_of_pose is monotone in the radius") {
    const StageConfig cfg = small_stage();
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
      const Vec3 p(rng.uniform(0.5, 5.5), rng.uniform(0.5, 5.5), rng.uniform(0.5, 5.5));
      const double r1 = rng.uniform(0.05, 0.5);
      const double r2 = r1 + rng.uniform(0.0, 0.5);
      const ZoneSet small = footprint_of_pose(p, r1, 0, cfg);
      const ZoneSet large = footprint_of_pose(p, r2, 0, cfg);
      for (const Tile& t : small) CHECK(large.contains(t));
    }
  }

  TEST_CASE("footprint_of_pose rejects a ball fully off-stage") {
    const StageConfig cfg = small_stage();
    CHECK_THROWS_AS(footprint_of_pose(Vec3(-5, -5, -5), 0.3, 0, cfg), OffStageError);
  }

  TEST_CASE("footprint_of_path: single pose equals footprint_of_pose") {
    const StageConfig cfg = small_stage();
    const std::vector<TimedPose> path = {{4, Vec3(1.5, 1.5, 1.5)}};
    CHECK(footprint_of_path(path, 0.3, cfg) == footprint_of_pose(Vec3(1.5, 1.5, 1.5), 0.3, 4, cfg));
  }

  TEST_CASE("footprint_of_path: hover replicates one cell across consecutive times") {
    const StageConfig cfg = small_stage();
    std::vector<TimedPose> path;
    for (int k = 0; k <= 5; ++k) path.push_back({10 + k, Vec3(2.5, 2.5, 2.5)});
    const ZoneSet fp = footprint_of_path(path, 0.3, cfg);
    CHECK(fp.size() == 6);
    for (int k = 0; k <= 5; ++k) CHECK(fp.contains({{2, 2, 2}, 10 + k}));
  }

  TEST_CASE("footprint_of_path: straight sweep matches dense sampling") {
    const StageConfig cfg = small_stage();
    std::vector<TimedPose> path;
    for (int k = 0; k <= 3; ++k) path.push_back({k, Vec3(0.5 + k, 2.5, 2.5)});
    const ZoneSet fp = footprint_of_path(path, 0.3, cfg);
    CHECK(oracles::to_set(fp) == oracles::swept_tiles_dense(path, 0.3, cfg));
  }

  TEST_CASE("footprint_of_path sweeps are contained in the refined dense sweep") {
    const StageConfig cfg = small_stage();
    Rng rng(47);
    for (int i = 0; i < 40; ++i) {
      std::vector<TimedPose> path;
      Vec3 p(rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0));
      for (int k = 0; k <= 4; ++k) {
        path.push_back({k, p});
        Vec3 step(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9));
        p = (p + step).cwiseMax(Vec3(0.5, 0.5, 0.5)).cwiseMin(Vec3(5.5, 5.5, 5.5));
      }
      const auto dense = oracles::swept_tiles_dense(path, 0.3, cfg);
      const ZoneSet fp = footprint_of_path(path, 0.3, cfg);
      for (const Tile& t : fp) CHECK(dense.count(t) == 1);
      // Every integer-time pose ball must be present regardless of sampling.
      for (const TimedPose& tp : path)
        for (const GridCell& c : oracles::ball_cells_brute_force(tp.position, 0.3, cfg))
          CHECK(fp.contains({c, tp.t}));
    }
  }

  TEST_CASE("footprint_of_path equals the union of per-step footprints") {
    const StageConfig cfg = small_stage();
    Rng rng(53);
    for (int i = 0; i < 40; ++i) {
      std::vector<TimedPose> path;
      Vec3 p(rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0));
      for (int k = 0; k <= 5; ++k) {
        path.push_back({k, p});
        p = (p + Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)))
                .cwiseMax(Vec3(0.5, 0.5, 0.5))
                .cwiseMin(Vec3(5.5, 5.5, 5.5));
      }
      ZoneSet unioned;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const std::vector<TimedPose> step = {path[k], path[k + 1]};
        unioned.merge(footprint_of_path(step, 0.3, cfg));
      }
      CHECK(unioned == footprint_of_path(path, 0.3, cfg));
    }
  }

  TEST_CASE("plans_collide on the stated examples") {
    const StageConfig cfg = small_stage();
    const ZoneSet a = footprint_of_pose(Vec3(2.5, 2.5, 2.5), 0.3, 5, cfg);
    SUBCASE("identical nonempty sets collide") { CHECK(plans_collide(a, a)); }
    SUBCASE("same cells at disjoint times do not collide") {
      const ZoneSet b = footprint_of_pose(Vec3(2.5, 2.5, 2.5), 0.3, 6, cfg);
      CHECK_FALSE(plans_collide(a, b));
    }
    SUBCASE("adjacent cells at the same time do not collide") {
      const ZoneSet b = footprint_of_pose(Vec3(3.5, 2.5, 2.5), 0.3, 5, cfg);
      CHECK_FALSE(plans_collide(a, b));
    }
  }

  TEST_CASE("plans_collide is symmetric and equals the naive double loop") {
    const StageConfig cfg = small_stage();
    Rng rng(61);
    for (int i = 0; i < 50; ++i) {
      ZoneSet a, b;
      for (int k = 0; k < 12; ++k) {
        a.insert({{static_cast<int>(rng.uniform_int(6)), static_cast<int>(rng.uniform_int(6)),
                   static_cast<int>(rng.uniform_int(6))},
                  static_cast<TimeStep>(rng.uniform_int(6))});
        b.insert({{static_cast<int>(rng.uniform_int(6)), static_cast<int>(rng.uniform_int(6)),
                   static_cast<int>(rng.uniform_int(6))},
                  static_cast<TimeStep>(rng.uniform_int(6))});
      }
      bool naive = false;
      for (const Tile& ta : a)
        for (const Tile& tb : b)
          if (ta == tb) naive = true;
      CHECK(plans_collide(a, b) == naive);
      CHECK(plans_collide(a, b) == plans_collide(b, a));
    }
  }
}
