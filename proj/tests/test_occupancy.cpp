#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "skypark/occupancy.hpp"
#include "skypark/rng.hpp"

using namespace skypark;

namespace {

StageConfig stage() {
  StageConfig cfg;
  cfg.extent = {20, 20, 40};
  cfg.t_last = 400;
  return cfg;
}

Trajectory line(TimeStep t0, const Vec3& start, const Vec3& per_step, int steps) {
  Trajectory traj;
  for (int k = 0; k <= steps; ++k)
    traj.poses.push_back({t0 + k, start + per_step * static_cast<double>(k)});
  return traj;
}

OccupancyField field_of(std::initializer_list<std::pair<Tile, double>> entries) {
  OccupancyField f;
  for (const auto& [tile, p] : entries) f.set(tile, p);
  return f;
}

}  // namespace

TEST_SUITE("occupancy") {
  TEST_CASE("estimate_occupancy: identical rollouts give a 0/1 field on the footprint") {
    const StageConfig cfg = stage();
    RolloutSet rolls;
    rolls.t0 = 10;
    for (int i = 0; i < 25; ++i) rolls.trajectories.push_back(line(10, Vec3(5.5, 5.5, 20.5), Vec3(0, 0, -2), 10));
    const OccupancyField f = estimate_occupancy(rolls, 0.3, cfg);
    const ZoneSet fp = footprint_of_path(rolls.trajectories[0].poses, 0.3, cfg, OffStagePolicy::kClip);
    CHECK(f.support_size() == fp.size());
    for (const Tile& t : fp) CHECK(f.get(t) == 1.0);
  }

  TEST_CASE("estimate_occupancy: a tile touched by one of four rollouts gets 0.25") {
    const StageConfig cfg = stage();
    RolloutSet rolls;
    rolls.t0 = 0;
    rolls.trajectories.push_back(line(0, Vec3(2.5, 2.5, 10.5), Vec3::Zero(), 2));
    for (int i = 0; i < 3; ++i)
      rolls.trajectories.push_back(line(0, Vec3(8.5, 8.5, 10.5), Vec3::Zero(), 2));
    const OccupancyField f = estimate_occupancy(rolls, 0.3, cfg);
    CHECK(f.get({{2, 2, 10}, 1}) == 0.25);
    CHECK(f.get({{8, 8, 10}, 1}) == 0.75);
  }

  TEST_CASE("estimate_occupancy values are multiples of 1/N") {
    const StageConfig cfg = stage();
    Rng rng(3);
    RolloutSet rolls;
    rolls.t0 = 5;
    const int n = 16;
    for (int i = 0; i < n; ++i)
      rolls.trajectories.push_back(line(
          5, Vec3(rng.uniform(4, 16), rng.uniform(4, 16), 30.5), Vec3(0, 0, -2.0), 14));
    const OccupancyField f = estimate_occupancy(rolls, 0.3, cfg);
    for (const auto& [tile, p] : f) {
      const double scaled = p * n;
      CHECK(std::abs(scaled - std::round(scaled)) < 1e-12);
      CHECK(p > 0.0);
      CHECK(p <= 1.0);
    }
  }

  TEST_CASE("estimate_occupancy: adding a rollout never lowers a tile count") {
    const StageConfig cfg = stage();
    Rng rng(13);
    RolloutSet rolls;
    rolls.t0 = 5;
    for (int i = 0; i < 10; ++i)
      rolls.trajectories.push_back(
          line(5, Vec3(rng.uniform(4, 16), rng.uniform(4, 16), 25.5), Vec3(0, 0, -2.5), 10));
    const OccupancyField before = estimate_occupancy(rolls, 0.3, cfg);
    rolls.trajectories.push_back(line(5, Vec3(10.5, 10.5, 25.5), Vec3(0, 0, -2.5), 10));
    const OccupancyField after = estimate_occupancy(rolls, 0.3, cfg);
    for (const auto& [tile, p] : before) CHECK(after.get(tile) * 11 >= p * 10 - 1e-12);
  }

  TEST_CASE("estimate_occupancy pins prior tiles to one") {
    const StageConfig cfg = stage();
    RolloutSet rolls;
    rolls.t0 = 8;
    rolls.trajectories.push_back(line(8, Vec3(5.5, 5.5, 20.5), Vec3(0, 0, -2), 9));
    ZoneSet prior;
    prior.insert({{5, 5, 20}, 6});
    prior.insert({{5, 5, 20}, 7});
    const OccupancyField f = estimate_occupancy(rolls, 0.3, cfg, prior);
    CHECK(f.get({{5, 5, 20}, 6}) == 1.0);
    CHECK(f.get({{5, 5, 20}, 7}) == 1.0);
  }

  TEST_CASE("fall_zone is the support of the field") {
    SUBCASE("empty field, empty zone") { CHECK(fall_zone(OccupancyField{}).empty()); }
    SUBCASE("k positive tiles, zone of size k") {
      const OccupancyField f = field_of({{{{1, 2, 3}, 4}, 0.5},
                                         {{{2, 2, 3}, 4}, 0.25},
                                         {{{3, 2, 3}, 5}, 1.0}});
      CHECK(fall_zone(f).size() == 3);
    }
    SUBCASE("deterministic drop: zone equals the trajectory footprint") {
      const StageConfig cfg = stage();
      RolloutSet rolls;
      rolls.t0 = 0;
      rolls.trajectories.push_back(line(0, Vec3(5.5, 5.5, 30.5), Vec3(0, 0, -2.5), 12));
      const OccupancyField f = estimate_occupancy(rolls, 0.3, cfg);
      CHECK(fall_zone(f) ==
            footprint_of_path(rolls.trajectories[0].poses, 0.3, cfg, OffStagePolicy::kClip));
    }
  }

  TEST_CASE("incident_end_time takes the latest positive tile across drones") {
    SUBCASE("single drone") {
      const OccupancyField f = field_of({{{{1, 1, 1}, 12}, 0.5}, {{{1, 1, 1}, 3}, 0.5}});
      CHECK(incident_end_time({&f, 1}) == 12);
    }
    SUBCASE("two drones ending at 10 and 14") {
      const OccupancyField a = field_of({{{{1, 1, 1}, 10}, 0.1}});
      const OccupancyField b = field_of({{{{2, 2, 2}, 14}, 0.1}});
      const OccupancyField fields[2] = {a, b};
      CHECK(incident_end_time(fields) == 14);
    }
    SUBCASE("random ensemble equals a full scan") {
      Rng rng(19);
      std::vector<OccupancyField> fields(4);
      TimeStep latest = 0;
      for (OccupancyField& f : fields)
        for (int k = 0; k < 50; ++k) {
          const Tile tile{{static_cast<int>(rng.uniform_int(10)),
                           static_cast<int>(rng.uniform_int(10)),
                           static_cast<int>(rng.uniform_int(10))},
                          static_cast<TimeStep>(rng.uniform_int(200))};
          f.set(tile, rng.uniform(0.01, 1.0));
          latest = std::max(latest, tile.t);
        }
      CHECK(incident_end_time(fields) == latest);
    }
    SUBCASE("all-empty is an error") {
      const OccupancyField f;
      CHECK_THROWS_AS(incident_end_time({&f, 1}), SpecError);
    }
  }

  TEST_CASE("hit_zone is the union of fall zones") {
    const OccupancyField a = field_of({{{{1, 1, 1}, 1}, 0.5}, {{{2, 1, 1}, 1}, 0.5}});
    const OccupancyField b = field_of({{{{5, 5, 5}, 2}, 0.5}});
    SUBCASE("single drone") {
      CHECK(hit_zone({&a, 1}) == fall_zone(a));
    }
    SUBCASE("disjoint zones add") {
      const OccupancyField fields[2] = {a, b};
      CHECK(hit_zone(fields).size() == 3);
    }
    SUBCASE("overlapping zones match the naive union") {
      const OccupancyField c = field_of({{{{1, 1, 1}, 1}, 0.25}, {{{9, 9, 9}, 3}, 0.25}});
      const OccupancyField fields[2] = {a, c};
      ZoneSet naive = fall_zone(a);
      naive.merge(fall_zone(c));
      CHECK(hit_zone(fields) == naive);
    }
  }

  TEST_CASE("parking_space windows and bands") {
    const StageConfig cfg = stage();
    const ParkingBand band{1, 4};
    const int band_cells = cfg.extent[0] * cfg.extent[1] * 4;
    SUBCASE("empty hit zone admits the whole band") {
      CHECK(parking_space({}, cfg, 10, 20, band).size() ==
            static_cast<std::size_t>(band_cells));
    }
    SUBCASE("a column fully covered in the window is excluded") {
      ZoneSet hit;
      for (TimeStep t = 10; t <= 20; ++t) hit.insert({{3, 3, 2}, t});
      const CellSet park = parking_space(hit, cfg, 10, 20, band);
      CHECK_FALSE(park.contains({3, 3, 2}));
      CHECK(park.contains({3, 3, 3}));
      CHECK(park.size() == static_cast<std::size_t>(band_cells - 1));
    }
    SUBCASE("tiles outside the window do not exclude cells") {
      ZoneSet hit;
      hit.insert({{3, 3, 2}, 9});
      hit.insert({{3, 3, 2}, 21});
      CHECK(parking_space(hit, cfg, 10, 20, band).contains({3, 3, 2}));
    }
    SUBCASE("random hit zones match the exhaustive per-cell scan") {
      Rng rng(29);
      ZoneSet hit;
      for (int k = 0; k < 400; ++k)
        hit.insert({{static_cast<int>(rng.uniform_int(20)), static_cast<int>(rng.uniform_int(20)),
                     static_cast<int>(rng.uniform_int(6))},
                    static_cast<TimeStep>(rng.uniform_int(40))});
      const TimeStep t0 = 10, t_end = 30;
      const CellSet park = parking_space(hit, cfg, t0, t_end, band);
      for (int ix = 0; ix < 20; ++ix)
        for (int iy = 0; iy < 20; ++iy)
          for (int iz = band.z_min_cell; iz <= band.z_max_cell; ++iz) {
            bool blocked = false;
            for (TimeStep t = t0; t <= t_end; ++t)
              if (hit.contains({{ix, iy, iz}, t})) blocked = true;
            CHECK(park.contains({ix, iy, iz}) == !blocked);
          }
    }
  }

  TEST_CASE("combine_occupancy follows the product rule") {
    const Tile tau{{4, 4, 4}, 9};
    SUBCASE("one field is unchanged") {
      const OccupancyField a = field_of({{tau, 0.375}});
      const OccupancyField c = combine_occupancy({&a, 1});
      CHECK(c.get(tau) == 0.375);
    }
    SUBCASE("two halves give three quarters") {
      const OccupancyField a = field_of({{tau, 0.5}});
      const OccupancyField b = field_of({{tau, 0.5}});
      const OccupancyField fields[2] = {a, b};
      CHECK(combine_occupancy(fields).get(tau) == 0.75);
    }
    SUBCASE("a certain tile absorbs") {
      const OccupancyField a = field_of({{tau, 1.0}});
      const OccupancyField b = field_of({{tau, 0.123}});
      const OccupancyField fields[2] = {a, b};
      CHECK(combine_occupancy(fields).get(tau) == 1.0);
    }
    SUBCASE("permutation invariance") {
      Rng rng(37);
      std::vector<OccupancyField> fields(3);
      for (OccupancyField& f : fields)
        for (int k = 0; k < 30; ++k)
          f.set({{static_cast<int>(rng.uniform_int(5)), 0, 0},
                 static_cast<TimeStep>(rng.uniform_int(5))},
                rng.uniform(0.0, 1.0) <= 0.1 ? 0.5 : rng.uniform(0.01, 0.99));
      const OccupancyField fwd = combine_occupancy(fields);
      std::reverse(fields.begin(), fields.end());
      const OccupancyField rev = combine_occupancy(fields);
      CHECK(fwd.support_size() == rev.support_size());
      for (const auto& [tile, p] : fwd)
        CHECK(rev.get(tile) == doctest::Approx(p).epsilon(1e-14));
    }
  }

  TEST_CASE("safe_probability product semantics") {
    const Tile a{{1, 1, 1}, 1}, b{{2, 2, 2}, 2};
    SUBCASE("all tiles free gives one") {
      ZoneSet z;
      z.insert(a);
      z.insert(b);
      CHECK(safe_probability(z, OccupancyField{}) == 1.0);
    }
    SUBCASE("two tiles at one half give a quarter") {
      ZoneSet z;
      z.insert(a);
      z.insert(b);
      const OccupancyField f = field_of({{a, 0.5}, {b, 0.5}});
      CHECK(safe_probability(z, f) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("log-domain accumulation matches the direct product") {
      Rng rng(41);
      OccupancyField f;
      ZoneSet z;
      double direct = 1.0;
      for (int k = 0; k < 60; ++k) {
        const Tile t{{static_cast<int>(rng.uniform_int(10)), static_cast<int>(rng.uniform_int(10)),
                      static_cast<int>(rng.uniform_int(10))},
                     static_cast<TimeStep>(k)};
        const double p = rng.uniform(0.0, 0.9);
        f.set(t, p);
        z.insert(t);
        direct *= (1.0 - p);
      }
      const double got = safe_probability(z, f);
      CHECK(std::abs(got - direct) <= 1e-12 * direct);
    }
    SUBCASE("a certain tile zeroes the product") {
      ZoneSet z;
      z.insert(a);
      const OccupancyField f = field_of({{a, 1.0}});
      CHECK(safe_probability(z, f) == 0.0);
      CHECK(std::isinf(safe_neg_log_probability(z, f)));
    }
    SUBCASE("multiplicative over disjoint tile sets") {
      Rng rng(43);
      OccupancyField f;
      ZoneSet za, zb;
      for (int k = 0; k < 20; ++k) {
        const Tile ta{{static_cast<int>(rng.uniform_int(10)), 0, 0}, k};
        const Tile tb{{static_cast<int>(rng.uniform_int(10)), 5, 0}, k};
        f.set(ta, rng.uniform(0.01, 0.9));
        f.set(tb, rng.uniform(0.01, 0.9));
        za.insert(ta);
        zb.insert(tb);
      }
      ZoneSet both = za;
      both.merge(zb);
      CHECK(safe_probability(both, f) ==
            doctest::Approx(safe_probability(za, f) * safe_probability(zb, f)).epsilon(1e-12));
    }
  }
}
