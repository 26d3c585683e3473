#ifndef SKYPARK_OCCUPANCY_HPP
#define SKYPARK_OCCUPANCY_HPP

#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "skypark/grid.hpp"
#include "skypark/predictor.hpp"
#include "skypark/types.hpp"

namespace skypark {

/// Sparse map tile -> occupancy probability. Absent tiles are exactly 0; no
/// smoothing is applied anywhere. Values stay in linear domain, products are
/// taken in log domain.
class OccupancyField {
 public:
  double get(const Tile& tile) const {
    auto it = probs_.find(tile);
    return it == probs_.end() ? 0.0 : it->second;
  }
  void set(const Tile& tile, double p);
  bool empty() const { return probs_.empty(); }
  std::size_t support_size() const { return probs_.size(); }

  std::vector<Tile> sorted_tiles() const;

  auto begin() const { return probs_.begin(); }
  auto end() const { return probs_.end(); }

 private:
  std::unordered_map<Tile, double, TileHash> probs_;
};

/// Everything the planner needs to know about one incident's geometry.
struct IncidentZones {
  std::map<DroneId, ZoneSet> fall_zones;
  ZoneSet hit;
  CellSet parking;
  TimeStep t0 = 0;
  TimeStep t_end = 0;
};

/// Inclusive cell-index band where evacuees may park (above the ground,
/// below the show volume by default).
struct ParkingBand {
  int z_min_cell = 1;
  int z_max_cell = 4;

  void validate(const StageConfig& cfg) const;
};

/// Empirical per-tile occupancy of one failing drone: Pr(tile) = C/N where C
/// counts rollouts whose swept footprint contains the tile. Tiles of
/// `prior`, the drone's own footprint at or before t0, are pinned to 1.
/// Rollout sweeps attribute the interval [t, t+1) to tile time t, so the
/// first interval after t0 lands on the t0 layer.
OccupancyField estimate_occupancy(const RolloutSet& rollouts, double radius,
                                  const StageConfig& cfg, const ZoneSet& prior = {});

/// Support of the field: every tile with nonzero probability.
ZoneSet fall_zone(const OccupancyField& field);

/// Largest time at which any field has a positive tile. Throws SpecError
/// when every field is empty.
TimeStep incident_end_time(std::span<const OccupancyField> fields);

/// Union of the per-drone fall zones.
ZoneSet hit_zone(std::span<const OccupancyField> fields);

/// Cells of the parking band whose tiles stay outside `hit` for every
/// t in [t0, t_end]. May be empty; the planner then reports capacity errors.
CellSet parking_space(const ZoneSet& hit, const StageConfig& cfg, TimeStep t0, TimeStep t_end,
                      const ParkingBand& band);

/// Pr(tile) = 1 - prod_drones (1 - Pr_drone(tile)).
OccupancyField combine_occupancy(std::span<const OccupancyField> fields);

/// prod over tiles of (1 - Pr(tile)); empty set -> 1. Accumulated in log
/// domain; returns exactly 0 when any tile has Pr = 1.
double safe_probability(const ZoneSet& tiles, const OccupancyField& combined);

/// -log of safe_probability, infinity when any tile has Pr = 1.
double safe_neg_log_probability(const ZoneSet& tiles, const OccupancyField& combined);

}  // namespace skypark

#endif  // SKYPARK_OCCUPANCY_HPP
