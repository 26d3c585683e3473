#include "skypark/occupancy.hpp"

#include <algorithm>
#include <cmath>

namespace skypark {

void OccupancyField::set(const Tile& tile, double p) {
  if (p < 0.0 || p > 1.0) throw SpecError("occupancy probability out of [0, 1]");
  if (p == 0.0) {
    probs_.erase(tile);  // absent tiles are exactly zero
    return;
  }
  probs_[tile] = p;
}

std::vector<Tile> OccupancyField::sorted_tiles() const {
  std::vector<Tile> out;
  out.reserve(probs_.size());
  for (const auto& [tile, p] : probs_) out.push_back(tile);
  std::sort(out.begin(), out.end());
  return out;
}

void ParkingBand::validate(const StageConfig& cfg) const {
  if (z_min_cell < 0 || z_max_cell < z_min_cell || z_max_cell >= cfg.extent[2])
    throw SpecError("parking band outside the stage");
}

OccupancyField estimate_occupancy(const RolloutSet& rollouts, double radius,
                                  const StageConfig& cfg, const ZoneSet& prior) {
  if (rollouts.count() < 1) throw SpecError("estimate_occupancy: empty rollout set");
  const int n = rollouts.count();
  std::unordered_map<Tile, int, TileHash> counts;
  for (const Trajectory& traj : rollouts.trajectories) {
    // Fallen drones may leave the stage; their sweeps clip instead of throwing.
    const ZoneSet swept = footprint_of_path(traj.poses, radius, cfg, OffStagePolicy::kClip);
    for (const Tile& tile : swept)
      if (tile.t >= rollouts.t0) ++counts[tile];
  }
  OccupancyField field;
  for (const auto& [tile, c] : counts)
    field.set(tile, static_cast<double>(c) / static_cast<double>(n));
  // The drone's own footprint at or before t0 is certain.
  for (const Tile& tile : prior) field.set(tile, 1.0);
  return field;
}

ZoneSet fall_zone(const OccupancyField& field) {
  ZoneSet zone;
  for (const auto& [tile, p] : field) zone.insert(tile);
  return zone;
}

TimeStep incident_end_time(std::span<const OccupancyField> fields) {
  bool any = false;
  TimeStep t_end = 0;
  for (const OccupancyField& field : fields)
    for (const auto& [tile, p] : field) {
      if (!any || tile.t > t_end) t_end = tile.t;
      any = true;
    }
  if (!any) throw SpecError("incident_end_time: all occupancy fields are empty");
  return t_end;
}

ZoneSet hit_zone(std::span<const OccupancyField> fields) {
  ZoneSet hit;
  for (const OccupancyField& field : fields)
    for (const auto& [tile, p] : field) hit.insert(tile);
  return hit;
}

CellSet parking_space(const ZoneSet& hit, const StageConfig& cfg, TimeStep t0, TimeStep t_end,
                      const ParkingBand& band) {
  if (t0 > t_end) throw SpecError("parking_space: t0 must be <= t_end");
  band.validate(cfg);
  // Project the hit zone's window onto cells; band cells outside that
  // projection are safe for the whole incident.
  std::unordered_set<GridCell, CellHash> blocked;
  for (const Tile& tile : hit)
    if (tile.t >= t0 && tile.t <= t_end) blocked.insert(tile.cell);
  CellSet park;
  for (int ix = 0; ix < cfg.extent[0]; ++ix)
    for (int iy = 0; iy < cfg.extent[1]; ++iy)
      for (int iz = band.z_min_cell; iz <= band.z_max_cell; ++iz) {
        const GridCell c{ix, iy, iz};
        if (!blocked.count(c)) park.insert(c);
      }
  return park;
}

OccupancyField combine_occupancy(std::span<const OccupancyField> fields) {
  // Accumulate per-tile survival products over the union of supports.
  std::unordered_map<Tile, double, TileHash> survival;
  for (const OccupancyField& field : fields)
    for (const auto& [tile, p] : field) {
      auto [it, inserted] = survival.try_emplace(tile, 1.0);
      it->second *= (1.0 - p);
    }
  OccupancyField combined;
  for (const auto& [tile, s] : survival) combined.set(tile, 1.0 - s);
  return combined;
}

double safe_neg_log_probability(const ZoneSet& tiles, const OccupancyField& combined) {
  double neg_log = 0.0;
  for (const Tile& tile : tiles) {
    const double p = combined.get(tile);
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    neg_log -= std::log1p(-p);
  }
  return neg_log;
}

double safe_probability(const ZoneSet& tiles, const OccupancyField& combined) {
  const double neg_log = safe_neg_log_probability(tiles, combined);
  return std::isinf(neg_log) ? 0.0 : std::exp(-neg_log);
}

}  // namespace skypark
