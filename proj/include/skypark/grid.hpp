#ifndef SKYPARK_GRID_HPP
#define SKYPARK_GRID_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "skypark/types.hpp"

namespace skypark {

/// The stage: a finite axis-aligned box of cubic cells plus the show's
/// discrete time range. All spatial queries are expressed in cell indices.
struct StageConfig {
  Vec3 origin = Vec3::Zero();
  std::array<int, 3> extent = {1, 1, 1};  // cells per axis
  double cell_size = 1.0;                 // meters
  TimeStep t_first = 0;
  TimeStep t_last = 1;
  double dt = 0.5;  // seconds per time step

  /// Throws SpecError when any invariant is violated.
  void validate() const;

  Vec3 max_corner() const {
    return origin + cell_size * Vec3(extent[0], extent[1], extent[2]);
  }
  bool contains(const Vec3& p) const {
    const Vec3 hi = max_corner();
    return p.x() >= origin.x() && p.x() < hi.x() && p.y() >= origin.y() && p.y() < hi.y() &&
           p.z() >= origin.z() && p.z() < hi.z();
  }
  int show_steps() const { return t_last - t_first; }
};

struct GridCell {
  int ix = 0;
  int iy = 0;
  int iz = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

/// One space-time atom: a grid cell at a time step.
struct Tile {
  GridCell cell;
  TimeStep t = 0;

  friend bool operator==(const Tile&, const Tile&) = default;
  friend auto operator<=>(const Tile&, const Tile&) = default;
};

inline std::uint64_t mix_hash(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  return x ^ (x >> 33);
}

struct CellHash {
  std::size_t operator()(const GridCell& c) const {
    std::uint64_t k = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.ix)) << 42) ^
                      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.iy)) << 21) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.iz));
    return static_cast<std::size_t>(mix_hash(k));
  }
};

struct TileHash {
  std::size_t operator()(const Tile& t) const {
    CellHash ch;
    return static_cast<std::size_t>(
        mix_hash(ch(t.cell) ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.t)) << 1)));
  }
};

/// Sparse set of tiles. Membership is exact; the stage zone is never
/// materialized densely. Anything order-sensitive (serialization, sampling)
/// must go through sorted_tiles().
class ZoneSet {
 public:
  ZoneSet() = default;

  void insert(const Tile& tile) { tiles_.insert(tile); }
  bool contains(const Tile& tile) const { return tiles_.count(tile) > 0; }
  bool empty() const { return tiles_.empty(); }
  std::size_t size() const { return tiles_.size(); }
  void clear() { tiles_.clear(); }

  void merge(const ZoneSet& other) {
    for (const Tile& t : other.tiles_) tiles_.insert(t);
  }
  bool intersects(const ZoneSet& other) const {
    const ZoneSet& small = size() <= other.size() ? *this : other;
    const ZoneSet& large = size() <= other.size() ? other : *this;
    for (const Tile& t : small.tiles_)
      if (large.contains(t)) return true;
    return false;
  }
  ZoneSet intersection(const ZoneSet& other) const {
    ZoneSet out;
    const ZoneSet& small = size() <= other.size() ? *this : other;
    const ZoneSet& large = size() <= other.size() ? other : *this;
    for (const Tile& t : small.tiles_)
      if (large.contains(t)) out.insert(t);
    return out;
  }
  ZoneSet difference(const ZoneSet& other) const {
    ZoneSet out;
    for (const Tile& t : tiles_)
      if (!other.contains(t)) out.insert(t);
    return out;
  }

  std::vector<Tile> sorted_tiles() const;

  auto begin() const { return tiles_.begin(); }
  auto end() const { return tiles_.end(); }

  friend bool operator==(const ZoneSet& a, const ZoneSet& b) { return a.tiles_ == b.tiles_; }

 private:
  std::unordered_set<Tile, TileHash> tiles_;
};

/// Sparse set of grid cells (a "space" as opposed to a "zone").
class CellSet {
 public:
  CellSet() = default;

  void insert(const GridCell& c) { cells_.insert(c); }
  bool contains(const GridCell& c) const { return cells_.count(c) > 0; }
  bool empty() const { return cells_.empty(); }
  std::size_t size() const { return cells_.size(); }

  std::vector<GridCell> sorted_cells() const;

  auto begin() const { return cells_.begin(); }
  auto end() const { return cells_.end(); }

 private:
  std::unordered_set<GridCell, CellHash> cells_;
};

struct TimedPose {
  TimeStep t = 0;
  Vec3 position = Vec3::Zero();
};

enum class OffStagePolicy {
  kThrow,  // a pose whose body lies fully off-stage is an error
  kClip,   // off-stage portions are silently dropped (fallen-drone sweeps)
};

/// Maps a point to the cell whose half-open box contains it, or nullopt if
/// the point is off-stage. Boxes are [origin + i*s, origin + (i+1)*s).
std::optional<GridCell> cell_of_point(const Vec3& p, const StageConfig& cfg);

Vec3 cell_min_corner(const GridCell& c, const StageConfig& cfg);
Vec3 cell_center(const GridCell& c, const StageConfig& cfg);

/// Tiles whose cell boxes intersect the closed ball of `radius` about
/// `center` at time `t`. Boundary contact counts as occupancy. Throws
/// OffStageError when the ball misses the stage entirely.
ZoneSet footprint_of_pose(const Vec3& center, double radius, TimeStep t, const StageConfig& cfg);

/// Cells (no time) touched by the closed ball; same geometry as
/// footprint_of_pose. Empty result means the ball is fully off-stage.
CellSet cells_of_ball(const Vec3& center, double radius, const StageConfig& cfg);

/// Swept tiles of the straight segment a -> b traversed during time step t,
/// i.e. the half-open interval [t, t+1). Samples are spaced at most half a
/// cell apart so the sweep cannot tunnel through a cell. The arrival pose at
/// t+1 is deliberately NOT included; it belongs to the next step.
ZoneSet footprint_of_segment(const Vec3& a, const Vec3& b, double radius, TimeStep t,
                             const StageConfig& cfg, OffStagePolicy policy);

/// Footprint of a pose path: swept tiles of every step interval plus the
/// final pose at its own time. Consecutive poses must be one step apart.
ZoneSet footprint_of_path(std::span<const TimedPose> poses, double radius, const StageConfig& cfg,
                          OffStagePolicy policy = OffStagePolicy::kThrow);

/// Two plans collide iff their footprints share a tile.
inline bool plans_collide(const ZoneSet& f1, const ZoneSet& f2) { return f1.intersects(f2); }

}  // namespace skypark

#endif  // SKYPARK_GRID_HPP
