#include "skypark/grid.hpp"

#include <algorithm>
#include <cmath>

namespace skypark {

const char* to_string(DroneStatus status) {
  switch (status) {
    case DroneStatus::kActive: return "active";
    case DroneStatus::kFallen: return "fallen";
    case DroneStatus::kHidden: return "hidden";
    case DroneStatus::kParked: return "parked";
  }
  return "unknown";
}

void StageConfig::validate() const {
  if (cell_size <= 0.0) throw SpecError("stage: cell_size must be positive");
  if (dt <= 0.0) throw SpecError("stage: dt must be positive");
  if (t_first >= t_last) throw SpecError("stage: t_first must be < t_last");
  for (int e : extent)
    if (e < 1) throw SpecError("stage: extent components must be >= 1");
}

std::vector<Tile> ZoneSet::sorted_tiles() const {
  std::vector<Tile> out(tiles_.begin(), tiles_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<GridCell> CellSet::sorted_cells() const {
  std::vector<GridCell> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<GridCell> cell_of_point(const Vec3& p, const StageConfig& cfg) {
  GridCell c;
  int* idx[3] = {&c.ix, &c.iy, &c.iz};
  for (int axis = 0; axis < 3; ++axis) {
    const double rel = (p[axis] - cfg.origin[axis]) / cfg.cell_size;
    const int i = static_cast<int>(std::floor(rel));
    if (i < 0 || i >= cfg.extent[axis]) return std::nullopt;
    *idx[axis] = i;
  }
  return c;
}

Vec3 cell_min_corner(const GridCell& c, const StageConfig& cfg) {
  return cfg.origin + cfg.cell_size * Vec3(c.ix, c.iy, c.iz);
}

Vec3 cell_center(const GridCell& c, const StageConfig& cfg) {
  return cell_min_corner(c, cfg) + 0.5 * cfg.cell_size * Vec3::Ones();
}

namespace {

// Closed ball vs closed box: squared distance from center to the box.
bool ball_touches_cell(const Vec3& center, double radius, const GridCell& c,
                       const StageConfig& cfg) {
  const Vec3 lo = cell_min_corner(c, cfg);
  const Vec3 hi = lo + cfg.cell_size * Vec3::Ones();
  double d2 = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double v = std::clamp(center[axis], lo[axis], hi[axis]);
    const double d = center[axis] - v;
    d2 += d * d;
  }
  return d2 <= radius * radius;
}

// Visits every stage cell the ball could touch; returns false when the
// candidate range misses the stage entirely.
template <typename Fn>
bool for_each_candidate_cell(const Vec3& center, double radius, const StageConfig& cfg, Fn&& fn) {
  int lo[3], hi[3];
  for (int axis = 0; axis < 3; ++axis) {
    lo[axis] = static_cast<int>(std::floor((center[axis] - radius - cfg.origin[axis]) / cfg.cell_size));
    hi[axis] = static_cast<int>(std::floor((center[axis] + radius - cfg.origin[axis]) / cfg.cell_size));
    lo[axis] = std::max(lo[axis], 0);
    hi[axis] = std::min(hi[axis], cfg.extent[axis] - 1);
    if (lo[axis] > hi[axis]) return false;
  }
  for (int ix = lo[0]; ix <= hi[0]; ++ix)
    for (int iy = lo[1]; iy <= hi[1]; ++iy)
      for (int iz = lo[2]; iz <= hi[2]; ++iz) {
        const GridCell c{ix, iy, iz};
        if (ball_touches_cell(center, radius, c, cfg)) fn(c);
      }
  return true;
}

}  // namespace

CellSet cells_of_ball(const Vec3& center, double radius, const StageConfig& cfg) {
  CellSet out;
  for_each_candidate_cell(center, radius, cfg, [&](const GridCell& c) { out.insert(c); });
  return out;
}

ZoneSet footprint_of_pose(const Vec3& center, double radius, TimeStep t, const StageConfig& cfg) {
  if (radius <= 0.0) throw SpecError("footprint_of_pose: radius must be positive");
  ZoneSet out;
  for_each_candidate_cell(center, radius, cfg, [&](const GridCell& c) { out.insert({c, t}); });
  if (out.empty()) throw OffStageError("drone body lies entirely outside the stage");
  return out;
}

namespace {

// Sub-samples of a step segment, spaced at most cell_size/2 apart, so a fast
// drone cannot slip through a cell between samples.
int segment_samples(double seg_len, double cell_size) {
  return std::max(2, static_cast<int>(std::ceil(seg_len / (0.5 * cell_size))));
}

void sweep_segment(const Vec3& a, const Vec3& b, double radius, TimeStep t,
                   const StageConfig& cfg, OffStagePolicy policy, ZoneSet& out) {
  const int n = segment_samples((b - a).norm(), cfg.cell_size);
  bool any = false;
  for (int j = 0; j < n; ++j) {  // [t, t+1): arrival pose belongs to the next step
    const Vec3 p = a + (b - a) * (static_cast<double>(j) / n);
    const bool touched =
        for_each_candidate_cell(p, radius, cfg, [&](const GridCell& c) { out.insert({c, t}); });
    any = any || touched;
  }
  if (!any && policy == OffStagePolicy::kThrow)
    throw OffStageError("swept segment lies entirely outside the stage");
}

}  // namespace

ZoneSet footprint_of_segment(const Vec3& a, const Vec3& b, double radius, TimeStep t,
                             const StageConfig& cfg, OffStagePolicy policy) {
  ZoneSet out;
  sweep_segment(a, b, radius, t, cfg, policy, out);
  return out;
}

ZoneSet footprint_of_path(std::span<const TimedPose> poses, double radius, const StageConfig& cfg,
                          OffStagePolicy policy) {
  if (poses.empty()) throw SpecError("footprint_of_path: empty pose sequence");
  ZoneSet out;
  for (std::size_t k = 0; k + 1 < poses.size(); ++k)
    sweep_segment(poses[k].position, poses[k + 1].position, radius, poses[k].t, cfg, policy, out);
  // Final pose at its own time closes the path.
  const TimedPose& last = poses.back();
  if (policy == OffStagePolicy::kThrow) {
    out.merge(footprint_of_pose(last.position, radius, last.t, cfg));
  } else {
    for_each_candidate_cell(last.position, radius, cfg,
                            [&](const GridCell& c) { out.insert({c, last.t}); });
  }
  return out;
}

}  // namespace skypark
