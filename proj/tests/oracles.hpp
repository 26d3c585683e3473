// Test-only reference implementations. Everything here recomputes expected
// values by a route independent of the library code under test: exhaustive
// scans, brute-force enumeration, fine-step integration, quadrature.
#ifndef SKYPARK_TESTS_ORACLES_HPP
#define SKYPARK_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <vector>

#include "skypark/dynamics.hpp"
#include "skypark/grid.hpp"
#include "skypark/planner.hpp"

namespace skypark::oracles {

// Every stage cell whose closed box touches the closed ball, by scanning the
// full grid with a locally written overlap test.
inline std::vector<GridCell> ball_cells_brute_force(const Vec3& center, double radius,
                                                    const StageConfig& cfg) {
  std::vector<GridCell> out;
  for (int ix = 0; ix < cfg.extent[0]; ++ix)
    for (int iy = 0; iy < cfg.extent[1]; ++iy)
      for (int iz = 0; iz < cfg.extent[2]; ++iz) {
        const double lo[3] = {cfg.origin.x() + ix * cfg.cell_size,
                              cfg.origin.y() + iy * cfg.cell_size,
                              cfg.origin.z() + iz * cfg.cell_size};
        double d2 = 0.0;
        const double c[3] = {center.x(), center.y(), center.z()};
        for (int a = 0; a < 3; ++a) {
          const double v = std::max(lo[a], std::min(c[a], lo[a] + cfg.cell_size));
          d2 += (c[a] - v) * (c[a] - v);
        }
        if (d2 <= radius * radius) out.push_back({ix, iy, iz});
      }
  return out;
}

// Swept footprint by dense sampling of the pose path with floor-time
// attribution. Sample counts are a 16x refinement of the half-cell spacing
// rule, so the refined set contains every half-cell-spaced sample's tiles.
inline std::set<Tile> swept_tiles_dense(const std::vector<TimedPose>& poses, double radius,
                                        const StageConfig& cfg) {
  std::set<Tile> out;
  for (std::size_t k = 0; k + 1 < poses.size(); ++k) {
    const Vec3 delta = poses[k + 1].position - poses[k].position;
    const int coarse =
        std::max(2, static_cast<int>(std::ceil(delta.norm() / (0.5 * cfg.cell_size))));
    const int n = 16 * coarse;
    for (int j = 0; j < n; ++j) {
      const Vec3 p = poses[k].position + delta * (static_cast<double>(j) / n);
      for (const GridCell& c : ball_cells_brute_force(p, radius, cfg))
        out.insert({c, poses[k].t});
    }
  }
  for (const GridCell& c : ball_cells_brute_force(poses.back().position, radius, cfg))
    out.insert({c, poses.back().t});
  return out;
}

inline std::set<Tile> to_set(const ZoneSet& zone) {
  std::set<Tile> out;
  for (const Tile& t : zone) out.insert(t);
  return out;
}

// Drop dynamics (gravity + quadratic drag) integrated with tiny Euler steps;
// the library uses RK4 substeps at dt, so agreement is a real check.
inline Vec3 drop_position_fine(const Vec3& p0, const Vec3& v0, double drag, double seconds,
                               int substeps_per_second = 200000) {
  Vec3 p = p0, v = v0;
  const int n = std::max(1, static_cast<int>(seconds * substeps_per_second));
  const double h = seconds / n;
  for (int i = 0; i < n; ++i) {
    const Vec3 a = Vec3(0, 0, -kGravity) - drag * v.norm() * v;
    p += v * h + 0.5 * a * h * h;
    v += a * h;
  }
  return p;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Mass of an axis-aligned rectangle under an isotropic 2D Gaussian.
inline double gaussian_rect_mass(double mx, double my, double sigma, double x0, double x1,
                                 double y0, double y1) {
  return (normal_cdf((x1 - mx) / sigma) - normal_cdf((x0 - mx) / sigma)) *
         (normal_cdf((y1 - my) / sigma) - normal_cdf((y0 - my) / sigma));
}

// P(distance from N(mean, sigma^2 I_2) to the rectangle <= r): the mass of
// the rectangle dilated by r. Rectangle and side strips are exact; the four
// quarter-disc corners are integrated by fine Simpson quadrature.
inline double gaussian_dilated_rect_mass(double mx, double my, double sigma, double x0,
                                         double x1, double y0, double y1, double r) {
  double mass = gaussian_rect_mass(mx, my, sigma, x0 - r, x1 + r, y0, y1) +
                gaussian_rect_mass(mx, my, sigma, x0, x1, y0 - r, y0) +
                gaussian_rect_mass(mx, my, sigma, x0, x1, y1, y1 + r);
  const double corners[4][2] = {{x0, y0}, {x1, y0}, {x0, y1}, {x1, y1}};
  const double signs[4][2] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
  for (int c = 0; c < 4; ++c) {
    // Integrate the quarter disc at the corner: x = cx + sx*u, y = cy + sy*v,
    // u in [0, r], v in [0, sqrt(r^2 - u^2)].
    const double cx = corners[c][0], cy = corners[c][1];
    const double sx = signs[c][0], sy = signs[c][1];
    const int n = 2000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double u = r * i / n;
      const double vmax = std::sqrt(std::max(0.0, r * r - u * u));
      const double x = cx + sx * u;
      const double fy = normal_cdf((cy + sy * vmax - my) / sigma) - normal_cdf((cy - my) / sigma);
      const double fx = std::exp(-0.5 * std::pow((x - mx) / sigma, 2)) /
                        (sigma * std::sqrt(2.0 * M_PI));
      const double val = std::abs(fy) * fx;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * val;
    }
    mass += acc * (r / n) / 3.0;
  }
  return mass;
}

// Exhaustive root-to-target shortest path by enumerating every path.
struct EnumeratedBest {
  double cost = std::numeric_limits<double>::infinity();
  int vertex = -1;
  long paths = 0;
};

inline EnumeratedBest enumerate_paths(const PlanGraph& g,
                                      const std::function<bool(int)>& is_goal) {
  EnumeratedBest best;
  std::function<void(int, double)> dfs = [&](int v, double cost) {
    if (is_goal(v)) {
      ++best.paths;
      if (cost < best.cost - 1e-15 ||
          (std::abs(cost - best.cost) <= 1e-15 && v < best.vertex)) {
        best.cost = cost;
        best.vertex = v;
      }
    }
    for (const int ei : g.out_edges(v)) {
      const PlanEdge& e = g.edges()[ei];
      dfs(e.to, cost + e.weight);
    }
  };
  dfs(0, 0.0);
  return best;
}

// Minimum-total-cost injective matching by trying every permutation.
inline double assignment_brute_force(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = static_cast<int>(cost[0].size());
  std::vector<int> cols(m);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Choose which columns to use (n <= m) in every order.
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    double total = 0.0;
    for (int r = 0; r < n; ++r) total += cost[r][perm[r]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace skypark::oracles

#endif  // SKYPARK_TESTS_ORACLES_HPP
