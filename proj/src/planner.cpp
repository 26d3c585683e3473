#include "skypark/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "skypark/io.hpp"
#include "skypark/parallel.hpp"
#include "skypark/rng.hpp"

namespace skypark {

void PlannerConfig::validate() const {
  if (vertex_budget < 1) throw SpecError("planner: vertex_budget must be >= 1");
  if (goal_bias < 0.0 || goal_bias > 1.0) throw SpecError("planner: goal_bias must be in [0, 1]");
  if (k_nearest < 0) throw SpecError("planner: k_nearest must be >= 0");
  if (park_vertex_target < 0) throw SpecError("planner: park_vertex_target must be >= 0");
  if (iteration_factor < 1) throw SpecError("planner: iteration_factor must be >= 1");
  if (alpha_default <= 0.0) throw SpecError("planner: alpha_default must be positive");
}

int PlanGraph::add_vertex(const PlanVertex& v) {
  vertices_.push_back(v);
  out_.emplace_back();
  return static_cast<int>(vertices_.size()) - 1;
}

int PlanGraph::add_edge(const PlanEdge& e) {
  edges_.push_back(e);
  out_[e.from].push_back(static_cast<int>(edges_.size()) - 1);
  return static_cast<int>(edges_.size()) - 1;
}

void PlanGraph::serialize(std::ostream& os) const {
  os << "graph " << drone << " vertices " << vertices_.size() << " edges " << edges_.size()
     << "\n";
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const PlanVertex& v = vertices_[i];
    os << "v " << i << ',' << format_double(v.position.x()) << ',' << format_double(v.position.y())
       << ',' << format_double(v.position.z()) << ',' << v.t << "\n";
  }
  for (const PlanEdge& e : edges_) {
    os << "e " << e.from << ',' << e.to << ',' << format_double(e.weight) << ','
       << format_double(e.velocity.x()) << ',' << format_double(e.velocity.y()) << ','
       << format_double(e.velocity.z()) << "\n";
  }
}

std::vector<DroneId> select_evacuees(std::span<const EvacueeCandidate> candidates,
                                     const ZoneSet& hit, double radius, const StageConfig& cfg) {
  std::vector<DroneId> out;
  for (const EvacueeCandidate& cand : candidates) {
    const ZoneSet swept = footprint_of_path(cand.remaining_path, radius, cfg);
    if (swept.intersects(hit)) out.push_back(cand.state.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> edge_weight(const ZoneSet& swept, const OccupancyField& combined) {
  const double w = safe_neg_log_probability(swept, combined);
  if (std::isinf(w)) return std::nullopt;
  return w;
}

namespace {

// Swept tiles of one step plus its weight; nullopt when the edge must be
// rejected (a certain tile or a reserved tile on the way).
std::optional<double> step_weight(const Vec3& from, const Vec3& to, TimeStep t, double radius,
                                  const StageConfig& cfg, const OccupancyField& combined,
                                  const ZoneSet* reserved) {
  const ZoneSet swept = footprint_of_segment(from, to, radius, t, cfg, OffStagePolicy::kThrow);
  if (reserved && swept.intersects(*reserved)) return std::nullopt;
  return edge_weight(swept, combined);
}

bool ball_parks(const Vec3& position, double radius, const CellSet& parking,
                const StageConfig& cfg) {
  const CellSet cells = cells_of_ball(position, radius, cfg);
  if (cells.empty()) return false;
  for (const GridCell& c : cells)
    if (!parking.contains(c)) return false;
  return true;
}

}  // namespace

PlanGraph grow_graph(const DroneState& state, const IncidentZones& zones,
                     const OccupancyField& combined, const StageConfig& cfg,
                     const KinematicConfig& kin, const PlannerConfig& pcfg, std::uint64_t seed,
                     int budget, const ZoneSet* reserved) {
  pcfg.validate();
  if (budget < 1) throw SpecError("planner: vertex budget must be >= 1");
  const double cap = pcfg.speed_cap(kin, cfg.dt);

  PlanGraph g;
  g.drone = state.id;
  g.root_velocity = state.velocity;
  g.add_vertex({state.position, zones.t0, state.velocity.norm() <= cap * (1.0 + 1e-12)});

  // Forced braking prefix: shed speed down to the planning cap. A blocked or
  // off-stage braking step leaves the graph without an expandable tip, which
  // surfaces later as a capacity error for this drone.
  {
    Vec3 p = state.position;
    Vec3 v = state.velocity;
    TimeStep t = zones.t0;
    int tip = 0;
    while (v.norm() > cap * (1.0 + 1e-12) && t < zones.t_end) {
      const double speed = v.norm();
      const double shed = std::min(kin.a_max * cfg.dt, speed - cap);
      const Vec3 v_next = v * ((speed - shed) / speed);
      const Vec3 p_next = p + v_next * cfg.dt;
      std::optional<double> w;
      try {
        w = step_weight(p, p_next, t, kin.radius, cfg, combined, reserved);
      } catch (const OffStageError&) {
        w = std::nullopt;
      }
      if (!w) break;
      const int nv =
          g.add_vertex({p_next, t + 1, v_next.norm() <= cap * (1.0 + 1e-12)});
      g.add_edge({tip, nv, v_next, *w});
      tip = nv;
      p = p_next;
      v = v_next;
      t = t + 1;
    }
  }

  Rng rng(seed);
  const std::vector<GridCell> park_cells = zones.parking.sorted_cells();
  const Vec3 margin_lo = cfg.origin + kin.radius * Vec3::Ones();
  const Vec3 margin_hi = cfg.max_corner() - kin.radius * Vec3::Ones();
  const double step_len = cap * cfg.dt;

  std::vector<int> tree_parent(g.vertex_count(), -1);
  std::vector<char> has_wait_child(g.vertex_count(), 0);
  for (const PlanEdge& e : g.edges()) tree_parent[e.to] = e.from;

  int park_count = 0;
  for (int i = 0; i < g.vertex_count(); ++i)
    if (g.vertices()[i].expandable && ball_parks(g.vertices()[i].position, kin.radius,
                                                 zones.parking, cfg))
      ++park_count;

  auto add_child = [&](int parent, const Vec3& position, double weight) {
    const TimeStep t = g.vertices()[parent].t + 1;
    const Vec3 vel = (position - g.vertices()[parent].position) / cfg.dt;
    const int nv = g.add_vertex({position, t, true});
    g.add_edge({parent, nv, vel, weight});
    tree_parent.push_back(parent);
    has_wait_child.push_back(0);
    if (ball_parks(position, kin.radius, zones.parking, cfg)) ++park_count;
    return nv;
  };

  // Wait chain from the tip: holding position until the airspace clears is a
  // move the shortest path must be able to take.
  {
    int tip = -1;
    for (int i = 0; i < g.vertex_count(); ++i)
      if (g.vertices()[i].expandable) tip = i;
    while (tip >= 0 && g.vertices()[tip].t < zones.t_end && g.vertex_count() < budget) {
      const Vec3 pos = g.vertices()[tip].position;
      const auto w =
          step_weight(pos, pos, g.vertices()[tip].t, kin.radius, cfg, combined, reserved);
      if (!w) break;
      has_wait_child[tip] = 1;
      tip = add_child(tip, pos, *w);
    }
  }

  const long max_iter =
      zones.t_end > zones.t0 ? static_cast<long>(pcfg.iteration_factor) * budget : 0;
  for (long iter = 0; iter < max_iter && g.vertex_count() < budget &&
                      (pcfg.park_vertex_target <= 0 || park_count < pcfg.park_vertex_target);
       ++iter) {
    // Space-time sample: a position (goal-biased toward the parking space)
    // and a target arrival time.
    Vec3 sample;
    if (!park_cells.empty() && rng.uniform() < pcfg.goal_bias) {
      const GridCell& c = park_cells[rng.uniform_int(park_cells.size())];
      const Vec3 cmin = cell_min_corner(c, cfg);
      sample = cmin + cfg.cell_size * Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    } else {
      sample = Vec3(rng.uniform(margin_lo.x(), margin_hi.x()),
                    rng.uniform(margin_lo.y(), margin_hi.y()),
                    rng.uniform(margin_lo.z(), margin_hi.z()));
    }
    const TimeStep sample_t =
        zones.t0 + 1 + static_cast<TimeStep>(rng.uniform_int(
                           static_cast<std::uint64_t>(zones.t_end - zones.t0)));

    // Nearest vertex in space-time: spatial gap plus the distance that must
    // be burned waiting out the time gap.
    int nearest = -1;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.vertex_count(); ++i) {
      const PlanVertex& v = g.vertices()[i];
      if (!v.expandable || v.t >= sample_t) continue;
      const double d = (v.position - sample).norm() + step_len * (sample_t - 1 - v.t);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = i;
      }
    }
    if (nearest < 0) continue;

    const Vec3 parent_pos = g.vertices()[nearest].position;
    const TimeStep parent_t = g.vertices()[nearest].t;
    const Vec3 dir = sample - parent_pos;
    const double dist = dir.norm();
    Vec3 candidate = parent_pos;
    if (dist >= 1e-9) {
      candidate = parent_pos + dir * (std::min(dist, step_len) / dist);
      candidate = candidate.cwiseMax(margin_lo).cwiseMin(margin_hi);
    }
    const bool wait_move = (candidate - parent_pos).norm() < 1e-9;
    if (wait_move) {
      if (has_wait_child[nearest]) continue;  // one wait child is enough
      candidate = parent_pos;
    }

    const auto w =
        step_weight(parent_pos, candidate, parent_t, kin.radius, cfg, combined, reserved);
    if (!w) continue;
    if (wait_move) has_wait_child[nearest] = 1;
    add_child(nearest, candidate, *w);
  }

  // Cross-layer densification: extra feasible edges from the k nearest
  // vertices of the previous layer turn the tree into a DAG with genuine
  // alternative paths.
  if (pcfg.k_nearest > 0) {
    std::map<TimeStep, std::vector<int>> layers;
    for (int i = 0; i < g.vertex_count(); ++i)
      if (g.vertices()[i].expandable) layers[g.vertices()[i].t].push_back(i);
    const int n_tree = g.vertex_count();
    for (int w_idx = 1; w_idx < n_tree; ++w_idx) {
      const PlanVertex& w_v = g.vertices()[w_idx];
      if (!w_v.expandable) continue;
      const auto it = layers.find(w_v.t - 1);
      if (it == layers.end()) continue;
      std::vector<std::pair<double, int>> cands;
      for (int u : it->second) {
        if (u == tree_parent[w_idx]) continue;
        const double d = (g.vertices()[u].position - w_v.position).norm();
        if (d <= cap * cfg.dt * (1.0 + 1e-12)) cands.emplace_back(d, u);
      }
      std::sort(cands.begin(), cands.end());
      const int take = std::min<int>(pcfg.k_nearest, static_cast<int>(cands.size()));
      for (int k = 0; k < take; ++k) {
        const int u = cands[k].second;
        const auto w = step_weight(g.vertices()[u].position, w_v.position, w_v.t - 1, kin.radius,
                                   cfg, combined, reserved);
        if (!w) continue;
        g.add_edge({u, w_idx, (w_v.position - g.vertices()[u].position) / cfg.dt, *w});
      }
    }
  }
  return g;
}

ShortestPaths shortest_paths(const PlanGraph& graph) {
  const int n = graph.vertex_count();
  ShortestPaths sp;
  sp.cost.assign(n, kUnreachable);
  sp.parent_edge.assign(n, -1);
  sp.cost[0] = 0.0;

  // Time layers are a topological order; stable sort keeps insertion order
  // inside a layer, which is what makes tie-breaking deterministic.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return graph.vertices()[a].t < graph.vertices()[b].t; });

  for (const int u : order) {
    if (sp.cost[u] == kUnreachable) continue;
    for (const int ei : graph.out_edges(u)) {
      const PlanEdge& e = graph.edges()[ei];
      const double cand = sp.cost[u] + e.weight;
      if (cand < sp.cost[e.to]) {
        sp.cost[e.to] = cand;
        sp.parent_edge[e.to] = ei;
      }
    }
  }
  return sp;
}

EvacuationPlan extract_plan(const PlanGraph& graph, const ShortestPaths& sp,
                            const IncidentZones& zones, const OccupancyField& combined,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            const ZoneSet* reserved) {
  struct Candidate {
    double cost;
    int idx;
  };
  std::vector<Candidate> candidates;
  for (int i = 0; i < graph.vertex_count(); ++i) {
    const PlanVertex& v = graph.vertices()[i];
    if (!v.expandable || sp.cost[i] == kUnreachable) continue;
    if (ball_parks(v.position, kin.radius, zones.parking, cfg))
      candidates.push_back({sp.cost[i], i});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.idx < b.idx;
  });

  for (const Candidate& cand : candidates) {
    const PlanVertex& v = graph.vertices()[cand.idx];
    // Hover window: the drone occupies its parking cells from arrival to t_end.
    const CellSet cells = cells_of_ball(v.position, kin.radius, cfg);
    ZoneSet hover;
    for (const GridCell& c : cells)
      for (TimeStep t = v.t; t <= zones.t_end; ++t) hover.insert({c, t});
    if (reserved && hover.intersects(*reserved)) continue;  // spot already taken
    const auto hover_w = edge_weight(hover, combined);
    if (!hover_w) continue;

    // Walk the shortest-path tree back to the root.
    std::vector<int> path_edges;
    for (int cur = cand.idx; sp.parent_edge[cur] != -1;
         cur = graph.edges()[sp.parent_edge[cur]].from)
      path_edges.push_back(sp.parent_edge[cur]);
    std::reverse(path_edges.begin(), path_edges.end());

    EvacuationPlan plan;
    plan.id = graph.drone;
    plan.target = v.position;
    plan.cost = cand.cost + *hover_w;
    plan.psafe = std::exp(-plan.cost);

    Vec3 vel = graph.root_velocity;
    std::vector<TimedPose> poses;
    poses.push_back({zones.t0, graph.vertices()[0].position});
    for (const int ei : path_edges) {
      const PlanEdge& e = graph.edges()[ei];
      plan.plan.actions.push_back({e.velocity - vel});
      vel = e.velocity;
      poses.push_back({graph.vertices()[e.to].t, graph.vertices()[e.to].position});
    }
    for (TimeStep t = v.t; t < zones.t_end; ++t) {
      plan.plan.actions.push_back({Vec3::Zero() - vel});
      vel = Vec3::Zero();
      poses.push_back({t + 1, v.position});
    }
    plan.footprint = footprint_of_path(poses, kin.radius, cfg);
    return plan;
  }
  throw CapacityError("no reachable parking vertex within the planning budget", graph.drone);
}

FormationPlan assemble_formation(std::span<const DroneState> evacuees,
                                 const IncidentZones& zones, const OccupancyField& combined,
                                 const std::map<DroneId, double>& alphas,
                                 const StageConfig& cfg, const KinematicConfig& kin,
                                 const PlannerConfig& pcfg, std::uint64_t seed,
                                 const ZoneSet& base_reserved, int threads) {
  FormationPlan out;
  const int n = static_cast<int>(evacuees.size());
  if (n == 0) return out;

  // Solo phase: plan every drone independently (only the ongoing show is
  // reserved). Per-drone seeds keep this phase order- and thread-agnostic.
  struct Solo {
    std::optional<EvacuationPlan> plan;
    std::string error;
  };
  std::vector<Solo> solos(n);
  parallel_for(n, threads, [&](int i) {
    try {
      const PlanGraph g =
          grow_graph(evacuees[i], zones, combined, cfg, kin, pcfg,
                     derive_seed(seed, static_cast<std::uint64_t>(evacuees[i].id), 0),
                     pcfg.vertex_budget, &base_reserved);
      const ShortestPaths sp = shortest_paths(g);
      solos[i].plan = extract_plan(g, sp, zones, combined, cfg, kin, &base_reserved);
    } catch (const CapacityError& e) {
      solos[i].error = e.what();
    }
  });

  // Priority: riskiest solo plan first, ties by ascending id.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa = solos[a].plan ? solos[a].plan->psafe : -1.0;
    const double pb = solos[b].plan ? solos[b].plan->psafe : -1.0;
    if (pa != pb) return pa < pb;
    return evacuees[a].id < evacuees[b].id;
  });

  ZoneSet reserved = base_reserved;
  for (const int i : order) {
    const DroneId id = evacuees[i].id;
    std::optional<EvacuationPlan> chosen;
    std::string error = solos[i].error;
    if (solos[i].plan && !solos[i].plan->footprint.intersects(reserved)) {
      chosen = solos[i].plan;  // untouched by earlier drones, keep the solo plan
    } else {
      try {
        const PlanGraph g = grow_graph(evacuees[i], zones, combined, cfg, kin, pcfg,
                                       derive_seed(seed, static_cast<std::uint64_t>(id), 1),
                                       pcfg.vertex_budget, &reserved);
        const ShortestPaths sp = shortest_paths(g);
        chosen = extract_plan(g, sp, zones, combined, cfg, kin, &reserved);
      } catch (const CapacityError& e) {
        error = e.what();
      }
    }
    if (chosen) {
      reserved.merge(chosen->footprint);
      const auto it = alphas.find(id);
      const double alpha = it != alphas.end() ? it->second : pcfg.alpha_default;
      out.score += alpha * chosen->psafe;
      out.plans.emplace(id, std::move(*chosen));
    } else {
      out.failures.emplace_back(
          id, error.empty() ? "planner capacity exhausted; consider raising vertex_budget"
                            : error + "; consider raising vertex_budget");
    }
  }
  std::sort(out.failures.begin(), out.failures.end());
  return out;
}

}  // namespace skypark
