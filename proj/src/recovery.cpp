#include "skypark/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace skypark {

std::vector<Vacancy> find_vacancies(const std::map<DroneId, Trajectory>& assigned,
                                    std::span<const DroneId> missing_ids, TimeStep t_resume) {
  std::vector<Vacancy> out;
  for (const DroneId id : missing_ids) {
    const auto it = assigned.find(id);
    if (it == assigned.end()) continue;
    const Trajectory& traj = it->second;
    if (traj.empty() || traj.end_time() <= t_resume) continue;  // nothing left to fly
    Vacancy v;
    v.missing_id = id;
    const int offset = t_resume - traj.start_time();
    v.resume_position = traj.poses[offset].position;
    for (std::size_t k = offset + 1; k < traj.poses.size(); ++k)
      v.suffix_positions.push_back(traj.poses[k].position);
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Potential-based Hungarian method; requires rows <= cols. Returns the
// matched column per row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(a[0].size());
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double assignment_total(const std::vector<std::vector<double>>& cost,
                        const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (std::size_t r = 0; r < row_to_col.size(); ++r)
    if (row_to_col[r] >= 0) total += cost[r][row_to_col[r]];
  return total;
}

// Optimal total of the subproblem that excludes the given rows/columns.
double reduced_optimum(const std::vector<std::vector<double>>& cost,
                       const std::vector<char>& row_done, const std::vector<char>& col_done) {
  std::vector<int> rows, cols;
  for (std::size_t r = 0; r < row_done.size(); ++r)
    if (!row_done[r]) rows.push_back(static_cast<int>(r));
  for (std::size_t c = 0; c < col_done.size(); ++c)
    if (!col_done[c]) cols.push_back(static_cast<int>(c));
  if (rows.empty()) return 0.0;
  std::vector<std::vector<double>> sub(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) sub[r][c] = cost[rows[r]][cols[c]];
  const auto match = hungarian(sub);
  return assignment_total(sub, match);
}

constexpr int kLexRefineLimit = 32;

}  // namespace

std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  if (cost.empty()) return {};
  const int n = static_cast<int>(cost.size());
  const int m = static_cast<int>(cost[0].size());
  if (n > m) {
    // Transpose, solve, invert the mapping.
    std::vector<std::vector<double>> tr(m, std::vector<double>(n));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < m; ++c) tr[c][r] = cost[r][c];
    const auto col_to_row = min_cost_assignment(tr);
    std::vector<int> row_to_col(n, -1);
    for (int c = 0; c < m; ++c)
      if (col_to_row[c] >= 0) row_to_col[col_to_row[c]] = c;
    return row_to_col;
  }

  auto best = hungarian(cost);
  if (n > kLexRefineLimit || m > kLexRefineLimit) return best;

  // Lexicographic refinement: pin each row, in order, to the smallest column
  // that still admits an optimal completion, so equal-cost matchings resolve
  // to the smallest id pairs.
  const double optimum = assignment_total(cost, best);
  const double tol = 1e-9 * std::max(1.0, std::abs(optimum));
  std::vector<char> row_done(n, 0), col_done(m, 0);
  std::vector<int> pinned(n, -1);
  double pinned_cost = 0.0;
  for (int r = 0; r < n; ++r) {
    row_done[r] = 1;
    for (int c = 0; c < m; ++c) {
      if (col_done[c]) continue;
      col_done[c] = 1;
      const double total = pinned_cost + cost[r][c] + reduced_optimum(cost, row_done, col_done);
      if (total <= optimum + tol) {
        pinned[r] = c;
        pinned_cost += cost[r][c];
        break;
      }
      col_done[c] = 0;
    }
  }
  return pinned;
}

RecoveryAssignment assign_hidden(std::span<const DroneState> hidden,
                                 std::span<const Vacancy> vacancies) {
  RecoveryAssignment out;
  if (hidden.empty() || vacancies.empty()) {
    for (std::size_t c = 0; c < vacancies.size(); ++c) out.unfilled.push_back(static_cast<int>(c));
    return out;
  }
  std::vector<std::vector<double>> cost(hidden.size(),
                                        std::vector<double>(vacancies.size(), 0.0));
  for (std::size_t r = 0; r < hidden.size(); ++r)
    for (std::size_t c = 0; c < vacancies.size(); ++c)
      cost[r][c] = (hidden[r].position - vacancies[c].resume_position).norm();

  const auto row_to_col = min_cost_assignment(cost);
  std::vector<char> filled(vacancies.size(), 0);
  for (std::size_t r = 0; r < hidden.size(); ++r) {
    if (row_to_col[r] < 0) continue;
    out.pairs.emplace_back(hidden[r].id, row_to_col[r]);
    out.total_distance += cost[r][row_to_col[r]];
    filled[row_to_col[r]] = 1;
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (std::size_t c = 0; c < vacancies.size(); ++c)
    if (!filled[c]) out.unfilled.push_back(static_cast<int>(c));
  return out;
}

namespace {

// Fastest rest-to-rest speed profile: ramp up, cruise, ramp down, with the
// final step slow enough to stop right after arrival.
std::vector<double> max_profile(int steps, double dt, const KinematicConfig& kin) {
  std::vector<double> s(steps);
  const double a = kin.a_max * dt;
  for (int k = 1; k <= steps; ++k)
    s[k - 1] = std::min(kin.v_max, std::min(k * a, (steps - k + 1) * a));
  return s;
}

double profile_reach(int steps, double dt, const KinematicConfig& kin) {
  double d = 0.0;
  for (const double s : max_profile(steps, dt, kin)) d += s * dt;
  return d;
}

}  // namespace

int straight_line_steps(double dist, double dt, const KinematicConfig& kin) {
  if (dist <= 1e-12) return 0;
  int steps = 1;
  while (profile_reach(steps, dt, kin) < dist * (1.0 - 1e-12)) ++steps;
  return steps;
}

namespace {

// With a transit altitude the flight threads the free layer between the
// parking band and the show volume: up, across, up into the slot.
std::vector<Vec3> flight_waypoints(const Vec3& from, const Vec3& to,
                                   std::optional<double> transit_z) {
  std::vector<Vec3> wps;
  if (transit_z) {
    const Vec3 up(from.x(), from.y(), *transit_z);
    const Vec3 across(to.x(), to.y(), *transit_z);
    Vec3 cur = from;
    for (const Vec3& wp : {up, across, to}) {
      if ((wp - cur).norm() > 1e-12) {
        wps.push_back(wp);
        cur = wp;
      }
    }
  }
  if (wps.empty()) wps.push_back(to);
  return wps;
}

Plan plan_flight(const DroneState& state, const Vec3& target, std::optional<double> transit_z,
                 int steps, double dt, const KinematicConfig& kin, DroneId id) {
  const int need = recovery_travel_steps(state.position, target, transit_z, dt, kin);
  if (need > steps)
    throw CapacityError("target unreachable before its required arrival time", id);

  std::vector<Vec3> positions;
  positions.reserve(steps);
  Vec3 cur = state.position;
  bool first_leg = true;
  if (need > 0) {
    for (const Vec3& wp : flight_waypoints(state.position, target, transit_z)) {
      const Vec3 delta = wp - cur;
      const double dist = delta.norm();
      const int leg = straight_line_steps(dist, dt, kin);
      if (leg == 0) continue;
      if (!first_leg) positions.push_back(cur);  // full stop before turning the corner
      first_leg = false;
      const auto profile = max_profile(leg, dt, kin);
      const double reach = profile_reach(leg, dt, kin);
      const double lambda = dist / reach;  // uniform scale keeps the ramps feasible
      double progress = 0.0;
      for (int k = 0; k < leg; ++k) {
        progress += lambda * profile[k] * dt;
        positions.push_back(cur + delta * (progress / dist));
      }
      positions.back() = wp;  // land on the waypoint, not an ulp away
      cur = wp;
    }
  }
  const Vec3 rest = positions.empty() ? state.position : positions.back();
  while (static_cast<int>(positions.size()) < steps) positions.push_back(rest);
  return plan_from_positions(state, positions, dt, kin);
}

}  // namespace

int recovery_travel_steps(const Vec3& from, const Vec3& to, std::optional<double> transit_z,
                          double dt, const KinematicConfig& kin) {
  if ((to - from).norm() <= 1e-12) return 0;
  int total = 0;
  int legs = 0;
  Vec3 cur = from;
  for (const Vec3& wp : flight_waypoints(from, to, transit_z)) {
    const int leg = straight_line_steps((wp - cur).norm(), dt, kin);
    if (leg == 0) continue;
    total += leg + (legs > 0 ? 1 : 0);  // one stop step between legs
    ++legs;
    cur = wp;
  }
  return total;
}

Plan plan_straight_line(const DroneState& state, const Vec3& target, int steps, double dt,
                        const KinematicConfig& kin, DroneId id) {
  return plan_flight(state, target, std::nullopt, steps, dt, kin, id);
}

TimeStep resume_time(const RecoveryAssignment& assignment, std::span<const DroneState> hidden,
                     std::span<const Vacancy> vacancies, TimeStep t_end,
                     std::optional<double> transit_z, double dt, const KinematicConfig& kin) {
  int max_steps = 0;
  for (const auto& [hid, vidx] : assignment.pairs) {
    const auto it = std::find_if(hidden.begin(), hidden.end(),
                                 [&](const DroneState& s) { return s.id == hid; });
    max_steps = std::max(
        max_steps, recovery_travel_steps(it->position, vacancies[vidx].resume_position,
                                         transit_z, dt, kin));
  }
  return t_end + max_steps;
}

FormationPlan plan_recovery(RecoveryAssignment& assignment, std::span<const DroneState> hidden,
                            std::span<const Vacancy> vacancies, TimeStep t_end,
                            TimeStep t_resume, std::optional<double> transit_z,
                            const StageConfig& cfg, const KinematicConfig& kin,
                            const ZoneSet& base_reserved) {
  FormationPlan out;
  auto state_of = [&](DroneId id) {
    return std::find_if(hidden.begin(), hidden.end(),
                        [&](const DroneState& s) { return s.id == id; });
  };

  // Until it departs (or forever, if it stays dark) every hidden drone
  // occupies its own parking tiles.
  std::map<DroneId, ZoneSet> occupied;
  for (const DroneState& h : hidden) {
    ZoneSet z;
    const CellSet cells = cells_of_ball(h.position, kin.radius, cfg);
    for (const GridCell& c : cells)
      for (TimeStep t = t_end; t <= t_resume; ++t) z.insert({c, t});
    occupied.emplace(h.id, std::move(z));
  }

  // Longest flights first; they have the least slack for delays.
  std::vector<std::pair<DroneId, int>> order = assignment.pairs;
  std::vector<int> travel(order.size(), 0);
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    const double da = (state_of(a.first)->position - vacancies[a.second].resume_position).norm();
    const double db = (state_of(b.first)->position - vacancies[b.second].resume_position).norm();
    if (da != db) return da > db;
    return a.first < b.first;
  });

  std::vector<std::pair<DroneId, int>> kept;
  for (const auto& [hid, vidx] : order) {
    const DroneState& h = *state_of(hid);
    const Vacancy& vac = vacancies[vidx];
    const int need =
        recovery_travel_steps(h.position, vac.resume_position, transit_z, cfg.dt, kin);
    const int window = t_resume - t_end;
    bool placed = false;
    std::string error = need > window
                            ? "target unreachable before its required arrival time"
                            : "recovery flight blocked by reservations within its window";
    for (int delay = 0; delay + need <= window; ++delay) {
      Plan plan;
      DroneState start = h;
      start.velocity = Vec3::Zero();
      for (int k = 0; k < delay; ++k) plan.actions.push_back({Vec3::Zero()});
      Plan flight;
      try {
        flight = plan_flight(start, vac.resume_position, transit_z, window - delay, cfg.dt, kin,
                             hid);
      } catch (const CapacityError& e) {
        error = e.what();
        break;
      }
      plan.actions.insert(plan.actions.end(), flight.actions.begin(), flight.actions.end());
      const Trajectory traj = execute_plan(start, plan, t_end, cfg.dt, kin);
      ZoneSet fp = footprint_of_path(traj.poses, kin.radius, cfg);
      bool conflict = fp.intersects(base_reserved);
      if (!conflict)
        for (const auto& [other, zone] : occupied)
          if (other != hid && fp.intersects(zone)) {
            conflict = true;
            break;
          }
      if (conflict) continue;

      EvacuationPlan ev;
      ev.id = hid;
      ev.plan = std::move(plan);
      ev.target = vac.resume_position;
      ev.cost = 0.0;   // recovery flies through a zero occupancy field
      ev.psafe = 1.0;
      ev.footprint = std::move(fp);
      occupied[hid] = ev.footprint;
      out.score += ev.psafe;
      out.plans.emplace(hid, std::move(ev));
      kept.emplace_back(hid, vidx);
      placed = true;
      break;
    }
    if (!placed) {
      out.failures.emplace_back(hid, error);
      assignment.unfilled.push_back(vidx);
    }
  }
  std::sort(kept.begin(), kept.end());
  std::sort(out.failures.begin(), out.failures.end());
  std::sort(assignment.unfilled.begin(), assignment.unfilled.end());
  assignment.pairs = std::move(kept);
  assignment.total_distance = 0.0;
  for (const auto& [hid, vidx] : assignment.pairs)
    assignment.total_distance += (state_of(hid)->position - vacancies[vidx].resume_position).norm();
  return out;
}

std::vector<ResumedDrone> resume_show(const RecoveryAssignment& assignment,
                                      std::span<const Vacancy> vacancies, double dt,
                                      const KinematicConfig& kin) {
  std::vector<ResumedDrone> out;
  for (const auto& [hid, vidx] : assignment.pairs) {
    const Vacancy& vac = vacancies[vidx];
    ResumedDrone r;
    r.hidden_id = hid;
    r.missing_id = vac.missing_id;
    // Dock onto the slot: the flight ends within float error of the resume
    // point; station-keeping aligns exactly so the suffix replays bit-true.
    r.state = DroneState{hid, vac.resume_position, Vec3::Zero(), DroneStatus::kActive};
    r.suffix_plan = plan_from_positions(r.state, vac.suffix_positions, dt, kin);
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(),
            [](const ResumedDrone& a, const ResumedDrone& b) { return a.hidden_id < b.hidden_id; });
  return out;
}

}  // namespace skypark
