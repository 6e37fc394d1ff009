#include "crowdsac/orca/orca.hpp"

#include <algorithm>
#include <cmath>

namespace crowdsac::orca {

namespace {

constexpr double kEpsilon = 1e-9;

// Directed boundary line; the permitted side is to the left of `direction`.
struct Line {
  Vec2 point;
  Vec2 direction;
};

Line to_line(const HalfPlane& h) { return {h.point, {h.normal.y, -h.normal.x}}; }

Vec2 normalized(Vec2 v) {
  const double n = v.norm();
  return n > 0 ? v / n : Vec2{};
}

// Optimizes along line `line_no` subject to lines [0, line_no) and the disk.
bool solve_on_line(const std::vector<Line>& lines, std::size_t line_no, double radius, Vec2 opt,
                   bool direction_opt, Vec2& result) {
  const Line& ln = lines[line_no];
  const double dot_product = sim::dot(ln.point, ln.direction);
  const double discriminant = dot_product * dot_product + radius * radius - ln.point.norm_sq();
  if (discriminant < 0.0) return false;
  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = sim::det(ln.direction, lines[i].direction);
    const double numerator = sim::det(lines[i].direction, ln.point - lines[i].point);
    if (std::fabs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = ln.point + (sim::dot(opt, ln.direction) > 0.0 ? t_right : t_left) * ln.direction;
  } else {
    const double t = sim::dot(ln.direction, opt - ln.point);
    result = ln.point + std::clamp(t, t_left, t_right) * ln.direction;
  }
  return true;
}

// Incremental 2-D LP. Returns lines.size() on success, else the failing line.
std::size_t solve_2d(const std::vector<Line>& lines, double radius, Vec2 opt, bool direction_opt,
                     Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (opt.norm_sq() > radius * radius) {
    result = normalized(opt) * radius;
  } else {
    result = opt;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (sim::det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!solve_on_line(lines, i, radius, opt, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

// Lifted LP: minimizes the largest violation from `begin` on.
void solve_3d(const std::vector<Line>& lines, std::size_t begin, double radius, Vec2& result) {
  double distance = 0.0;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (sim::det(lines[i].direction, lines[i].point - result) <= distance) continue;
    std::vector<Line> projected;
    projected.reserve(i);
    for (std::size_t j = 0; j < i; ++j) {
      Line line;
      const double determinant = sim::det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kEpsilon) {
        if (sim::dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (sim::det(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                         lines[i].direction;
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }
    const Vec2 previous = result;
    const Vec2 toward{-lines[i].direction.y, lines[i].direction.x};
    if (solve_2d(projected, radius, toward, true, result) < projected.size()) {
      // Only numerical error can fail here; keep the previous iterate.
      result = previous;
    }
    distance = sim::det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

std::vector<HalfPlane> orca_halfplanes(const AgentState& self, std::span<const AgentState> neighbors,
                                       const OrcaParams& params, double dt) {
  std::vector<HalfPlane> planes;
  planes.reserve(neighbors.size());
  const double inv_tau = 1.0 / params.time_horizon;
  for (const auto& other : neighbors) {
    const Vec2 rel_pos = other.position - self.position;
    const Vec2 rel_vel = self.velocity - other.velocity;
    const double dist_sq = rel_pos.norm_sq();
    const double combined = self.radius + other.radius;
    const double combined_sq = combined * combined;

    Vec2 direction;
    Vec2 u;
    if (dist_sq > combined_sq) {
      // Truncated cone: cut-off disk centered at rel_pos / tau.
      const Vec2 w = rel_vel - inv_tau * rel_pos;
      const double w_len_sq = w.norm_sq();
      const double dot1 = sim::dot(w, rel_pos);
      if (dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq) {
        const double w_len = std::sqrt(w_len_sq);
        const Vec2 unit_w = w / w_len;
        direction = {unit_w.y, -unit_w.x};
        u = (combined * inv_tau - w_len) * unit_w;
      } else {
        const double leg = std::sqrt(dist_sq - combined_sq);
        if (sim::det(rel_pos, w) > 0.0) {
          direction = Vec2{rel_pos.x * leg - rel_pos.y * combined,
                           rel_pos.x * combined + rel_pos.y * leg} /
                      dist_sq;
        } else {
          direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined,
                            -rel_pos.x * combined + rel_pos.y * leg} /
                      dist_sq;
        }
        u = sim::dot(rel_vel, direction) * direction - rel_vel;
      }
    } else {
      // Overlapping: push apart within one step.
      const double inv_dt = 1.0 / dt;
      const Vec2 w = rel_vel - inv_dt * rel_pos;
      const double w_len = w.norm();
      const Vec2 unit_w = w_len > kEpsilon ? w / w_len : normalized(-rel_pos);
      direction = {unit_w.y, -unit_w.x};
      u = (combined * inv_dt - w_len) * unit_w;
    }
    planes.push_back({self.velocity + 0.5 * u, {-direction.y, direction.x}});
  }
  return planes;
}

Vec2 solve_velocity(Vec2 pref_v, std::span<const HalfPlane> planes, double max_speed) {
  std::vector<Line> lines;
  lines.reserve(planes.size());
  for (const auto& p : planes) lines.push_back(to_line(p));
  Vec2 result;
  const std::size_t fail = solve_2d(lines, max_speed, pref_v, false, result);
  if (fail < lines.size()) solve_3d(lines, fail, max_speed, result);
  return result;
}

Vec2 preferred_velocity(const AgentState& agent, double dt) {
  const Vec2 to_goal = agent.goal - agent.position;
  const double dist = to_goal.norm();
  if (dist == 0.0) return {};
  // Arrive exactly instead of overshooting on the final step.
  if (dist < agent.v_pref * dt) return to_goal / dt;
  return to_goal / dist * agent.v_pref;
}

Vec2 orca_velocity(std::span<const AgentState> agents, std::size_t index, const OrcaParams& params,
                   double dt) {
  const AgentState& self = agents[index];
  std::vector<AgentState> neighbors;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    if (j == index) continue;
    if ((agents[j].position - self.position).norm() <= params.neighbor_dist) {
      neighbors.push_back(agents[j]);
    }
  }
  const double max_speed = params.max_speed > 0.0 ? params.max_speed : self.v_pref;
  const auto planes = orca_halfplanes(self, neighbors, params, dt);
  return solve_velocity(preferred_velocity(self, dt), planes, max_speed);
}

Vec2 orca_policy(const sim::WorldState& world, std::size_t agent_index) {
  std::vector<AgentState> agents;
  agents.reserve(world.obstacles.size() + 1);
  agents.push_back(world.robot);
  agents.insert(agents.end(), world.obstacles.begin(), world.obstacles.end());
  return orca_velocity(agents, agent_index, world.orca, world.dt);
}

sim::ObstaclePolicy obstacle_policy() {
  return [](const sim::WorldState& world, std::size_t obstacle_index) {
    return orca_policy(world, obstacle_index + 1);
  };
}

}  // namespace crowdsac::orca
