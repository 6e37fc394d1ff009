#include "crowdsac/sim/world.hpp"

#include <algorithm>
#include <string>

#include "crowdsac/errors.hpp"

namespace crowdsac::sim {

ObservableState AgentState::observable() const {
  return {position.x, position.y, velocity.x, velocity.y, radius};
}

std::array<double, kHiddenDim> AgentState::hidden() const {
  return {goal.x, goal.y, v_pref, heading};
}

FullState AgentState::full() const {
  return {position.x, position.y, velocity.x, velocity.y, radius,
          goal.x,     goal.y,     v_pref,     heading};
}

void SimConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("simulator field '") + field + "' must be positive");
    }
  };
  if (n_obstacles < 0) throw ConfigError("simulator field 'n_obstacles' must be >= 0");
  positive(dt, "dt");
  positive(t_max, "t_max");
  positive(r_circle, "r_circle");
  positive(arena, "arena");
  positive(robot_radius, "robot_radius");
  positive(obstacle_radius, "obstacle_radius");
  positive(v_pref, "v_pref");
  positive(orca.time_horizon, "orca_time_horizon");
  positive(orca.neighbor_dist, "orca_neighbor_dist");
  if (angular_jitter < 0 || radial_jitter < 0) throw ConfigError("spawn jitter must be >= 0");
}

DecodedAction decode_action(int index) {
  if (index < 0 || index >= kActionCount) {
    throw InvalidInput("invalid action index " + std::to_string(index));
  }
  if (index == 0) return {};
  const int k = (index - 1) / kSpeeds;
  const int m = (index - 1) % kSpeeds + 1;
  return {k * M_PI / 8.0, m * 0.2};
}

Vec2 action_velocity(int index, double v_pref) {
  const auto a = decode_action(index);
  if (a.speed_fraction == 0.0) return {};
  const double speed = a.speed_fraction * v_pref;
  return {speed * std::cos(a.direction), speed * std::sin(a.direction)};
}

double min_clearance(const WorldState& world) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : world.obstacles) {
    const double c = (world.robot.position - o.position).norm() - (world.robot.radius + o.radius);
    best = std::min(best, c);
  }
  return best;
}

StepEvents terminal_check(const WorldState& world) {
  StepEvents ev;
  ev.d_min_step = min_clearance(world);
  if (ev.d_min_step < 0.0) {
    ev.collided = true;
  } else if ((world.robot.position - world.robot.goal).norm() <= world.robot.radius) {
    ev.reached_goal = true;
  } else if (world.t >= world.t_max - 1e-9) {
    ev.timed_out = true;
  }
  return ev;
}

double reward(const StepEvents& events, const WorldState& world, double d_start_to_goal) {
  if (!(d_start_to_goal > 0.0)) throw InvalidInput("reward: d_start_to_goal must be positive");
  const double d_min = events.d_min_step;
  if (events.reached_goal) return 1.0;
  if (d_min > 0.0 && d_min < 0.2) return -0.1 + d_min / 2.0;
  if (d_min < 0.0) return -0.25;
  if (events.timed_out) {
    const double remaining = (world.robot.goal - world.robot.position).norm();
    return (d_start_to_goal - remaining) / d_start_to_goal * 0.5;
  }
  return 0.0;
}

std::pair<WorldState, StepEvents> step(const WorldState& world, Action robot_action,
                                       const ObstaclePolicy& obstacle_policy) {
  if (world.terminated) throw UsageError("step() on a terminated episode");
  std::vector<Vec2> obstacle_velocity(world.obstacles.size());
  for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
    obstacle_velocity[i] = obstacle_policy(world, i);
  }

  WorldState next = world;
  auto& robot = next.robot;
  robot.velocity = action_velocity(robot_action.index, robot.v_pref);
  robot.position += world.dt * robot.velocity;
  if (robot.velocity.norm_sq() > 0.0) robot.heading = std::atan2(robot.velocity.y, robot.velocity.x);

  for (std::size_t i = 0; i < next.obstacles.size(); ++i) {
    auto& o = next.obstacles[i];
    o.velocity = obstacle_velocity[i];
    o.position += world.dt * o.velocity;
    if (o.velocity.norm_sq() > 0.0) o.heading = std::atan2(o.velocity.y, o.velocity.x);
  }
  next.steps = world.steps + 1;
  next.t = next.steps * next.dt;

  StepEvents ev = terminal_check(next);
  next.terminated = ev.terminal();
  return {std::move(next), ev};
}

JointObservation observe(const WorldState& world) {
  JointObservation obs;
  obs.robot_full = world.robot.full();
  obs.obstacles.reserve(world.obstacles.size());
  for (const auto& o : world.obstacles) obs.obstacles.push_back(o.observable());
  return obs;
}

namespace {

struct Placement {
  Vec2 start;
  Vec2 goal;
  double radius;
};

bool overlaps(const Placement& p, const std::vector<Placement>& placed) {
  for (const auto& q : placed) {
    const double min_dist = p.radius + q.radius;
    if ((p.start - q.start).norm() < min_dist || (p.goal - q.goal).norm() < min_dist) return true;
  }
  return false;
}

AgentState make_agent(const Placement& p, double v_pref) {
  AgentState a;
  a.position = p.start;
  a.goal = p.goal;
  a.radius = p.radius;
  a.v_pref = v_pref;
  const Vec2 d = p.goal - p.start;
  a.heading = std::atan2(d.y, d.x);
  return a;
}

template <typename Sampler>
WorldState populate(const SimConfig& config, int n_obstacles, Vec2 robot_start, Vec2 robot_goal,
                    Sampler&& sample) {
  config.validate();
  if (n_obstacles < 0) throw ConfigError("n_obstacles must be >= 0");
  WorldState world;
  world.dt = config.dt;
  world.t_max = config.t_max;
  world.orca = config.orca;
  std::vector<Placement> placed{{robot_start, robot_goal, config.robot_radius}};
  world.robot = make_agent(placed.front(), config.v_pref);
  world.d_start_to_goal = (robot_goal - robot_start).norm();

  constexpr int kMaxResamples = 100;
  for (int i = 0; i < n_obstacles; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt <= kMaxResamples && !ok; ++attempt) {
      Placement p = sample();
      p.radius = config.obstacle_radius;
      if (!overlaps(p, placed)) {
        placed.push_back(p);
        world.obstacles.push_back(make_agent(p, config.v_pref));
        ok = true;
      }
    }
    if (!ok) {
      throw SpawnError("could not place obstacle " + std::to_string(i) + " without overlap after " +
                       std::to_string(kMaxResamples) + " resamples");
    }
  }
  return world;
}

}  // namespace

WorldState spawn_circle(const SimConfig& config, int n_obstacles, Rng& rng) {
  const double R = config.r_circle;
  return populate(config, n_obstacles, {0.0, -R}, {0.0, R}, [&] {
    double angle = uniform(rng, 0.0, 2.0 * M_PI);
    if (config.angular_jitter > 0) angle += uniform(rng, -config.angular_jitter, config.angular_jitter);
    double rho = R;
    if (config.radial_jitter > 0) rho += uniform(rng, -config.radial_jitter, config.radial_jitter);
    const Vec2 start{rho * std::cos(angle), rho * std::sin(angle)};
    return Placement{start, -start, 0.0};
  });
}

WorldState spawn_square(const SimConfig& config, int n_obstacles, Rng& rng) {
  const double half = config.arena / 2.0;
  const double edge = half - config.obstacle_radius;
  const double band = half / 2.0;
  const double lane = std::max(half - 1.0, config.robot_radius);
  return populate(config, n_obstacles, {0.0, -lane}, {0.0, lane}, [&] {
    const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const Vec2 start{side * uniform(rng, band, edge), uniform(rng, -edge, edge)};
    const Vec2 goal{-side * uniform(rng, band, edge), uniform(rng, -edge, edge)};
    return Placement{start, goal, 0.0};
  });
}

WorldState spawn(const SimConfig& config, Rng& rng) {
  return config.scenario == Scenario::kCircle ? spawn_circle(config, config.n_obstacles, rng)
                                              : spawn_square(config, config.n_obstacles, rng);
}

int max_episode_steps(double t_max, double dt) {
  return static_cast<int>(std::ceil(t_max / dt - 1e-9));
}

}  // namespace crowdsac::sim
