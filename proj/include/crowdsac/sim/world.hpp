#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "crowdsac/rng.hpp"

namespace crowdsac::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
// z-component of the 3-D cross product.
inline double det(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

inline constexpr std::size_t kObservableDim = 5;
inline constexpr std::size_t kHiddenDim = 4;
inline constexpr std::size_t kFullDim = kObservableDim + kHiddenDim;

using ObservableState = std::array<double, kObservableDim>;
using FullState = std::array<double, kFullDim>;

struct AgentState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
  Vec2 goal;
  double v_pref = 1.0;
  double heading = 0.0;

  // [px, py, vx, vy, r]
  ObservableState observable() const;
  // [gx, gy, v_pref, heading]
  std::array<double, kHiddenDim> hidden() const;
  FullState full() const;
};

enum class Scenario { kCircle, kSquare };

struct OrcaParams {
  double time_horizon = 5.0;
  double neighbor_dist = 10.0;
  // Non-positive means "use the agent's v_pref".
  double max_speed = 0.0;
};

struct SimConfig {
  Scenario scenario = Scenario::kCircle;
  int n_obstacles = 1;
  double dt = 0.25;
  double t_max = 25.0;
  double r_circle = 4.0;
  double arena = 10.0;  // square side length, centered on the origin
  double robot_radius = 0.3;
  double obstacle_radius = 0.3;
  double v_pref = 1.0;
  double angular_jitter = M_PI / 18.0;
  double radial_jitter = 0.3;
  OrcaParams orca;

  void validate() const;
};

struct WorldState {
  AgentState robot;
  std::vector<AgentState> obstacles;
  double t = 0.0;
  int steps = 0;
  double dt = 0.25;
  double t_max = 25.0;
  bool terminated = false;
  double d_start_to_goal = 0.0;
  OrcaParams orca;
};

struct JointObservation {
  FullState robot_full{};
  std::vector<ObservableState> obstacles;
};

inline constexpr int kActionCount = 81;
inline constexpr int kDirections = 16;
inline constexpr int kSpeeds = 5;

struct Action {
  int index = 0;
};

struct DecodedAction {
  double direction = 0.0;       // rad
  double speed_fraction = 0.0;  // multiple of v_pref
};

struct StepEvents {
  bool reached_goal = false;
  bool collided = false;
  bool timed_out = false;
  double d_min_step = std::numeric_limits<double>::infinity();

  bool terminal() const { return reached_goal || collided || timed_out; }
};

// Velocity of obstacle `obstacle_index` given the pre-step world.
using ObstaclePolicy = std::function<Vec2(const WorldState&, std::size_t obstacle_index)>;

DecodedAction decode_action(int index);
Vec2 action_velocity(int index, double v_pref);

double min_clearance(const WorldState& world);

// Collision outranks goal, goal outranks timeout; at most one flag is set.
StepEvents terminal_check(const WorldState& world);

double reward(const StepEvents& events, const WorldState& world, double d_start_to_goal);

/// Advances robot and obstacles synchronously; obstacle velocities are all
/// computed from the pre-step state.
std::pair<WorldState, StepEvents> step(const WorldState& world, Action robot_action,
                                       const ObstaclePolicy& obstacle_policy);

JointObservation observe(const WorldState& world);

WorldState spawn_circle(const SimConfig& config, int n_obstacles, Rng& rng);
WorldState spawn_square(const SimConfig& config, int n_obstacles, Rng& rng);
WorldState spawn(const SimConfig& config, Rng& rng);

// Upper bound on steps per episode: ceil(t_max / dt).
int max_episode_steps(double t_max, double dt);

}  // namespace crowdsac::sim
