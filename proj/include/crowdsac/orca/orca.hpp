#pragma once

#include <span>
#include <vector>

#include "crowdsac/sim/world.hpp"

namespace crowdsac::orca {

using sim::AgentState;
using sim::OrcaParams;
using sim::Vec2;

/// Velocity-space half-plane {v : dot(v - point, normal) >= 0}. The normal
/// points out of the velocity obstacle, into the permitted side.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;

  // Positive when v lies on the forbidden side.
  double violation(Vec2 v) const { return -sim::dot(v - point, normal); }
  bool permits(Vec2 v, double tol = 1e-9) const { return violation(v) <= tol; }
};

/// One reciprocal constraint per neighbor (responsibility 1/2). Pairs that
/// already overlap are resolved over `dt` instead of the time horizon.
std::vector<HalfPlane> orca_halfplanes(const AgentState& self, std::span<const AgentState> neighbors,
                                       const OrcaParams& params, double dt);

/// Velocity nearest `pref_v` inside all half-planes and the disk of radius
/// `max_speed`; if that set is empty, the velocity minimizing the largest
/// violation.
Vec2 solve_velocity(Vec2 pref_v, std::span<const HalfPlane> planes, double max_speed);

Vec2 preferred_velocity(const AgentState& agent, double dt);

// ORCA velocity of agents[index] against every other agent within range.
Vec2 orca_velocity(std::span<const AgentState> agents, std::size_t index, const OrcaParams& params,
                   double dt);

// agent_index 0 is the robot, k > 0 is obstacle k-1.
Vec2 orca_policy(const sim::WorldState& world, std::size_t agent_index);

// Adapter for sim::step that drives every obstacle with orca_policy.
sim::ObstaclePolicy obstacle_policy();

}  // namespace crowdsac::orca
