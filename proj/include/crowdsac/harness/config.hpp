#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "crowdsac/dsac/dsac.hpp"
#include "crowdsac/enc/encoders.hpp"
#include "crowdsac/sim/world.hpp"

namespace crowdsac::harness {

/// Everything a run needs. Text form is INI:
///
///   [run]     episodes, seed, checkpoint_every, eval_episodes, out
///   [encoder] variant, pool, robot_input
///   [sim]     scenario, n_obstacles, dt, t_max, r_circle, arena, robot_radius,
///             obstacle_radius, v_pref, angular_jitter, radial_jitter,
///             orca_time_horizon, orca_neighbor_dist, orca_max_speed
///   [dsac]    gamma, tau, lr, batch_size, alpha, auto_entropy, target_entropy,
///             replay_capacity, hidden
///
/// Missing keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  enc::EncoderSpec encoder;
  sim::SimConfig sim;
  dsac::DsacConfig dsac;
  int episodes = 2000;
  std::uint64_t seed = 0;
  int checkpoint_every = 100;
  int eval_episodes = 100;
  std::string out_dir = "runs/default";

  // Keeps encoder.n_obstacles in step with sim.n_obstacles and checks ranges.
  void finalize();
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// "section.key" = value, with the same validation as the file parser.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value);

// Canonical text; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const RunConfig& config);

// Identity of the network layout: two configs with equal hashes produce
// parameter stores with identical names and shapes.
std::string model_hash(const RunConfig& config);

std::string scenario_name(sim::Scenario s);
sim::Scenario parse_scenario(const std::string& text);

}  // namespace crowdsac::harness
