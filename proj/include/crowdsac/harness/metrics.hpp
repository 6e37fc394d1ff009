#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crowdsac/dsac/dsac.hpp"

namespace crowdsac::harness {

// One agent at one step; agent_id 0 is the robot.
struct TrajectoryRow {
  int episode = 0;
  int step = 0;
  int agent_id = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

struct EpisodeRecord {
  dsac::Outcome outcome = dsac::Outcome::kNone;
  double duration = 0.0;  // s
  double min_clearance = 0.0;
  double cum_reward = 0.0;
  int steps = 0;
  std::vector<TrajectoryRow> trajectory;
};

struct EvalSummary {
  int episodes = 0;
  double success_rate = 0.0;
  double time_to_goal = 0.0;  // mean over successes; NaN without any
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_min_distance = 0.0;  // mean episode-min clearance; NaN without obstacles
  double mean_reward = 0.0;
};

// Throws InvalidInput for an empty set or a record without an outcome.
EvalSummary summarize(std::span<const EpisodeRecord> records);

using ActionPolicy = std::function<int(const sim::JointObservation&)>;
// Called after every step with the post-step world.
using StepHook = std::function<void(const sim::WorldState&, int step)>;

/// Rolls one episode from a fresh spawn drawn with `seed`.
EpisodeRecord run_episode(const sim::SimConfig& config, const ActionPolicy& policy, std::uint64_t seed,
                          int episode_id, const StepHook& hook = {});

// Seed for evaluation episode `index`; disjoint from the training streams.
std::uint64_t eval_seed(std::uint64_t base, int index);

/// Greedy evaluation of a frozen agent.
std::vector<EpisodeRecord> evaluate(const dsac::Agent& agent, const sim::SimConfig& config,
                                    int episodes, std::uint64_t base_seed);

// Trailing mean; the first window-1 entries average what is available.
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

// ---- CSV ------------------------------------------------------------------

std::string format_double(double v);

extern const char* const kTrainingCsvHeader;
std::string training_csv_row(const dsac::EpisodeLog& log);

extern const char* const kTrajectoryCsvHeader;
void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows);
// Header required; errors carry the 1-based line number.
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

extern const char* const kEvalCsvHeader;
void write_eval_csv(std::ostream& out, std::span<const EpisodeRecord> records);

}  // namespace crowdsac::harness
