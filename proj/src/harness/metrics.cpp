#include "crowdsac/harness/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "crowdsac/errors.hpp"

namespace crowdsac::harness {

namespace {

constexpr std::uint64_t kEvalStream = 101;

TrajectoryRow row_of(const sim::AgentState& a, int episode, int step, int id) {
  return {episode, step, id, a.position.x, a.position.y, a.velocity.x, a.velocity.y};
}

void append_agents(std::vector<TrajectoryRow>& out, const sim::WorldState& w, int episode, int step) {
  out.push_back(row_of(w.robot, episode, step, 0));
  for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
    out.push_back(row_of(w.obstacles[i], episode, step, static_cast<int>(i) + 1));
  }
}

}  // namespace

EvalSummary summarize(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw InvalidInput("summarize: no episodes");
  EvalSummary s;
  s.episodes = static_cast<int>(records.size());
  int success = 0, collision = 0, timeout = 0, finite = 0;
  double ttg = 0.0, clearance = 0.0, reward = 0.0;
  for (const auto& r : records) {
    switch (r.outcome) {
      case dsac::Outcome::kSuccess:
        ++success;
        ttg += r.duration;
        break;
      case dsac::Outcome::kCollision: ++collision; break;
      case dsac::Outcome::kTimeout: ++timeout; break;
      case dsac::Outcome::kNone: throw InvalidInput("summarize: episode without an outcome");
    }
    if (std::isfinite(r.min_clearance)) {
      clearance += r.min_clearance;
      ++finite;
    }
    reward += r.cum_reward;
  }
  const double n = static_cast<double>(records.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.success_rate = success / n;
  s.collision_rate = collision / n;
  s.timeout_rate = timeout / n;
  s.time_to_goal = success > 0 ? ttg / success : nan;
  s.mean_min_distance = finite > 0 ? clearance / finite : nan;
  s.mean_reward = reward / n;
  return s;
}

EpisodeRecord run_episode(const sim::SimConfig& config, const ActionPolicy& policy, std::uint64_t seed,
                          int episode_id, const StepHook& hook) {
  dsac::CrowdEnvironment env(config);
  Rng rng(seed);
  auto obs = env.reset(rng);
  EpisodeRecord rec;
  append_agents(rec.trajectory, env.world(), episode_id, 0);
  bool done = false;
  while (!done) {
    auto result = env.step(policy(obs));
    ++rec.steps;
    rec.cum_reward += result.reward;
    append_agents(rec.trajectory, env.world(), episode_id, rec.steps);
    if (hook) hook(env.world(), rec.steps);
    done = result.done;
    if (done) rec.outcome = result.outcome;
    obs = std::move(result.obs);
  }
  rec.duration = env.world().t;
  rec.min_clearance = env.episode_min_clearance();
  return rec;
}

std::uint64_t eval_seed(std::uint64_t base, int index) {
  return derive_seed(derive_seed(base, kEvalStream), static_cast<std::uint64_t>(index));
}

std::vector<EpisodeRecord> evaluate(const dsac::Agent& agent, const sim::SimConfig& config,
                                    int episodes, std::uint64_t base_seed) {
  std::vector<EpisodeRecord> out;
  out.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  Rng unused(0);
  const ActionPolicy greedy = [&](const sim::JointObservation& obs) {
    return agent.act(obs, dsac::ActMode::kGreedy, unused);
  };
  for (int e = 0; e < episodes; ++e) out.push_back(run_episode(config, greedy, eval_seed(base_seed, e), e));
  return out;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw InvalidInput("moving_average: window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const char* const kTrainingCsvHeader =
    "episode,steps,cum_reward,outcome,alpha,critic_loss,policy_loss,buffer_size";

std::string training_csv_row(const dsac::EpisodeLog& log) {
  std::string s = std::to_string(log.episode) + "," + std::to_string(log.steps) + "," +
                  format_double(log.cum_reward) + "," + std::string(dsac::to_string(log.outcome)) + "," +
                  format_double(log.alpha) + ",";
  if (log.updates > 0) {
    s += format_double(log.critic_loss) + "," + format_double(log.policy_loss);
  } else {
    s += ",";
  }
  return s + "," + std::to_string(log.buffer_size);
}

const char* const kTrajectoryCsvHeader = "episode,step,agent_id,x,y,vx,vy";

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows) {
  out << kTrajectoryCsvHeader << "\n";
  for (const auto& r : rows) {
    out << r.episode << "," << r.step << "," << r.agent_id << "," << format_double(r.x) << ","
        << format_double(r.y) << "," << format_double(r.vx) << "," << format_double(r.vy) << "\n";
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::vector<TrajectoryRow> rows;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    fail("missing header");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryCsvHeader) fail("expected header '" + std::string(kTrajectoryCsvHeader) + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) fail("expected 7 fields, got " + std::to_string(cells.size()));
    TrajectoryRow r;
    auto as_int = [&](const std::string& c, const char* name) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size()) fail(std::string("bad ") + name + " '" + c + "'");
      return v;
    };
    auto as_double = [&](const std::string& c, const char* name) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size() || !std::isfinite(v)) fail(std::string("bad ") + name + " '" + c + "'");
      return v;
    };
    r.episode = as_int(cells[0], "episode");
    r.step = as_int(cells[1], "step");
    r.agent_id = as_int(cells[2], "agent_id");
    if (r.step < 0 || r.agent_id < 0) fail("step and agent_id must be non-negative");
    r.x = as_double(cells[3], "x");
    r.y = as_double(cells[4], "y");
    r.vx = as_double(cells[5], "vx");
    r.vy = as_double(cells[6], "vy");
    rows.push_back(r);
  }
  return rows;
}

const char* const kEvalCsvHeader = "episode,outcome,duration,steps,min_clearance,cum_reward";

void write_eval_csv(std::ostream& out, std::span<const EpisodeRecord> records) {
  out << kEvalCsvHeader << "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << i << "," << dsac::to_string(r.outcome) << "," << format_double(r.duration) << "," << r.steps
        << "," << format_double(r.min_clearance) << "," << format_double(r.cum_reward) << "\n";
  }
}

}  // namespace crowdsac::harness
