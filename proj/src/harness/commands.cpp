#include "crowdsac/harness/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "crowdsac/diff/serialize.hpp"
#include "crowdsac/errors.hpp"
#include "crowdsac/harness/checks.hpp"
#include "crowdsac/harness/svg.hpp"

namespace crowdsac::harness {

using nlohmann::json;

namespace {

constexpr std::size_t kCurveWindow = 100;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::string checkpoint_name(int episode) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ep_%06d.ckpt", episode);
  return buf;
}

json summary_json(const EvalSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"episodes", s.episodes},
          {"success_rate", s.success_rate},
          {"time_to_goal", num(s.time_to_goal)},
          {"collision_rate", s.collision_rate},
          {"timeout_rate", s.timeout_rate},
          {"mean_min_distance", num(s.mean_min_distance)},
          {"mean_reward", s.mean_reward}};
}

dsac::Agent load_agent(const RunConfig& config, const fs::path& checkpoint) {
  validate_meta(load_meta(checkpoint), config);
  return dsac::Agent(config.encoder, config.dsac, diff::load_params(checkpoint));
}

}  // namespace

fs::path meta_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".json"); }

void save_checkpoint(const diff::ParameterStore& params, const RunConfig& config, int episode,
                     const fs::path& path) {
  diff::save_params(params, path);
  json meta = {{"encoder", std::string(enc::to_string(config.encoder.variant))},
               {"pool", std::string(enc::to_string(config.encoder.pool))},
               {"robot_input", std::string(enc::to_string(config.encoder.robot_input))},
               {"n_obstacles", config.encoder.n_obstacles},
               {"model_hash", model_hash(config)},
               {"episode", episode}};
  write_text(meta_path(path), meta.dump(2) + "\n");
}

CheckpointMeta load_meta(const fs::path& checkpoint) {
  std::ifstream in(meta_path(checkpoint));
  if (!in) throw ConfigError("checkpoint metadata missing: " + meta_path(checkpoint).string());
  try {
    const auto j = json::parse(in);
    CheckpointMeta m;
    m.encoder = j.at("encoder").get<std::string>();
    m.pool = j.at("pool").get<std::string>();
    m.robot_input = j.at("robot_input").get<std::string>();
    m.n_obstacles = j.at("n_obstacles").get<int>();
    m.model_hash = j.at("model_hash").get<std::string>();
    m.episode = j.at("episode").get<int>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint metadata " + meta_path(checkpoint).string() + ": " + e.what());
  }
}

void validate_meta(const CheckpointMeta& meta, const RunConfig& config) {
  const std::string want_encoder(enc::to_string(config.encoder.variant));
  const auto want_hash = model_hash(config);
  if (meta.encoder != want_encoder || meta.model_hash != want_hash) {
    throw ConfigError("checkpoint/config mismatch: checkpoint encoder " + meta.encoder + " (model " +
                      meta.model_hash + "), config encoder " + want_encoder + " (model " + want_hash + ")");
  }
}

std::string summary_text(const EvalSummary& s) {
  std::ostringstream o;
  o << "episodes " << s.episodes << "  success " << format_double(s.success_rate) << "  time_to_goal "
    << format_double(s.time_to_goal) << "  collision " << format_double(s.collision_rate) << "  timeout "
    << format_double(s.timeout_rate) << "  mean_min_distance " << format_double(s.mean_min_distance)
    << "  mean_reward " << format_double(s.mean_reward);
  return o.str();
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  const fs::path out(config.out_dir);
  fs::create_directories(out / "checkpoints");
  write_text(out / "config.ini", serialize_config(config));

  std::ofstream csv(out / "train.csv", std::ios::binary);
  if (!csv) throw ConfigError("cannot write " + (out / "train.csv").string());
  csv << kTrainingCsvHeader << "\n";

  dsac::CrowdEnvironment env(config.sim);
  Rng init(derive_seed(config.seed, 0));
  dsac::Agent agent(config.encoder, config.dsac, init);
  std::vector<double> rewards;

  dsac::TrainingOptions options;
  options.episodes = config.episodes;
  options.seed = config.seed;
  options.on_episode = [&](const dsac::EpisodeLog& row, const dsac::Agent& a) {
    csv << training_csv_row(row) << "\n";
    csv.flush();
    rewards.push_back(row.cum_reward);
    const int done = row.episode + 1;
    if (done % config.checkpoint_every == 0) {
      save_checkpoint(a.params(), config, done, out / "checkpoints" / checkpoint_name(done));
      write_text(out / "reward_curve.svg", reward_curve_svg(rewards, kCurveWindow));
    }
    if (done % 50 == 0 || done == config.episodes) {
      const auto avg = moving_average(rewards, kCurveWindow);
      log << "episode " << done << "/" << config.episodes << "  reward(avg" << kCurveWindow << ") "
          << format_double(avg.back()) << "  alpha " << format_double(row.alpha) << "  buffer "
          << row.buffer_size << "\n";
      log.flush();
    }
  };

  try {
    dsac::train_agent(agent, env, options);
  } catch (const NumericError&) {
    write_text(out / "reward_curve.svg", reward_curve_svg(rewards, kCurveWindow));
    save_checkpoint(agent.params(), config, static_cast<int>(rewards.size()), out / "partial.ckpt");
    throw;
  }
  save_checkpoint(agent.params(), config, config.episodes, out / "final.ckpt");
  write_text(out / "reward_curve.svg", reward_curve_svg(rewards, kCurveWindow));
  log << "wrote " << (out / "final.ckpt").string() << "\n";
  return 0;
}

EvalOutcome run_eval(const RunConfig& config, const EvalOptions& options, std::ostream& log) {
  if (options.episodes <= 0) throw ConfigError("eval episodes must be positive");
  const auto agent = load_agent(config, options.checkpoint);
  EvalOutcome outcome;
  auto run = [&](const sim::SimConfig& sim_config, const std::string& tag) {
    const auto records = evaluate(agent, sim_config, options.episodes, config.seed);
    const auto summary = summarize(records);
    log << tag << ": " << summary_text(summary) << "\n";
    if (!options.out_dir.empty()) {
      fs::create_directories(options.out_dir);
      std::ofstream csv(options.out_dir / ("eval_" + tag + ".csv"), std::ios::binary);
      write_eval_csv(csv, records);
    }
    return summary;
  };
  outcome.summary = run(config.sim, scenario_name(config.sim.scenario));
  if (options.transfer) {
    auto square = config.sim;
    square.scenario = sim::Scenario::kSquare;
    outcome.transfer = run(square, "square_transfer");
  }
  if (!options.out_dir.empty()) {
    json j = {{"checkpoint", options.checkpoint.string()}, {"summary", summary_json(outcome.summary)}};
    if (outcome.transfer) j["transfer"] = summary_json(*outcome.transfer);
    write_text(options.out_dir / "eval_summary.json", j.dump(2) + "\n");
  }
  return outcome;
}

int cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& log) {
  run_eval(config, options, log);
  return 0;
}

int cmd_inspect(const RunConfig& config, const fs::path& checkpoint, std::uint64_t episode_seed,
                const fs::path& out_dir, std::ostream& log) {
  const auto meta = load_meta(checkpoint);
  if (meta.encoder == "RG") throw ConfigError("encoder has no attention scores");
  validate_meta(meta, config);
  const dsac::Agent agent(config.encoder, config.dsac, diff::load_params(checkpoint));

  fs::create_directories(out_dir);
  std::ofstream csv(out_dir / "attention.csv", std::ios::binary);
  csv << "episode,step,obstacle_id,raw_score,softmax_weight\n";
  RenderOptions render;
  render.label_every = 4;
  int step = 0;
  Rng unused(0);
  const ActionPolicy policy = [&](const sim::JointObservation& obs) {
    diff::Graph g(agent.params(), diff::GradMode::kFrozen);
    const sim::JointObservation* ptr = &obs;
    auto encoded = agent.encode(g, dsac::kPolicyEncoder, std::span<const sim::JointObservation* const>(&ptr, 1));
    const auto report = enc::attention_report(encoded, 0);
    for (std::size_t i = 0; i < report.weights.size(); ++i) {
      csv << 0 << "," << step << "," << i + 1 << "," << format_double(report.scores[i]) << ","
          << format_double(report.weights[i]) << "\n";
      if (step % 4 == 0) {
        char label[32];
        std::snprintf(label, sizeof label, "w=%.2f", report.weights[i]);
        render.annotations[{static_cast<int>(i) + 1, step}] = label;
      }
    }
    ++step;
    auto pol = dsac::policy_head(g, agent.config(), encoded.state);
    const auto& p = pol.probs.value();
    return dsac::select_action(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                               dsac::ActMode::kGreedy, unused);
  };
  const auto record = run_episode(config.sim, policy, episode_seed, 0);
  {
    std::ofstream traj(out_dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(traj, record.trajectory);
  }
  render.agent_radius = config.sim.robot_radius;
  write_text(out_dir / "inspect.svg", trajectory_svg(record.trajectory, render));
  log << "episode outcome " << dsac::to_string(record.outcome) << " after " << record.steps << " steps; wrote "
      << (out_dir / "attention.csv").string() << "\n";
  return 0;
}

int cmd_render(const fs::path& csv, const fs::path& svg, std::ostream& log) {
  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot read " + csv.string());
  std::vector<TrajectoryRow> rows;
  try {
    rows = read_trajectory_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(csv.string() + ": " + e.what());
  }
  write_text(svg, trajectory_svg(rows));
  log << "rendered " << rows.size() << " rows to " << svg.string() << "\n";
  return 0;
}

int cmd_oracle(const std::string& suite, std::ostream& log) {
  bool ok = true;
  const auto names = suite == "all" ? suite_names() : std::vector<std::string>{suite};
  for (const auto& name : names) {
    const auto report = run_suite(name);
    print_report(log, report);
    ok = ok && report.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace crowdsac::harness
