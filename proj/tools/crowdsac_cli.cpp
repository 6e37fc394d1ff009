// crowdsac command line. Talks to the library only through the C interface.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "crowdsac/c_api.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::string> encoder;
  std::optional<int> obstacles;
  std::optional<std::string> scenario;
  std::optional<std::string> out;
  std::vector<std::string> sets;  // section.key=value
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI config file (defaults apply when omitted)");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--encoder", o.encoder, "RG, AW, SA or LSA")->check(CLI::IsMember({"RG", "AW", "SA", "LSA"}));
  cmd->add_option("--obstacles", o.obstacles, "Number of obstacles")->check(CLI::PositiveNumber);
  cmd->add_option("--scenario", o.scenario, "circle or square")->check(CLI::IsMember({"circle", "square"}));
  cmd->add_option("--set", o.sets, "Extra override, section.key=value (repeatable)");
}

int exit_for(cs_status s) {
  if (s == CS_OK) return kExitOk;
  std::fprintf(stderr, "error (%s): %s\n", cs_status_name(s), cs_last_error());
  switch (s) {
    case CS_ERR_CONFIG:
    case CS_ERR_USAGE:
    case CS_ERR_PARSE:
    case CS_ERR_INVALID:
      return kExitUsage;
    default:
      return kExitFailed;
  }
}

struct ConfigHandle {
  cs_config* ptr = nullptr;
  ~ConfigHandle() { cs_config_free(ptr); }
};

cs_status build_config(const Overrides& o, ConfigHandle& h) {
  cs_status s = cs_config_load(o.config.empty() ? nullptr : o.config.c_str(), &h.ptr);
  if (s != CS_OK) return s;
  std::vector<std::pair<std::string, std::string>> kv;
  if (o.seed) kv.emplace_back("run.seed", std::to_string(*o.seed));
  if (o.episodes) kv.emplace_back("run.episodes", std::to_string(*o.episodes));
  if (o.encoder) kv.emplace_back("encoder.variant", *o.encoder);
  if (o.obstacles) kv.emplace_back("sim.n_obstacles", std::to_string(*o.obstacles));
  if (o.scenario) kv.emplace_back("sim.scenario", *o.scenario);
  if (o.out) kv.emplace_back("run.out", *o.out);
  for (const auto& item : o.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n", item.c_str());
      return CS_ERR_USAGE;
    }
    kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  for (const auto& [key, value] : kv) {
    s = cs_config_set(h.ptr, key.c_str(), value.c_str());
    if (s != CS_OK) return s;
  }
  return CS_OK;
}

void print_summary(const char* tag, const cs_eval_summary& s) {
  auto num = [](double v) { return std::isfinite(v) ? v : NAN; };
  std::printf("%s: episodes %d success %.4f time_to_goal %.3f collision %.4f timeout %.4f min_dist %.4f reward %.4f\n",
              tag, s.episodes, s.success_rate, num(s.time_to_goal), s.collision_rate, s.timeout_rate,
              num(s.mean_min_distance), s.mean_reward);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd navigation with discrete soft actor-critic"};
  app.require_subcommand(1);

  Overrides train_o;
  auto* train = app.add_subcommand("train", "Train an agent");
  add_common(train, train_o);
  train->add_option("--episodes", train_o.episodes, "Training episodes")->check(CLI::NonNegativeNumber);
  train->add_option("--out", train_o.out, "Run directory");

  Overrides eval_o;
  std::string eval_ckpt;
  int eval_episodes = 100;
  bool eval_transfer = false;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with the greedy policy");
  add_common(eval, eval_o);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_out, "Directory for per-episode CSVs and summary");
  eval->add_flag("--transfer", eval_transfer, "Also evaluate on the square scenario");

  Overrides inspect_o;
  std::string inspect_ckpt;
  std::string inspect_out = "inspect";
  std::uint64_t inspect_episode_seed = 0;
  auto* inspect = app.add_subcommand("inspect", "Replay one episode and dump attention weights");
  add_common(inspect, inspect_o);
  inspect->add_option("--checkpoint", inspect_ckpt, "Checkpoint file")->required();
  inspect->add_option("--episode-seed", inspect_episode_seed, "Seed of the replayed episode");
  inspect->add_option("--out", inspect_out, "Output directory");

  std::string render_in;
  std::string render_out;
  auto* render = app.add_subcommand("render", "Render a trajectory CSV to SVG");
  render->add_option("trajectory", render_in, "Trajectory CSV")->required();
  render->add_option("--out", render_out, "SVG path (default: CSV path with .svg)");

  std::string suite = "all";
  auto* oracle = app.add_subcommand("oracle", "Run oracle checks");
  oracle->add_option("suite", suite, "grad, tabular, reward, orca, inject or all")
      ->check(CLI::IsMember({"grad", "tabular", "reward", "orca", "inject", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*train) {
    ConfigHandle h;
    if (auto s = build_config(train_o, h); s != CS_OK) return exit_for(s);
    return exit_for(cs_train(h.ptr));
  }
  if (*eval) {
    ConfigHandle h;
    if (auto s = build_config(eval_o, h); s != CS_OK) return exit_for(s);
    cs_eval_summary summary{};
    cs_eval_summary transfer{};
    const auto s = cs_eval(h.ptr, eval_ckpt.c_str(), eval_episodes, eval_transfer ? 1 : 0,
                           eval_out.empty() ? nullptr : eval_out.c_str(), &summary, &transfer);
    if (s != CS_OK) return exit_for(s);
    print_summary("eval", summary);
    if (eval_transfer) print_summary("transfer", transfer);
    return kExitOk;
  }
  if (*inspect) {
    ConfigHandle h;
    if (auto s = build_config(inspect_o, h); s != CS_OK) return exit_for(s);
    return exit_for(cs_inspect(h.ptr, inspect_ckpt.c_str(), inspect_episode_seed, inspect_out.c_str()));
  }
  if (*render) {
    if (render_out.empty()) {
      render_out = render_in;
      const auto dot = render_out.rfind('.');
      if (dot != std::string::npos && render_out.find('/', dot) == std::string::npos) render_out.resize(dot);
      render_out += ".svg";
    }
    return exit_for(cs_render(render_in.c_str(), render_out.c_str()));
  }
  if (*oracle) return exit_for(cs_oracle(suite.c_str()));
  return kExitUsage;
}
