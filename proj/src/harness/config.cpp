#include "crowdsac/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "crowdsac/errors.hpp"

namespace crowdsac::harness {

namespace pt = boost::property_tree;

namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto v = to_int(key, part);
    if (v <= 0) throw ConfigError(key + ": layer widths must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DOUBLE_FIELD(expr)                                                                  \
  Field {                                                                                   \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt_double(c.expr); }                               \
  }
#define INT_FIELD(expr, type)                                                               \
  Field {                                                                                   \
    [](RunConfig& c, const std::string& k, const std::string& v) {                          \
      c.expr = static_cast<type>(to_int(k, v));                                             \
    },                                                                                      \
        [](const RunConfig& c) { return std::to_string(c.expr); }                           \
  }

// Ordered by section then key, which is also the canonical output order.
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"dsac.alpha", DOUBLE_FIELD(dsac.alpha0)},
      {"dsac.auto_entropy",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.dsac.auto_entropy = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.dsac.auto_entropy ? "true" : "false"); }}},
      {"dsac.batch_size", INT_FIELD(dsac.batch_size, int)},
      {"dsac.gamma", DOUBLE_FIELD(dsac.gamma)},
      {"dsac.hidden",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.dsac.head_hidden = to_sizes(k, v); },
        [](const RunConfig& c) { return join_sizes(c.dsac.head_hidden); }}},
      {"dsac.lr", DOUBLE_FIELD(dsac.lr)},
      {"dsac.replay_capacity", INT_FIELD(dsac.replay_capacity, std::size_t)},
      {"dsac.target_entropy", DOUBLE_FIELD(dsac.target_entropy)},
      {"dsac.tau", DOUBLE_FIELD(dsac.tau)},
      {"encoder.pool",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.encoder.pool = enc::parse_pool_mode(v); },
        [](const RunConfig& c) { return std::string(enc::to_string(c.encoder.pool)); }}},
      {"encoder.robot_input",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.encoder.robot_input = enc::parse_robot_input(v);
        },
        [](const RunConfig& c) { return std::string(enc::to_string(c.encoder.robot_input)); }}},
      {"encoder.variant",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          const auto variant = enc::parse_encoder_variant(v);
          if (variant == enc::EncoderVariant::kIdentity) {
            throw ConfigError("encoder.variant: identity is for tests only");
          }
          c.encoder.variant = variant;
        },
        [](const RunConfig& c) { return std::string(enc::to_string(c.encoder.variant)); }}},
      {"run.checkpoint_every", INT_FIELD(checkpoint_every, int)},
      {"run.episodes", INT_FIELD(episodes, int)},
      {"run.eval_episodes", INT_FIELD(eval_episodes, int)},
      {"run.out",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
        [](const RunConfig& c) { return c.out_dir; }}},
      {"run.seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          std::uint64_t s = 0;
          const auto* end = v.data() + v.size();
          auto [ptr, ec] = std::from_chars(v.data(), end, s);
          if (ec != std::errc() || ptr != end) throw ConfigError(k + ": expected an unsigned integer, got '" + v + "'");
          c.seed = s;
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"sim.angular_jitter", DOUBLE_FIELD(sim.angular_jitter)},
      {"sim.arena", DOUBLE_FIELD(sim.arena)},
      {"sim.dt", DOUBLE_FIELD(sim.dt)},
      {"sim.n_obstacles", INT_FIELD(sim.n_obstacles, int)},
      {"sim.obstacle_radius", DOUBLE_FIELD(sim.obstacle_radius)},
      {"sim.orca_max_speed", DOUBLE_FIELD(sim.orca.max_speed)},
      {"sim.orca_neighbor_dist", DOUBLE_FIELD(sim.orca.neighbor_dist)},
      {"sim.orca_time_horizon", DOUBLE_FIELD(sim.orca.time_horizon)},
      {"sim.r_circle", DOUBLE_FIELD(sim.r_circle)},
      {"sim.radial_jitter", DOUBLE_FIELD(sim.radial_jitter)},
      {"sim.robot_radius", DOUBLE_FIELD(sim.robot_radius)},
      {"sim.scenario",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.sim.scenario = parse_scenario(v); },
        [](const RunConfig& c) { return scenario_name(c.sim.scenario); }}},
      {"sim.t_max", DOUBLE_FIELD(sim.t_max)},
      {"sim.v_pref", DOUBLE_FIELD(sim.v_pref)},
  };
  return table;
}

#undef DOUBLE_FIELD
#undef INT_FIELD

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string scenario_name(sim::Scenario s) { return s == sim::Scenario::kCircle ? "circle" : "square"; }

sim::Scenario parse_scenario(const std::string& text) {
  if (text == "circle") return sim::Scenario::kCircle;
  if (text == "square") return sim::Scenario::kSquare;
  throw ConfigError("sim.scenario: expected circle or square, got '" + text + "'");
}

void RunConfig::finalize() {
  if (episodes < 0) throw ConfigError("run.episodes must be >= 0");
  if (checkpoint_every <= 0) throw ConfigError("run.checkpoint_every must be positive");
  if (eval_episodes < 0) throw ConfigError("run.eval_episodes must be >= 0");
  if (sim.n_obstacles < 0) throw ConfigError("sim.n_obstacles must be >= 0");
  encoder.n_obstacles = sim.n_obstacles;
  sim.validate();
  dsac.validate();
}

void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  const auto& table = fields();
  const auto it = table.find(dotted_key);
  if (it == table.end()) throw ConfigError("unknown config key '" + dotted_key + "'");
  it->second.set(config, dotted_key, value);
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' must live in a section");
    }
    for (const auto& [key, leaf] : body) {
      set_config_value(config, section + "." + key, leaf.get_value<std::string>());
    }
  }
  config.finalize();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& [dotted, field] : fields()) {
    const auto dot = dotted.find('.');
    const auto sec = dotted.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += dotted.substr(dot + 1) + " = " + field.get(config) + "\n";
  }
  return out;
}

std::string model_hash(const RunConfig& config) {
  std::string key = "variant=" + std::string(enc::to_string(config.encoder.variant));
  key += ";pool=" + std::string(enc::to_string(config.encoder.pool));
  key += ";robot_input=" + std::string(enc::to_string(config.encoder.robot_input));
  // Flattening pool modes bake the obstacle count into their input width.
  key += ";width=" + std::to_string(config.encoder.output_width());
  const auto pool = config.encoder.pool;
  if (config.encoder.variant == enc::EncoderVariant::kRG &&
      (pool == enc::PoolMode::kRobObs || pool == enc::PoolMode::kRobMlpObs ||
       pool == enc::PoolMode::kMlpRobObs)) {
    key += ";n=" + std::to_string(config.encoder.n_obstacles);
  }
  key += ";hidden=" + join_sizes(config.dsac.head_hidden);
  key += ";actions=" + std::to_string(config.dsac.n_actions);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
  return buf;
}

}  // namespace crowdsac::harness
