#include "crowdsac/c_api.h"

#include <cstring>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include "crowdsac/diff/serialize.hpp"
#include "crowdsac/errors.hpp"
#include "crowdsac/harness/commands.hpp"
#include "crowdsac/harness/config.hpp"

struct cs_config {
  crowdsac::harness::RunConfig value;
};

struct cs_agent {
  std::unique_ptr<crowdsac::dsac::Agent> agent;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
cs_status guard(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const crowdsac::ConfigError& e) {
    g_last_error = e.what();
    return CS_ERR_CONFIG;
  } catch (const crowdsac::InvalidInput& e) {
    g_last_error = e.what();
    return CS_ERR_INVALID;
  } catch (const crowdsac::UsageError& e) {
    g_last_error = e.what();
    return CS_ERR_USAGE;
  } catch (const crowdsac::NumericError& e) {
    g_last_error = e.what();
    return CS_ERR_NUMERIC;
  } catch (const crowdsac::ParseError& e) {
    g_last_error = e.what();
    return CS_ERR_PARSE;
  } catch (const crowdsac::SpawnError& e) {
    g_last_error = e.what();
    return CS_ERR_SPAWN;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return CS_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CS_ERR_INTERNAL;
  }
}

cs_status fail(cs_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

crowdsac::sim::JointObservation make_obs(const double* robot, const double* obstacles, size_t n) {
  crowdsac::sim::JointObservation obs;
  for (size_t i = 0; i < crowdsac::sim::kFullDim; ++i) obs.robot_full[i] = robot[i];
  for (size_t k = 0; k < n; ++k) {
    crowdsac::sim::ObservableState o;
    for (size_t j = 0; j < crowdsac::sim::kObservableDim; ++j) o[j] = obstacles[k * crowdsac::sim::kObservableDim + j];
    obs.obstacles.push_back(o);
  }
  return obs;
}

void copy_summary(const crowdsac::harness::EvalSummary& s, cs_eval_summary* out) {
  if (!out) return;
  out->episodes = s.episodes;
  out->success_rate = s.success_rate;
  out->time_to_goal = s.time_to_goal;
  out->collision_rate = s.collision_rate;
  out->timeout_rate = s.timeout_rate;
  out->mean_min_distance = s.mean_min_distance;
  out->mean_reward = s.mean_reward;
}

}  // namespace

extern "C" {

const char* cs_last_error(void) { return g_last_error.c_str(); }

const char* cs_status_name(cs_status status) {
  switch (status) {
    case CS_OK: return "ok";
    case CS_ERR_CONFIG: return "config error";
    case CS_ERR_INVALID: return "invalid input";
    case CS_ERR_USAGE: return "usage error";
    case CS_ERR_NUMERIC: return "numeric error";
    case CS_ERR_PARSE: return "parse error";
    case CS_ERR_SPAWN: return "spawn error";
    case CS_ERR_IO: return "io error";
    case CS_ERR_CHECK_FAILED: return "check failed";
    case CS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

cs_status cs_config_load(const char* path, cs_config** out) {
  return guard([&] {
    if (!out) return fail(CS_ERR_USAGE, "cs_config_load: out is NULL");
    auto c = std::make_unique<cs_config>();
    if (path) {
      c->value = crowdsac::harness::load_config(path);
    } else {
      c->value.finalize();
    }
    *out = c.release();
    return CS_OK;
  });
}

cs_status cs_config_set(cs_config* config, const char* key, const char* value) {
  return guard([&] {
    if (!config || !key || !value) return fail(CS_ERR_USAGE, "cs_config_set: NULL argument");
    auto copy = config->value;
    crowdsac::harness::set_config_value(copy, key, value);
    copy.finalize();
    config->value = copy;
    return CS_OK;
  });
}

cs_status cs_config_dump(const cs_config* config, char* buffer, size_t capacity, size_t* needed) {
  return guard([&] {
    if (!config) return fail(CS_ERR_USAGE, "cs_config_dump: config is NULL");
    const auto text = crowdsac::harness::serialize_config(config->value);
    if (needed) *needed = text.size() + 1;
    if (buffer && capacity > 0) {
      const size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buffer, text.data(), n);
      buffer[n] = '\0';
    }
    return CS_OK;
  });
}

void cs_config_free(cs_config* config) { delete config; }

cs_status cs_train(const cs_config* config) {
  return guard([&] {
    if (!config) return fail(CS_ERR_USAGE, "cs_train: config is NULL");
    return crowdsac::harness::cmd_train(config->value, std::cout) == 0 ? CS_OK : CS_ERR_CHECK_FAILED;
  });
}

cs_status cs_eval(const cs_config* config, const char* checkpoint, int episodes, int transfer,
                  const char* out_dir, cs_eval_summary* summary, cs_eval_summary* transfer_summary) {
  return guard([&] {
    if (!config || !checkpoint) return fail(CS_ERR_USAGE, "cs_eval: NULL argument");
    crowdsac::harness::EvalOptions options;
    options.checkpoint = checkpoint;
    options.episodes = episodes;
    options.transfer = transfer != 0;
    if (out_dir) options.out_dir = out_dir;
    const auto outcome = crowdsac::harness::run_eval(config->value, options, std::cout);
    copy_summary(outcome.summary, summary);
    if (outcome.transfer) copy_summary(*outcome.transfer, transfer_summary);
    return CS_OK;
  });
}

cs_status cs_inspect(const cs_config* config, const char* checkpoint, uint64_t episode_seed, const char* out_dir) {
  return guard([&] {
    if (!config || !checkpoint || !out_dir) return fail(CS_ERR_USAGE, "cs_inspect: NULL argument");
    crowdsac::harness::cmd_inspect(config->value, checkpoint, episode_seed, out_dir, std::cout);
    return CS_OK;
  });
}

cs_status cs_render(const char* trajectory_csv, const char* svg_path) {
  return guard([&] {
    if (!trajectory_csv || !svg_path) return fail(CS_ERR_USAGE, "cs_render: NULL argument");
    crowdsac::harness::cmd_render(trajectory_csv, svg_path, std::cout);
    return CS_OK;
  });
}

cs_status cs_oracle(const char* suite) {
  return guard([&] {
    if (!suite) return fail(CS_ERR_USAGE, "cs_oracle: suite is NULL");
    if (crowdsac::harness::cmd_oracle(suite, std::cout) == 0) return CS_OK;
    return fail(CS_ERR_CHECK_FAILED, std::string("oracle suite '") + suite + "' reported failures");
  });
}

cs_status cs_agent_load(const cs_config* config, const char* checkpoint, cs_agent** out) {
  return guard([&] {
    if (!config || !checkpoint || !out) return fail(CS_ERR_USAGE, "cs_agent_load: NULL argument");
    crowdsac::harness::validate_meta(crowdsac::harness::load_meta(checkpoint), config->value);
    auto a = std::make_unique<cs_agent>();
    a->agent = std::make_unique<crowdsac::dsac::Agent>(config->value.encoder, config->value.dsac,
                                                       crowdsac::diff::load_params(checkpoint));
    *out = a.release();
    return CS_OK;
  });
}

cs_status cs_agent_act(const cs_agent* agent, const double* robot, const double* obstacles, size_t n_obstacles,
                       int greedy, uint64_t seed, int* action) {
  return guard([&] {
    if (!agent || !robot || !action || (n_obstacles > 0 && !obstacles)) {
      return fail(CS_ERR_USAGE, "cs_agent_act: NULL argument");
    }
    crowdsac::Rng rng(seed);
    *action = agent->agent->act(make_obs(robot, obstacles, n_obstacles),
                                greedy ? crowdsac::dsac::ActMode::kGreedy : crowdsac::dsac::ActMode::kSample, rng);
    return CS_OK;
  });
}

cs_status cs_agent_policy(const cs_agent* agent, const double* robot, const double* obstacles, size_t n_obstacles,
                          double* probs, size_t capacity) {
  return guard([&] {
    if (!agent || !robot || !probs || (n_obstacles > 0 && !obstacles)) {
      return fail(CS_ERR_USAGE, "cs_agent_policy: NULL argument");
    }
    const auto dist = agent->agent->policy(make_obs(robot, obstacles, n_obstacles));
    if (capacity < dist.probs.size()) {
      return fail(CS_ERR_USAGE, "cs_agent_policy: need room for " + std::to_string(dist.probs.size()) + " values");
    }
    std::copy(dist.probs.begin(), dist.probs.end(), probs);
    return CS_OK;
  });
}

void cs_agent_free(cs_agent* agent) { delete agent; }

}  // extern "C"
