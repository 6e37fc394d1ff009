#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "crowdsac/diff/params.hpp"
#include "crowdsac/harness/config.hpp"
#include "crowdsac/harness/metrics.hpp"

namespace crowdsac::harness {

namespace fs = std::filesystem;

// Sidecar written next to every checkpoint as <checkpoint>.json.
struct CheckpointMeta {
  std::string encoder;      // RG, AW, SA, LSA
  std::string pool;
  std::string robot_input;
  int n_obstacles = 0;
  std::string model_hash;
  int episode = 0;
};

fs::path meta_path(const fs::path& checkpoint);
void save_checkpoint(const diff::ParameterStore& params, const RunConfig& config, int episode,
                     const fs::path& path);
CheckpointMeta load_meta(const fs::path& checkpoint);
// Throws ConfigError naming both identities when the checkpoint was not
// produced by a network with this config's layout.
void validate_meta(const CheckpointMeta& meta, const RunConfig& config);

// Each command returns 0 on success and 1 when a check or evaluation fails.
// Configuration problems surface as ConfigError/UsageError/ParseError.

int cmd_train(const RunConfig& config, std::ostream& log);

struct EvalOptions {
  fs::path checkpoint;
  int episodes = 100;
  bool transfer = false;  // also run the square scenario
  fs::path out_dir;       // empty: print only
};

struct EvalOutcome {
  EvalSummary summary;
  std::optional<EvalSummary> transfer;
};

EvalOutcome run_eval(const RunConfig& config, const EvalOptions& options, std::ostream& log);
int cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& log);

int cmd_inspect(const RunConfig& config, const fs::path& checkpoint, std::uint64_t episode_seed,
                const fs::path& out_dir, std::ostream& log);

int cmd_render(const fs::path& csv, const fs::path& svg, std::ostream& log);

int cmd_oracle(const std::string& suite, std::ostream& log);

std::string summary_text(const EvalSummary& s);

}  // namespace crowdsac::harness
