#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crowdsac/diff/adam.hpp"
#include "crowdsac/diff/graph.hpp"
#include "crowdsac/diff/nn.hpp"
#include "crowdsac/enc/encoders.hpp"
#include "crowdsac/sim/world.hpp"

namespace crowdsac::dsac {

using diff::Graph;
using diff::Matrix;
using diff::ParameterStore;
using diff::Var;
using sim::JointObservation;

struct DsacConfig {
  double gamma = 0.95;
  double tau = 0.005;
  double lr = 3e-4;
  int batch_size = 128;
  double alpha0 = 0.2;
  bool auto_entropy = true;
  // 0.3 * ln(81). Near-uniform targets such as 0.98 * ln(81) keep alpha
  // growing and the policy never commits.
  double target_entropy = 0.3 * std::log(81.0);
  bool update_every_step = true;
  std::size_t replay_capacity = 100000;
  int n_actions = sim::kActionCount;
  std::vector<std::size_t> head_hidden = {128, 128};

  void validate() const;
};

// Parameter-name prefixes of the five networks and the target copy.
inline const std::string kCriticEncoder = "critic.enc.";
inline const std::string kCriticQ1 = "critic.q1.";
inline const std::string kCriticQ2 = "critic.q2.";
inline const std::string kPolicyEncoder = "policy.enc.";
inline const std::string kPolicyHead = "policy.head.";
inline const std::string kCriticRoot = "critic.";
inline const std::string kTargetRoot = "target.";

std::string target_name(const std::string& critic_name);

// in -> hidden... -> n_actions, ReLU between hidden layers.
std::vector<diff::LayerSpec> head_layers(std::size_t input_width, const DsacConfig& config);

struct Transition {
  JointObservation obs;
  int action = 0;
  double reward = 0.0;
  JointObservation next_obs;
  bool done = false;
};

/// Bounded FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  void append(std::vector<Transition>&& episode);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  // Uniform without replacement within the batch.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct CriticOutputs {
  Var q1;
  Var q2;
};

struct PolicyOutputs {
  Var probs;
  Var log_probs;
};

CriticOutputs critic_heads(Graph& graph, const std::string& root, const DsacConfig& config, Var encoded);
PolicyOutputs policy_head(Graph& graph, const DsacConfig& config, Var encoded);

struct PolicyDistribution {
  std::vector<double> probs;
  std::vector<double> log_probs;
};

PolicyDistribution policy_forward(const ParameterStore& params, const DsacConfig& config,
                                  std::span<const double> encoded);

struct QValues {
  std::vector<double> q1;
  std::vector<double> q2;
};

QValues critic_forward(const ParameterStore& params, const std::string& root,
                       const DsacConfig& config, std::span<const double> encoded);

enum class ActMode { kSample, kGreedy };

// Greedy ties resolve to the lowest index.
int select_action(std::span<const double> probs, ActMode mode, Rng& rng);

/// r + gamma * sum_a p'(a) (min(Q1'(a), Q2'(a)) - alpha log p'(a)), the sum
/// dropped for terminal transitions. Matrices are B x |A|.
std::vector<double> soft_targets(const Matrix& next_probs, const Matrix& next_log_probs,
                                 const Matrix& next_q1, const Matrix& next_q2,
                                 std::span<const double> rewards, std::span<const bool> dones,
                                 double alpha, double gamma);

// MSE(Q1[a], y) + MSE(Q2[a], y) with y constant.
Var critic_loss(Var q1, Var q2, const std::vector<int>& actions, std::span<const double> targets);

// -mean(sum_a p * minQ + alpha * H), minQ constant.
Var policy_loss(const PolicyOutputs& policy, const Matrix& min_q, double alpha);

// mean_b sum_a p * (-exp(log_alpha) log p - exp(log_alpha) H_target), p constant.
Var temperature_loss(Var log_alpha, const Matrix& probs, const Matrix& log_probs,
                     double target_entropy);

std::vector<double> entropy_rows(const Matrix& probs, const Matrix& log_probs);

/// Critic, policy, target critic and temperature together with their optimizers.
class Agent {
 public:
  Agent(enc::EncoderSpec encoder, DsacConfig config, Rng& init_rng);
  // Resumes from stored parameters with fresh optimizer state.
  Agent(enc::EncoderSpec encoder, DsacConfig config, ParameterStore params);

  const enc::EncoderSpec& encoder() const { return encoder_; }
  const DsacConfig& config() const { return config_; }
  const ParameterStore& params() const { return params_; }
  ParameterStore& mutable_params() { return params_; }
  double alpha() const { return params_.alpha(); }

  // Encoded state for one observation using the policy's encoder.
  std::vector<double> encode_policy(const JointObservation& obs) const;
  PolicyDistribution policy(const JointObservation& obs) const;
  int act(const JointObservation& obs, ActMode mode, Rng& rng) const;

  enc::EncodedBatch encode(Graph& graph, const std::string& encoder_prefix,
                           std::span<const JointObservation* const> batch) const;

  std::vector<double> compute_target(std::span<const Transition* const> batch) const;

  struct UpdateStats {
    double critic_loss = 0.0;
    double policy_loss = 0.0;
    double temperature_loss = 0.0;
    double entropy = 0.0;
  };

  /// Critic step, policy step, temperature step, then Polyak target update.
  UpdateStats update(std::span<const Transition* const> batch);

  void soft_update_target(double tau);

 private:
  void init_optimizers();

  enc::EncoderSpec encoder_;
  DsacConfig config_;
  ParameterStore params_;
  diff::OptimizerState critic_opt_;
  diff::OptimizerState policy_opt_;
  diff::OptimizerState alpha_opt_;
};

// ---- environments and the training loop ---------------------------------

enum class Outcome { kNone, kSuccess, kCollision, kTimeout };

std::string_view to_string(Outcome o);

class Environment {
 public:
  struct StepResult {
    JointObservation obs;
    double reward = 0.0;
    bool done = false;       // terminal: no bootstrap
    bool truncated = false;  // episode ends but bootstraps
    Outcome outcome = Outcome::kNone;
  };

  virtual ~Environment() = default;
  virtual JointObservation reset(Rng& rng) = 0;
  virtual StepResult step(int action) = 0;
};

/// The crossing world with ORCA-driven obstacles.
class CrowdEnvironment : public Environment {
 public:
  explicit CrowdEnvironment(sim::SimConfig config);

  JointObservation reset(Rng& rng) override;
  StepResult step(int action) override;

  const sim::WorldState& world() const { return world_; }
  const sim::SimConfig& config() const { return config_; }
  // Smallest clearance seen since reset.
  double episode_min_clearance() const { return min_clearance_; }

 private:
  sim::SimConfig config_;
  sim::WorldState world_;
  sim::ObstaclePolicy obstacle_policy_;
  double min_clearance_ = 0.0;
};

struct EpisodeLog {
  int episode = 0;
  int steps = 0;
  double cum_reward = 0.0;
  Outcome outcome = Outcome::kNone;
  double alpha = 0.0;
  double critic_loss = 0.0;  // mean over this episode's updates
  double policy_loss = 0.0;
  std::size_t buffer_size = 0;
  int updates = 0;
};

struct TrainingOptions {
  int episodes = 0;
  std::uint64_t seed = 0;
  // Called after each episode's transitions reach the buffer.
  std::function<void(const EpisodeLog&, const Agent&)> on_episode;
};

struct TrainingResult {
  ParameterStore params;
  std::vector<EpisodeLog> log;
};

TrainingResult run_training(Environment& env, const enc::EncoderSpec& encoder,
                            const DsacConfig& config, const TrainingOptions& options);

// Same loop over an existing agent.
std::vector<EpisodeLog> train_agent(Agent& agent, Environment& env, const TrainingOptions& options);

}  // namespace crowdsac::dsac
