#include "crowdsac/dsac/dsac.hpp"

#include <algorithm>
#include <memory>

#include "crowdsac/errors.hpp"
#include "crowdsac/orca/orca.hpp"

namespace crowdsac::dsac {

using diff::Activation;
using diff::LayerSpec;

void DsacConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(alpha0 > 0.0)) throw ConfigError("alpha must be positive");
  if (replay_capacity < static_cast<std::size_t>(batch_size)) {
    throw ConfigError("replay_capacity must be at least batch_size");
  }
  if (n_actions < 1) throw ConfigError("n_actions must be positive");
}

std::string target_name(const std::string& critic_name) {
  if (critic_name.rfind(kCriticRoot, 0) != 0) throw ConfigError("not a critic parameter: " + critic_name);
  return kTargetRoot + critic_name.substr(kCriticRoot.size());
}

std::vector<LayerSpec> head_layers(std::size_t input_width, const DsacConfig& config) {
  std::vector<LayerSpec> layers;
  std::size_t in = input_width;
  for (auto h : config.head_hidden) {
    layers.push_back({in, h, Activation::kRelu});
    in = h;
  }
  layers.push_back({in, static_cast<std::size_t>(config.n_actions), Activation::kNone});
  return layers;
}

// ---- replay ---------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (t.action < 0) throw InvalidInput("transition with negative action");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

void ReplayBuffer::append(std::vector<Transition>&& episode) {
  for (auto& t : episode) push(std::move(t));
  episode.clear();
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const std::size_t n = items_.size();
  if (batch > n) throw UsageError("sample of " + std::to_string(batch) + " from " + std::to_string(n));
  // Floyd's algorithm: distinct indices without materializing a permutation.
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (auto i : picked) out.push_back(&items_[i]);
  return out;
}

// ---- heads ----------------------------------------------------------------

CriticOutputs critic_heads(Graph& graph, const std::string& root, const DsacConfig& config, Var encoded) {
  const auto layers = head_layers(static_cast<std::size_t>(encoded.cols()), config);
  return {diff::mlp(graph, root + "q1.", layers, encoded), diff::mlp(graph, root + "q2.", layers, encoded)};
}

PolicyOutputs policy_head(Graph& graph, const DsacConfig& config, Var encoded) {
  const auto layers = head_layers(static_cast<std::size_t>(encoded.cols()), config);
  Var logits = diff::mlp(graph, kPolicyHead, layers, encoded);
  return {diff::row_softmax(logits), diff::row_log_softmax(logits)};
}

namespace {

std::vector<double> row_vector(const Matrix& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

}  // namespace

PolicyDistribution policy_forward(const ParameterStore& params, const DsacConfig& config,
                                  std::span<const double> encoded) {
  Graph g(params, diff::GradMode::kFrozen);
  auto out = policy_head(g, config, g.constant(encoded));
  return {row_vector(out.probs.value(), 0), row_vector(out.log_probs.value(), 0)};
}

QValues critic_forward(const ParameterStore& params, const std::string& root,
                       const DsacConfig& config, std::span<const double> encoded) {
  Graph g(params, diff::GradMode::kFrozen);
  auto out = critic_heads(g, root, config, g.constant(encoded));
  return {row_vector(out.q1.value(), 0), row_vector(out.q2.value(), 0)};
}

int select_action(std::span<const double> probs, ActMode mode, Rng& rng) {
  if (probs.empty()) throw InvalidInput("select_action: empty distribution");
  if (mode == ActMode::kGreedy) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the cumulative sum: last action with mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

std::vector<double> soft_targets(const Matrix& next_probs, const Matrix& next_log_probs,
                                 const Matrix& next_q1, const Matrix& next_q2,
                                 std::span<const double> rewards, std::span<const bool> dones,
                                 double alpha, double gamma) {
  const auto B = next_probs.rows();
  if (static_cast<std::size_t>(B) != rewards.size() || rewards.size() != dones.size()) {
    throw ConfigError("soft_targets: batch size mismatch");
  }
  std::vector<double> y(rewards.size());
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (dones[i]) {
      y[i] = rewards[i];
      continue;
    }
    double expected = 0.0;
    for (Eigen::Index a = 0; a < next_probs.cols(); ++a) {
      const double q = std::min(next_q1(b, a), next_q2(b, a));
      expected += next_probs(b, a) * (q - alpha * next_log_probs(b, a));
    }
    y[i] = rewards[i] + gamma * expected;
  }
  return y;
}

Var critic_loss(Var q1, Var q2, const std::vector<int>& actions, std::span<const double> targets) {
  Graph& g = q1.graph();
  Matrix y(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) y(Eigen::Index(i), 0) = targets[i];
  Var target = g.constant(std::move(y));
  Var e1 = diff::sub(diff::gather_cols(q1, actions), target);
  Var e2 = diff::sub(diff::gather_cols(q2, actions), target);
  return diff::add(diff::mean_all(diff::square(e1)), diff::mean_all(diff::square(e2)));
}

Var policy_loss(const PolicyOutputs& policy, const Matrix& min_q, double alpha) {
  Graph& g = policy.probs.graph();
  Var q = g.constant(min_q);
  Var expected_q = diff::row_sum(diff::mul(policy.probs, q));
  Var entropy = diff::scale(diff::row_sum(diff::mul(policy.probs, policy.log_probs)), -1.0);
  return diff::scale(diff::mean_all(diff::add(expected_q, diff::scale(entropy, alpha))), -1.0);
}

Var temperature_loss(Var log_alpha, const Matrix& probs, const Matrix& log_probs,
                     double target_entropy) {
  // Per-row sum_a p * (-log p - H_target) = H - H_target.
  Matrix per_row(probs.rows(), 1);
  for (Eigen::Index b = 0; b < probs.rows(); ++b) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < probs.cols(); ++a) {
      s += probs(b, a) * (-log_probs(b, a) - target_entropy);
    }
    per_row(b, 0) = s;
  }
  const double mean_gap = per_row.mean();
  Var alpha = diff::exp(log_alpha);
  return diff::scale(alpha, mean_gap);
}

std::vector<double> entropy_rows(const Matrix& probs, const Matrix& log_probs) {
  std::vector<double> h(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index b = 0; b < probs.rows(); ++b) {
    h[static_cast<std::size_t>(b)] = -(probs.row(b).cwiseProduct(log_probs.row(b))).sum();
  }
  return h;
}

// ---- agent ----------------------------------------------------------------

Agent::Agent(enc::EncoderSpec encoder, DsacConfig config, Rng& init_rng)
    : encoder_(encoder), config_(std::move(config)) {
  config_.validate();
  const auto width = encoder_.output_width();
  const auto layers = head_layers(width, config_);
  enc::init_encoder(encoder_, kCriticEncoder, params_, init_rng);
  diff::init_mlp(params_, kCriticQ1, layers, init_rng);
  diff::init_mlp(params_, kCriticQ2, layers, init_rng);
  enc::init_encoder(encoder_, kPolicyEncoder, params_, init_rng);
  diff::init_mlp(params_, kPolicyHead, layers, init_rng);
  std::vector<std::pair<std::string, diff::ParamEntry>> copies;
  for (const auto& [name, entry] : params_.entries()) {
    if (name.rfind(kCriticRoot, 0) == 0) copies.emplace_back(target_name(name), entry);
  }
  for (auto& [name, entry] : copies) params_.add(name, entry.shape, entry.values);
  params_.set_log_alpha(std::log(config_.alpha0));
  init_optimizers();
}

Agent::Agent(enc::EncoderSpec encoder, DsacConfig config, ParameterStore params)
    : encoder_(encoder), config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  if (!params_.contains(ParameterStore::kLogAlpha)) params_.set_log_alpha(std::log(config_.alpha0));
  for (const auto& [name, entry] : params_.entries()) {
    if (name.rfind(kCriticRoot, 0) == 0 && !params_.contains(target_name(name))) {
      throw ConfigError("checkpoint lacks target copy of '" + name + "'");
    }
  }
  init_optimizers();
}

void Agent::init_optimizers() {
  std::vector<std::string> critic, policy;
  for (const auto& [name, entry] : params_.entries()) {
    if (name.rfind(kCriticRoot, 0) == 0) critic.push_back(name);
    if (name.rfind("policy.", 0) == 0) policy.push_back(name);
  }
  diff::AdamConfig adam;
  adam.lr = config_.lr;
  critic_opt_ = diff::OptimizerState(params_, critic, adam);
  policy_opt_ = diff::OptimizerState(params_, policy, adam);
  alpha_opt_ = diff::OptimizerState(params_, {ParameterStore::kLogAlpha}, adam);
}

enc::EncodedBatch Agent::encode(Graph& graph, const std::string& encoder_prefix,
                                std::span<const JointObservation* const> batch) const {
  return enc::encode(graph, encoder_, encoder_prefix, batch);
}

std::vector<double> Agent::encode_policy(const JointObservation& obs) const {
  Graph g(params_, diff::GradMode::kFrozen);
  const JointObservation* ptr = &obs;
  auto e = encode(g, kPolicyEncoder, std::span<const JointObservation* const>(&ptr, 1));
  const auto& v = e.state.value();
  return {v.data(), v.data() + v.size()};
}

PolicyDistribution Agent::policy(const JointObservation& obs) const {
  Graph g(params_, diff::GradMode::kFrozen);
  const JointObservation* ptr = &obs;
  auto e = encode(g, kPolicyEncoder, std::span<const JointObservation* const>(&ptr, 1));
  auto out = policy_head(g, config_, e.state);
  return {row_vector(out.probs.value(), 0), row_vector(out.log_probs.value(), 0)};
}

int Agent::act(const JointObservation& obs, ActMode mode, Rng& rng) const {
  return select_action(policy(obs).probs, mode, rng);
}

std::vector<double> Agent::compute_target(std::span<const Transition* const> batch) const {
  if (batch.empty()) throw InvalidInput("compute_target: empty batch");
  std::vector<const JointObservation*> next;
  std::vector<double> rewards;
  std::vector<char> done_flags;
  next.reserve(batch.size());
  for (const auto* t : batch) {
    next.push_back(&t->next_obs);
    rewards.push_back(t->reward);
    done_flags.push_back(t->done);
  }
  Graph g(params_, diff::GradMode::kFrozen);
  auto pol = policy_head(g, config_, encode(g, kPolicyEncoder, next).state);
  auto tq = critic_heads(g, kTargetRoot, config_, encode(g, kTargetRoot + "enc.", next).state);
  std::unique_ptr<bool[]> dones(new bool[done_flags.size()]);
  for (std::size_t i = 0; i < done_flags.size(); ++i) dones[i] = done_flags[i] != 0;
  return soft_targets(pol.probs.value(), pol.log_probs.value(), tq.q1.value(), tq.q2.value(),
                      rewards, std::span<const bool>(dones.get(), done_flags.size()), alpha(),
                      config_.gamma);
}

Agent::UpdateStats Agent::update(std::span<const Transition* const> batch) {
  UpdateStats stats;
  const double alpha_now = alpha();
  const auto targets = compute_target(batch);

  std::vector<const JointObservation*> obs;
  std::vector<int> actions;
  obs.reserve(batch.size());
  for (const auto* t : batch) {
    obs.push_back(&t->obs);
    actions.push_back(t->action);
  }

  Matrix min_q;
  {
    Graph g(params_, diff::GradMode::kTrack);
    auto q = critic_heads(g, kCriticRoot, config_, encode(g, kCriticEncoder, obs).state);
    Var loss = critic_loss(q.q1, q.q2, actions, targets);
    stats.critic_loss = loss.scalar();
    min_q = q.q1.value().cwiseMin(q.q2.value());
    auto grads = g.backward(loss);
    diff::adam_step(params_, grads, critic_opt_);
  }

  Matrix probs, log_probs;
  {
    Graph g(params_, diff::GradMode::kTrack);
    auto pol = policy_head(g, config_, encode(g, kPolicyEncoder, obs).state);
    Var loss = policy_loss(pol, min_q, alpha_now);
    stats.policy_loss = loss.scalar();
    probs = pol.probs.value();
    log_probs = pol.log_probs.value();
    auto grads = g.backward(loss);
    diff::adam_step(params_, grads, policy_opt_);
  }

  const auto h = entropy_rows(probs, log_probs);
  double mean_h = 0.0;
  for (double v : h) mean_h += v;
  stats.entropy = mean_h / static_cast<double>(h.size());

  if (config_.auto_entropy) {
    Graph g(params_, diff::GradMode::kTrack);
    Var loss = temperature_loss(g.param(ParameterStore::kLogAlpha), probs, log_probs,
                                config_.target_entropy);
    stats.temperature_loss = loss.scalar();
    auto grads = g.backward(loss);
    diff::adam_step(params_, grads, alpha_opt_);
    if (!std::isfinite(params_.log_alpha())) throw NumericError("log_alpha became non-finite");
  }

  soft_update_target(config_.tau);
  return stats;
}

void Agent::soft_update_target(double tau) {
  std::vector<std::string> names;
  for (const auto& [name, entry] : params_.entries()) {
    if (name.rfind(kCriticRoot, 0) == 0) names.push_back(name);
  }
  for (const auto& name : names) {
    const auto& online = params_.at(name).values;
    auto target = params_.values(target_name(name));
    for (std::size_t i = 0; i < target.size(); ++i) {
      target[i] = tau * online[i] + (1.0 - tau) * target[i];
    }
  }
}

// ---- environments ---------------------------------------------------------

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kNone: return "none";
    case Outcome::kSuccess: return "success";
    case Outcome::kCollision: return "collision";
    case Outcome::kTimeout: return "timeout";
  }
  return "?";
}

CrowdEnvironment::CrowdEnvironment(sim::SimConfig config)
    : config_(config), obstacle_policy_(orca::obstacle_policy()) {
  config_.validate();
}

JointObservation CrowdEnvironment::reset(Rng& rng) {
  world_ = sim::spawn(config_, rng);
  min_clearance_ = sim::min_clearance(world_);
  return sim::observe(world_);
}

Environment::StepResult CrowdEnvironment::step(int action) {
  auto [next, events] = sim::step(world_, sim::Action{action}, obstacle_policy_);
  world_ = std::move(next);
  min_clearance_ = std::min(min_clearance_, events.d_min_step);
  StepResult r;
  r.obs = sim::observe(world_);
  r.reward = sim::reward(events, world_, world_.d_start_to_goal);
  r.done = events.terminal();
  if (events.reached_goal) r.outcome = Outcome::kSuccess;
  if (events.collided) r.outcome = Outcome::kCollision;
  if (events.timed_out) r.outcome = Outcome::kTimeout;
  return r;
}

// ---- training loop --------------------------------------------------------

std::vector<EpisodeLog> train_agent(Agent& agent, Environment& env, const TrainingOptions& options) {
  Rng env_rng(derive_seed(options.seed, 1));
  Rng act_rng(derive_seed(options.seed, 2));
  Rng sample_rng(derive_seed(options.seed, 3));
  const auto& config = agent.config();
  ReplayBuffer buffer(config.replay_capacity);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<EpisodeLog> log;

  for (int ep = 0; ep < options.episodes; ++ep) {
    EpisodeLog row;
    row.episode = ep;
    std::vector<Transition> episode;
    JointObservation obs = env.reset(env_rng);
    bool finished = false;
    while (!finished) {
      const int action = agent.act(obs, ActMode::kSample, act_rng);
      auto result = env.step(action);
      row.cum_reward += result.reward;
      ++row.steps;
      finished = result.done || result.truncated;
      if (finished) row.outcome = result.outcome;
      episode.push_back({obs, action, result.reward, result.obs, result.done});
      obs = std::move(result.obs);

      if (config.update_every_step && buffer.size() >= batch) {
        const auto sampled = buffer.sample(batch, sample_rng);
        try {
          const auto stats = agent.update(sampled);
          row.critic_loss += stats.critic_loss;
          row.policy_loss += stats.policy_loss;
          ++row.updates;
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " (episode " + std::to_string(ep) + ", step " +
                             std::to_string(row.steps) + ")");
        }
      }
    }
    buffer.append(std::move(episode));
    if (row.updates > 0) {
      row.critic_loss /= row.updates;
      row.policy_loss /= row.updates;
    }
    row.alpha = agent.alpha();
    row.buffer_size = buffer.size();
    log.push_back(row);
    if (options.on_episode) options.on_episode(row, agent);
  }
  return log;
}

TrainingResult run_training(Environment& env, const enc::EncoderSpec& encoder,
                            const DsacConfig& config, const TrainingOptions& options) {
  Rng init_rng(derive_seed(options.seed, 0));
  Agent agent(encoder, config, init_rng);
  auto log = train_agent(agent, env, options);
  return {agent.params(), std::move(log)};
}

}  // namespace crowdsac::dsac
