#include "crowdsac/enc/encoders.hpp"

#include <cmath>
#include <map>

#include "crowdsac/errors.hpp"

namespace crowdsac::enc {

using diff::Activation;
using diff::LayerSpec;
using diff::Matrix;

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

struct Frame {
  double px, py, cos_rot, sin_rot;
};

Frame goal_frame(const JointObservation& obs) {
  const auto& s = obs.robot_full;
  const double rot = std::atan2(s[6] - s[1], s[5] - s[0]);
  return {s[0], s[1], std::cos(rot), std::sin(rot)};
}

const std::string kRobotProj = "robot_proj.";
const std::string kPair = "pair.";
const std::string kInteract = "interact.";
const std::string kScore = "score.";
const std::string kPool = "pool.";
const std::string kPoolMlp = "pool_mlp.";
const std::string kRobotEmbed = "robot_embed.";
const std::string kObstacleEmbed = "obstacle_embed.";
const std::string kRelation = "relation.";

std::string gcn_weight(const std::string& prefix, int round) {
  return prefix + "gcn" + std::to_string(round) + ".w";
}

std::vector<LayerSpec> robot_projection_layers() {
  return {{sim::kFullDim, kRobotFeatureDim, Activation::kNone}};
}

std::vector<LayerSpec> robot_embed_layers() {
  return {{kRobotFeatureDim, kGraphHiddenDim, Activation::kRelu},
          {kGraphHiddenDim, kGraphDim, Activation::kNone}};
}

std::vector<LayerSpec> obstacle_embed_layers() {
  return {{sim::kObservableDim, kGraphHiddenDim, Activation::kRelu},
          {kGraphHiddenDim, kGraphDim, Activation::kNone}};
}

std::vector<LayerSpec> relation_layers() { return {{2 * kGraphDim, 1, Activation::kNone}}; }

std::vector<LayerSpec> pool_mlp_layers(PoolMode mode, int n) {
  const std::size_t rows = mode == PoolMode::kRobMlpObs ? std::size_t(n) : std::size_t(n) + 1;
  const std::size_t out = mode == PoolMode::kRobMlpObs ? kPooledDim : kEncodedDim;
  return {{rows * kGraphDim, kEmbedDim, Activation::kRelu}, {kEmbedDim, out, Activation::kNone}};
}

bool is_attention(EncoderVariant v) {
  return v == EncoderVariant::kAW || v == EncoderVariant::kSA || v == EncoderVariant::kLSA;
}

InteractionMode interaction_mode(EncoderVariant v) {
  return v == EncoderVariant::kAW ? InteractionMode::kPlain : InteractionMode::kSkip;
}

PoolOp pool_op(EncoderVariant v) { return v == EncoderVariant::kLSA ? PoolOp::kLstm : PoolOp::kSum; }

// Row-block inputs for a batch that shares one obstacle count.
struct BatchInputs {
  Eigen::Index batch = 0;
  int n = 0;
  Matrix robot;      // B x 6 (goal frame) or B x 9 (raw)
  Matrix obstacles;  // (B*n) x 5, relative
};

BatchInputs gather_inputs(const EncoderSpec& spec, std::span<const JointObservation* const> batch) {
  BatchInputs in;
  in.batch = static_cast<Eigen::Index>(batch.size());
  in.n = static_cast<int>(batch.front()->obstacles.size());
  const bool raw = spec.robot_input == RobotInput::kProjected;
  in.robot.resize(in.batch, raw ? sim::kFullDim : kRobotFeatureDim);
  in.obstacles.resize(in.batch * in.n, sim::kObservableDim);
  for (Eigen::Index b = 0; b < in.batch; ++b) {
    const auto& obs = *batch[static_cast<std::size_t>(b)];
    if (raw) {
      for (std::size_t j = 0; j < sim::kFullDim; ++j) in.robot(b, Eigen::Index(j)) = obs.robot_full[j];
    } else {
      const auto f = robot_feature(obs);
      for (std::size_t j = 0; j < kRobotFeatureDim; ++j) in.robot(b, Eigen::Index(j)) = f[j];
    }
    for (int i = 0; i < in.n; ++i) {
      const auto o = relative_obstacle(obs, static_cast<std::size_t>(i));
      for (std::size_t j = 0; j < sim::kObservableDim; ++j) {
        in.obstacles(b * in.n + i, Eigen::Index(j)) = o[j];
      }
    }
  }
  return in;
}

Var robot_state(Graph& g, const EncoderSpec& spec, const std::string& prefix, const BatchInputs& in) {
  Var r = g.constant(in.robot);
  if (spec.robot_input == RobotInput::kProjected) {
    const auto layers = robot_projection_layers();
    r = diff::mlp(g, prefix + kRobotProj, layers, r);
  }
  return r;
}

// Row (b*n + i) of the result repeats row b of `per_sample`.
Var repeat_rows(Var per_sample, Eigen::Index batch, int n) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(batch * n));
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int i = 0; i < n; ++i) idx.push_back(static_cast<int>(b));
  }
  return diff::gather_rows(per_sample, std::move(idx));
}

// Step k of a per-sample sequence: rows (b*len + k).
std::vector<Var> sequence_steps(Var rows, Eigen::Index batch, int len) {
  std::vector<Var> steps;
  for (int k = 0; k < len; ++k) {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) idx.push_back(static_cast<int>(b * len + k));
    steps.push_back(diff::gather_rows(rows, std::move(idx)));
  }
  return steps;
}

Var pool_rows(Graph& g, const std::string& prefix, Var weighted, Eigen::Index batch, int n, PoolOp op) {
  if (n == 0) return g.constant(Matrix::Zero(batch, kPooledDim));
  if (op == PoolOp::kSum) return diff::group_sum_rows(weighted, n);
  return diff::lstm(g, prefix + kPool, sequence_steps(weighted, batch, n));
}

EncodedBatch encode_attention_uniform(Graph& g, const EncoderSpec& spec, const std::string& prefix,
                                      const BatchInputs& in) {
  EncodedBatch out;
  out.n_obstacles = in.n;
  Var s_r = robot_state(g, spec, prefix, in);
  if (in.n == 0) {
    out.state = diff::concat_cols({s_r, g.constant(Matrix::Zero(in.batch, kPooledDim))});
    return out;
  }
  Var pair = diff::concat_cols({repeat_rows(s_r, in.batch, in.n), g.constant(in.obstacles)});
  const auto pl = pair_layers();
  Var e = diff::mlp(g, prefix + kPair, pl, pair);
  const auto mode = interaction_mode(spec.variant);
  const auto il = interaction_layers(mode);
  Var h = diff::mlp(g, prefix + kInteract, il,
                    mode == InteractionMode::kPlain ? e : diff::concat_cols({e, pair}));
  const auto sl = score_layers();
  Var scores = diff::mlp(g, prefix + kScore, sl, e);
  Var weights = diff::reshape(diff::row_softmax(diff::reshape(scores, in.batch, in.n)),
                              in.batch * in.n, 1);
  Var weighted = diff::scale_rows(h, weights);
  Var pooled = pool_rows(g, prefix, weighted, in.batch, in.n, pool_op(spec.variant));
  out.state = diff::concat_cols({s_r, pooled});
  out.scores = scores;
  out.weights = weights;
  return out;
}

// H after the message-passing rounds; rows grouped per sample as [robot, obstacles...].
Var graph_features(Graph& g, const EncoderSpec& spec, const std::string& prefix, const BatchInputs& in) {
  const Eigen::Index B = in.batch;
  const int k = in.n + 1;
  const auto rl = robot_embed_layers();
  Var x_r = diff::mlp(g, prefix + kRobotEmbed, rl, robot_state(g, spec, prefix, in));
  Var x;
  if (in.n == 0) {
    x = x_r;
  } else {
    const auto ol = obstacle_embed_layers();
    Var x_o = diff::mlp(g, prefix + kObstacleEmbed, ol, g.constant(in.obstacles));
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(B * k));
    for (Eigen::Index b = 0; b < B; ++b) {
      idx.push_back(static_cast<int>(b));
      for (int i = 0; i < in.n; ++i) idx.push_back(static_cast<int>(B + b * in.n + i));
    }
    x = diff::gather_rows(diff::concat_rows({x_r, x_o}), std::move(idx));
  }

  // A[i, j] = MLP([X_i, X_j]) per sample.
  std::vector<int> left, right;
  left.reserve(static_cast<std::size_t>(B * k * k));
  right.reserve(left.capacity());
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        left.push_back(static_cast<int>(b * k + i));
        right.push_back(static_cast<int>(b * k + j));
      }
    }
  }
  const auto rel = relation_layers();
  Var pairs = diff::concat_cols({diff::gather_rows(x, std::move(left)), diff::gather_rows(x, std::move(right))});
  Var a = diff::reshape(diff::mlp(g, prefix + kRelation, rel, pairs), B * k, k);

  Var h = x;
  for (int round = 0; round < kGraphRounds; ++round) {
    Var msg = diff::matmul(diff::block_matmul(a, h, k), g.param(gcn_weight(prefix, round)));
    h = diff::add(diff::relu(msg), h);
  }
  return h;
}

Var pool_graph(Graph& g, const EncoderSpec& spec, const std::string& prefix, Var h,
               const BatchInputs& in, PoolMode mode) {
  const Eigen::Index B = in.batch;
  const int n = in.n;
  const int k = n + 1;
  auto robot_rows = [&] {
    std::vector<int> idx;
    for (Eigen::Index b = 0; b < B; ++b) idx.push_back(static_cast<int>(b * k));
    return diff::gather_rows(h, std::move(idx));
  };
  auto obstacle_rows = [&] {
    std::vector<int> idx;
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int i = 1; i < k; ++i) idx.push_back(static_cast<int>(b * k + i));
    }
    return diff::gather_rows(h, std::move(idx));
  };
  switch (mode) {
    case PoolMode::kRob:
      return robot_rows();
    case PoolMode::kRobObs:
      return diff::reshape(h, B, k * static_cast<Eigen::Index>(kGraphDim));
    case PoolMode::kSumRobObs:
      return diff::group_sum_rows(h, k);
    case PoolMode::kRobMlpObs: {
      if (n != spec.n_obstacles) {
        throw ConfigError("rob+mlp(obs) built for " + std::to_string(spec.n_obstacles) +
                          " obstacles, got " + std::to_string(n));
      }
      Var pooled = g.constant(Matrix::Zero(B, kPooledDim));
      if (n > 0) {
        const auto layers = pool_mlp_layers(mode, n);
        pooled = diff::mlp(g, prefix + kPoolMlp, layers,
                           diff::reshape(obstacle_rows(), B, n * static_cast<Eigen::Index>(kGraphDim)));
      }
      return diff::concat_cols({robot_rows(), pooled});
    }
    case PoolMode::kMlpRobObs: {
      if (n != spec.n_obstacles) {
        throw ConfigError("mlp(rob+obs) built for " + std::to_string(spec.n_obstacles) +
                          " obstacles, got " + std::to_string(n));
      }
      const auto layers = pool_mlp_layers(mode, n);
      return diff::mlp(g, prefix + kPoolMlp, layers,
                       diff::reshape(h, B, k * static_cast<Eigen::Index>(kGraphDim)));
    }
    case PoolMode::kLstmRobObs:
      return diff::lstm(g, prefix + kPool, sequence_steps(h, B, k));
    case PoolMode::kRobLstmObs: {
      Var pooled = n == 0 ? g.constant(Matrix::Zero(B, kPooledDim))
                          : diff::lstm(g, prefix + kPool, sequence_steps(obstacle_rows(), B, n));
      return diff::concat_cols({robot_rows(), pooled});
    }
  }
  throw ConfigError("unknown pooling mode");
}

EncodedBatch encode_uniform(Graph& g, const EncoderSpec& spec, const std::string& prefix,
                            std::span<const JointObservation* const> batch) {
  if (spec.variant == EncoderVariant::kIdentity) {
    Matrix m(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(spec.identity_width));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t j = 0; j < spec.identity_width; ++j) {
        m(Eigen::Index(b), Eigen::Index(j)) = batch[b]->robot_full.at(j);
      }
    }
    EncodedBatch out;
    out.state = g.constant(std::move(m));
    out.n_obstacles = static_cast<int>(batch.front()->obstacles.size());
    return out;
  }
  const auto in = gather_inputs(spec, batch);
  if (is_attention(spec.variant)) return encode_attention_uniform(g, spec, prefix, in);
  EncodedBatch out;
  out.n_obstacles = in.n;
  out.state = pool_graph(g, spec, prefix, graph_features(g, spec, prefix, in), in, spec.pool);
  return out;
}

}  // namespace

std::string_view to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kRG: return "RG";
    case EncoderVariant::kAW: return "AW";
    case EncoderVariant::kSA: return "SA";
    case EncoderVariant::kLSA: return "LSA";
    case EncoderVariant::kIdentity: return "identity";
  }
  return "?";
}

std::string_view to_string(PoolMode m) {
  switch (m) {
    case PoolMode::kRob: return "rob";
    case PoolMode::kRobObs: return "rob+obs";
    case PoolMode::kSumRobObs: return "sum(rob+obs)";
    case PoolMode::kRobMlpObs: return "rob+mlp(obs)";
    case PoolMode::kMlpRobObs: return "mlp(rob+obs)";
    case PoolMode::kLstmRobObs: return "lstm(rob+obs)";
    case PoolMode::kRobLstmObs: return "rob+lstm(obs)";
  }
  return "?";
}

std::string_view to_string(RobotInput r) {
  return r == RobotInput::kGoalFrame ? "goal_frame" : "projected";
}

EncoderVariant parse_encoder_variant(std::string_view text) {
  for (auto v : {EncoderVariant::kRG, EncoderVariant::kAW, EncoderVariant::kSA, EncoderVariant::kLSA,
                 EncoderVariant::kIdentity}) {
    if (text == to_string(v)) return v;
  }
  throw ConfigError("unknown encoder '" + std::string(text) + "' (expected RG, AW, SA or LSA)");
}

PoolMode parse_pool_mode(std::string_view text) {
  for (auto m : {PoolMode::kRob, PoolMode::kRobObs, PoolMode::kSumRobObs, PoolMode::kRobMlpObs,
                 PoolMode::kMlpRobObs, PoolMode::kLstmRobObs, PoolMode::kRobLstmObs}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown pooling mode '" + std::string(text) + "'");
}

RobotInput parse_robot_input(std::string_view text) {
  if (text == "goal_frame") return RobotInput::kGoalFrame;
  if (text == "projected") return RobotInput::kProjected;
  throw ConfigError("unknown robot input '" + std::string(text) + "'");
}

std::size_t EncoderSpec::output_width() const {
  if (variant == EncoderVariant::kIdentity) return identity_width;
  if (is_attention(variant)) return kEncodedDim;
  const auto n = static_cast<std::size_t>(std::max(n_obstacles, 0));
  switch (pool) {
    case PoolMode::kRob:
    case PoolMode::kSumRobObs: return kGraphDim;
    case PoolMode::kRobObs: return (n + 1) * kGraphDim;
    case PoolMode::kLstmRobObs: return kPooledDim;
    case PoolMode::kRobMlpObs:
    case PoolMode::kMlpRobObs:
    case PoolMode::kRobLstmObs: return kEncodedDim;
  }
  return kEncodedDim;
}

bool EncoderSpec::has_attention() const { return is_attention(variant); }

RobotFeature robot_feature(const JointObservation& obs) {
  const auto& s = obs.robot_full;
  const Frame f = goal_frame(obs);
  const double d_goal = std::hypot(s[5] - s[0], s[6] - s[1]);
  const double vx = s[2] * f.cos_rot + s[3] * f.sin_rot;
  const double vy = -s[2] * f.sin_rot + s[3] * f.cos_rot;
  const double heading = wrap_angle(s[8] - std::atan2(f.sin_rot, f.cos_rot));
  return {d_goal, s[7], vx, vy, s[4], heading};
}

sim::ObservableState relative_obstacle(const JointObservation& obs, std::size_t index) {
  const auto& o = obs.obstacles.at(index);
  const Frame f = goal_frame(obs);
  const double dx = o[0] - f.px, dy = o[1] - f.py;
  return {dx * f.cos_rot + dy * f.sin_rot, -dx * f.sin_rot + dy * f.cos_rot,
          o[2] * f.cos_rot + o[3] * f.sin_rot, -o[2] * f.sin_rot + o[3] * f.cos_rot, o[4]};
}

std::vector<LayerSpec> pair_layers() {
  return {{kPairDim, kProjectedPairDim, Activation::kNone},
          {kProjectedPairDim, kEmbedDim, Activation::kRelu}};
}

std::vector<LayerSpec> interaction_layers(InteractionMode mode) {
  const std::size_t in = mode == InteractionMode::kPlain ? kEmbedDim : kEmbedDim + kPairDim;
  return {{in, kInteractionDim, Activation::kNone}};
}

std::vector<LayerSpec> score_layers() {
  return {{kEmbedDim, kScoreHiddenDim, Activation::kRelu}, {kScoreHiddenDim, 1, Activation::kNone}};
}

void init_encoder(const EncoderSpec& spec, const std::string& prefix, ParameterStore& params,
                  Rng& rng) {
  if (spec.variant == EncoderVariant::kIdentity) return;
  if (spec.robot_input == RobotInput::kProjected) {
    const auto l = robot_projection_layers();
    diff::init_mlp(params, prefix + kRobotProj, l, rng);
  }
  if (is_attention(spec.variant)) {
    const auto pl = pair_layers();
    const auto il = interaction_layers(interaction_mode(spec.variant));
    const auto sl = score_layers();
    diff::init_mlp(params, prefix + kPair, pl, rng);
    diff::init_mlp(params, prefix + kInteract, il, rng);
    diff::init_mlp(params, prefix + kScore, sl, rng);
    if (spec.variant == EncoderVariant::kLSA) {
      diff::init_lstm(params, prefix + kPool, kInteractionDim, kPooledDim, rng);
    }
    return;
  }
  const auto rl = robot_embed_layers();
  const auto ol = obstacle_embed_layers();
  const auto rel = relation_layers();
  diff::init_mlp(params, prefix + kRobotEmbed, rl, rng);
  diff::init_mlp(params, prefix + kObstacleEmbed, ol, rng);
  diff::init_mlp(params, prefix + kRelation, rel, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(kGraphDim));
  for (int round = 0; round < kGraphRounds; ++round) {
    params.add_uniform(gcn_weight(prefix, round), {kGraphDim, kGraphDim}, bound, rng);
  }
  switch (spec.pool) {
    case PoolMode::kRobLstmObs:
    case PoolMode::kLstmRobObs:
      diff::init_lstm(params, prefix + kPool, kGraphDim, kPooledDim, rng);
      break;
    case PoolMode::kRobMlpObs:
      if (spec.n_obstacles > 0) {
        const auto l = pool_mlp_layers(spec.pool, spec.n_obstacles);
        diff::init_mlp(params, prefix + kPoolMlp, l, rng);
      }
      break;
    case PoolMode::kMlpRobObs: {
      const auto l = pool_mlp_layers(spec.pool, spec.n_obstacles);
      diff::init_mlp(params, prefix + kPoolMlp, l, rng);
      break;
    }
    default:
      break;
  }
}

EncodedBatch encode(Graph& graph, const EncoderSpec& spec, const std::string& prefix,
                    std::span<const JointObservation* const> batch) {
  if (batch.empty()) throw InvalidInput("encode: empty batch");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch[i]->obstacles.size()].push_back(i);
  if (groups.size() == 1) return encode_uniform(graph, spec, prefix, batch);

  std::vector<Var> parts;
  std::vector<int> position(batch.size());
  int row = 0;
  for (const auto& [count, members] : groups) {
    std::vector<const JointObservation*> sub;
    sub.reserve(members.size());
    for (auto i : members) {
      sub.push_back(batch[i]);
      position[i] = row++;
    }
    parts.push_back(encode_uniform(graph, spec, prefix, sub).state);
  }
  EncodedBatch out;
  out.state = diff::gather_rows(diff::concat_rows(parts), std::move(position));
  return out;
}

AttentionReport attention_report(const EncodedBatch& encoded, std::size_t sample) {
  AttentionReport r;
  if (!encoded.scores.valid() || encoded.n_obstacles <= 0) return r;
  const auto n = static_cast<std::size_t>(encoded.n_obstacles);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(sample * n + i);
    r.scores.push_back(encoded.scores.value()(row, 0));
    r.weights.push_back(encoded.weights.value()(row, 0));
  }
  return r;
}

std::vector<double> embed_pairwise(const ParameterStore& params, const std::string& prefix,
                                   const RobotFeature& robot, const sim::ObservableState& obstacle) {
  std::vector<double> pair(robot.begin(), robot.end());
  pair.insert(pair.end(), obstacle.begin(), obstacle.end());
  const auto layers = pair_layers();
  return diff::mlp_forward(params, prefix + kPair, layers, pair);
}

std::vector<double> interaction_feature(const ParameterStore& params, const std::string& prefix,
                                        std::span<const double> embedded,
                                        std::span<const double> raw_pair, InteractionMode mode) {
  if (embedded.size() != kEmbedDim) {
    throw ConfigError("interaction_feature: embedded width " + std::to_string(embedded.size()));
  }
  std::vector<double> input(embedded.begin(), embedded.end());
  if (mode == InteractionMode::kSkip) {
    if (raw_pair.size() != kPairDim) {
      throw ConfigError("interaction_feature: skip mode needs an " + std::to_string(kPairDim) +
                        "-wide raw pair, got " + std::to_string(raw_pair.size()));
    }
    input.insert(input.end(), raw_pair.begin(), raw_pair.end());
  }
  const auto layers = interaction_layers(mode);
  return diff::mlp_forward(params, prefix + kInteract, layers, input);
}

AttentionReport attention_scores(const ParameterStore& params, const std::string& prefix,
                                 const std::vector<std::vector<double>>& embedded) {
  AttentionReport r;
  if (embedded.empty()) return r;
  const auto layers = score_layers();
  for (const auto& e : embedded) r.scores.push_back(diff::mlp_forward(params, prefix + kScore, layers, e)[0]);
  r.weights = diff::softmax(r.scores);
  return r;
}

std::vector<double> pool_obstacles(const ParameterStore& params, const std::string& prefix,
                                   const std::vector<std::vector<double>>& weighted, PoolOp op) {
  if (weighted.empty()) throw InvalidInput("pool_obstacles: empty list");
  if (op == PoolOp::kLstm) return diff::lstm_forward(params, prefix + kPool, weighted);
  std::vector<double> out(weighted.front().size(), 0.0);
  for (const auto& w : weighted) {
    if (w.size() != out.size()) throw InvalidInput("pool_obstacles: ragged feature widths");
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w[j];
  }
  return out;
}

AttentionEncoding encode_attention(const ParameterStore& params, const std::string& prefix,
                                   const JointObservation& obs, EncoderVariant variant) {
  if (!is_attention(variant)) throw ConfigError("encode_attention: not an attention variant");
  EncoderSpec spec;
  spec.variant = variant;
  spec.robot_input = params.contains(prefix + kRobotProj + "l0.w") ? RobotInput::kProjected
                                                                   : RobotInput::kGoalFrame;
  Graph g(params, diff::GradMode::kFrozen);
  const JointObservation* ptr = &obs;
  auto enc = encode(g, spec, prefix, std::span<const JointObservation* const>(&ptr, 1));
  const auto& v = enc.state.value();
  return {{v.data(), v.data() + v.size()}, attention_report(enc, 0)};
}

std::vector<double> pool_ablation(const JointObservation& obs, const ParameterStore& params,
                                  const std::string& prefix, PoolMode mode) {
  EncoderSpec spec;
  spec.variant = EncoderVariant::kRG;
  spec.pool = mode;
  spec.n_obstacles = static_cast<int>(obs.obstacles.size());
  spec.robot_input = params.contains(prefix + kRobotProj + "l0.w") ? RobotInput::kProjected
                                                                   : RobotInput::kGoalFrame;
  Graph g(params, diff::GradMode::kFrozen);
  const JointObservation* ptr = &obs;
  auto enc = encode(g, spec, prefix, std::span<const JointObservation* const>(&ptr, 1));
  const auto& v = enc.state.value();
  return {v.data(), v.data() + v.size()};
}

std::vector<double> encode_rg(const ParameterStore& params, const std::string& prefix,
                              const JointObservation& obs) {
  return pool_ablation(obs, params, prefix, PoolMode::kRobLstmObs);
}

}  // namespace crowdsac::enc
