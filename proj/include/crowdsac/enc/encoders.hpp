#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsac/diff/graph.hpp"
#include "crowdsac/diff/nn.hpp"
#include "crowdsac/sim/world.hpp"

namespace crowdsac::enc {

using diff::Graph;
using diff::ParameterStore;
using diff::Var;
using sim::JointObservation;

inline constexpr std::size_t kRobotFeatureDim = 6;
inline constexpr std::size_t kPairDim = kRobotFeatureDim + sim::kObservableDim;  // 11
inline constexpr std::size_t kProjectedPairDim = 150;
inline constexpr std::size_t kEmbedDim = 100;
inline constexpr std::size_t kInteractionDim = 50;
inline constexpr std::size_t kScoreHiddenDim = 100;
inline constexpr std::size_t kPooledDim = 50;
inline constexpr std::size_t kEncodedDim = kRobotFeatureDim + kPooledDim;  // 56
// Row width of the relational-graph feature matrix.
inline constexpr std::size_t kGraphDim = kRobotFeatureDim;
inline constexpr std::size_t kGraphHiddenDim = 32;
inline constexpr int kGraphRounds = 2;

enum class EncoderVariant { kRG, kAW, kSA, kLSA, kIdentity };

// Ablation family over the relational-graph output H.
enum class PoolMode {
  kRob,         // H[0,:]
  kRobObs,      // [H[0,:], H[1,:], ..., H[n,:]]
  kSumRobObs,   // sum of all rows of H
  kRobMlpObs,   // [H[0,:], MLP(H[1:,:])]
  kMlpRobObs,   // MLP(H)
  kLstmRobObs,  // LSTM(H[0:,:])
  kRobLstmObs,  // [H[0,:], LSTM(H[1:,:])], the default
};

enum class InteractionMode { kPlain, kSkip };
enum class PoolOp { kSum, kLstm };

enum class RobotInput {
  kGoalFrame,  // [d_goal, v_pref, vx, vy, r, heading] rotated into the goal frame
  kProjected,  // learned linear map of the raw 9-dim robot state
};

std::string_view to_string(EncoderVariant v);
std::string_view to_string(PoolMode m);
EncoderVariant parse_encoder_variant(std::string_view text);
PoolMode parse_pool_mode(std::string_view text);
RobotInput parse_robot_input(std::string_view text);
std::string_view to_string(RobotInput r);

struct EncoderSpec {
  EncoderVariant variant = EncoderVariant::kLSA;
  PoolMode pool = PoolMode::kRobLstmObs;
  RobotInput robot_input = RobotInput::kGoalFrame;
  // Fixes the input width of the flattening ablation modes.
  int n_obstacles = 1;
  std::size_t identity_width = sim::kFullDim;

  std::size_t output_width() const;
  bool has_attention() const;
};

using RobotFeature = std::array<double, kRobotFeatureDim>;

RobotFeature robot_feature(const JointObservation& obs);
// Obstacle observable state re-expressed relative to the robot, goal frame.
sim::ObservableState relative_obstacle(const JointObservation& obs, std::size_t index);

struct AttentionReport {
  std::vector<double> scores;   // raw alpha_i
  std::vector<double> weights;  // softmax(alpha)
};

struct EncodedBatch {
  Var state;    // B x output_width
  Var scores;   // (B*n) x 1, attention family with uniform n > 0 only
  Var weights;  // (B*n) x 1
  int n_obstacles = -1;  // -1 when the batch mixed obstacle counts
};

void init_encoder(const EncoderSpec& spec, const std::string& prefix, ParameterStore& params,
                  Rng& rng);

/// Encodes a batch. Observations with differing obstacle counts are encoded
/// per group and re-assembled in input order.
EncodedBatch encode(Graph& graph, const EncoderSpec& spec, const std::string& prefix,
                    std::span<const JointObservation* const> batch);

AttentionReport attention_report(const EncodedBatch& encoded, std::size_t sample);

// ---- single-observation entry points ---------------------------------------

std::vector<double> embed_pairwise(const ParameterStore& params, const std::string& prefix,
                                   const RobotFeature& robot, const sim::ObservableState& obstacle);

std::vector<double> interaction_feature(const ParameterStore& params, const std::string& prefix,
                                        std::span<const double> embedded,
                                        std::span<const double> raw_pair, InteractionMode mode);

AttentionReport attention_scores(const ParameterStore& params, const std::string& prefix,
                                 const std::vector<std::vector<double>>& embedded);

std::vector<double> pool_obstacles(const ParameterStore& params, const std::string& prefix,
                                   const std::vector<std::vector<double>>& weighted, PoolOp op);

struct AttentionEncoding {
  std::vector<double> state;
  AttentionReport report;
};

AttentionEncoding encode_attention(const ParameterStore& params, const std::string& prefix,
                                   const JointObservation& obs, EncoderVariant variant);

std::vector<double> encode_rg(const ParameterStore& params, const std::string& prefix,
                              const JointObservation& obs);

std::vector<double> pool_ablation(const JointObservation& obs, const ParameterStore& params,
                                  const std::string& prefix, PoolMode mode);

// Layer specs, exposed for oracle tests.
std::vector<diff::LayerSpec> pair_layers();
std::vector<diff::LayerSpec> interaction_layers(InteractionMode mode);
std::vector<diff::LayerSpec> score_layers();

}  // namespace crowdsac::enc
