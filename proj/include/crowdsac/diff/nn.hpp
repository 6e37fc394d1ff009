#pragma once

#include <span>
#include <string>
#include <vector>

#include "crowdsac/diff/graph.hpp"

namespace crowdsac::diff {

enum class Activation { kNone, kRelu };

struct LayerSpec {
  std::size_t in;
  std::size_t out;
  Activation activation;
};

// Layer k of an MLP stored under `<prefix>l<k>.w` (in x out) and `<prefix>l<k>.b`.
std::string layer_weight_name(const std::string& prefix, std::size_t layer);
std::string layer_bias_name(const std::string& prefix, std::size_t layer);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
void init_mlp(ParameterStore& params, const std::string& prefix,
              std::span<const LayerSpec> layers, Rng& rng);

// Applies each affine layer followed by its activation to every row of x.
Var mlp(Graph& graph, const std::string& prefix, std::span<const LayerSpec> layers, Var x);

std::vector<double> mlp_forward(const ParameterStore& params, const std::string& prefix,
                                std::span<const LayerSpec> layers, std::span<const double> input);

/// LSTM weights: `<prefix>wx` (in x 4H), `<prefix>wh` (H x 4H), `<prefix>b` (4H),
/// gate blocks ordered input, forget, candidate, output.
void init_lstm(ParameterStore& params, const std::string& prefix, std::size_t input,
               std::size_t hidden, Rng& rng);

std::size_t lstm_hidden_size(const ParameterStore& params, const std::string& prefix);

// Runs the cell over `steps` (each B x input) from zero state; returns h_T (B x H).
Var lstm(Graph& graph, const std::string& prefix, const std::vector<Var>& steps);

std::vector<double> lstm_forward(const ParameterStore& params, const std::string& prefix,
                                 const std::vector<std::vector<double>>& sequence);

}  // namespace crowdsac::diff
