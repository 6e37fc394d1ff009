#include "crowdsac/diff/nn.hpp"

#include <cmath>

#include "crowdsac/errors.hpp"

namespace crowdsac::diff {

std::string layer_weight_name(const std::string& prefix, std::size_t layer) {
  return prefix + "l" + std::to_string(layer) + ".w";
}

std::string layer_bias_name(const std::string& prefix, std::size_t layer) {
  return prefix + "l" + std::to_string(layer) + ".b";
}

void init_mlp(ParameterStore& params, const std::string& prefix,
              std::span<const LayerSpec> layers, Rng& rng) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (k > 0 && layers[k - 1].out != l.in) {
      throw ConfigError(prefix + " layer " + std::to_string(k) + ": input width " +
                        std::to_string(l.in) + " does not follow previous output " +
                        std::to_string(layers[k - 1].out));
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    params.add_uniform(layer_weight_name(prefix, k), {l.in, l.out}, bound, rng);
    params.add_uniform(layer_bias_name(prefix, k), {l.out}, bound, rng);
  }
}

Var mlp(Graph& graph, const std::string& prefix, std::span<const LayerSpec> layers, Var x) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (static_cast<std::size_t>(x.cols()) != l.in) {
      throw ConfigError(prefix + " layer " + std::to_string(k) + ": expected input width " +
                        std::to_string(l.in) + ", got " + std::to_string(x.cols()));
    }
    Var w = graph.param(layer_weight_name(prefix, k));
    if (static_cast<std::size_t>(w.rows()) != l.in ||
        static_cast<std::size_t>(w.cols()) != l.out) {
      throw ConfigError(prefix + " layer " + std::to_string(k) + ": stored weight is " +
                        std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                        ", spec wants " + std::to_string(l.in) + "x" + std::to_string(l.out));
    }
    x = add_bias(matmul(x, w), graph.param(layer_bias_name(prefix, k)));
    if (l.activation == Activation::kRelu) x = relu(x);
  }
  return x;
}

std::vector<double> mlp_forward(const ParameterStore& params, const std::string& prefix,
                                std::span<const LayerSpec> layers, std::span<const double> input) {
  Graph graph(params, GradMode::kFrozen);
  Var out = mlp(graph, prefix, layers, graph.constant(input));
  const auto& v = out.value();
  return {v.data(), v.data() + v.size()};
}

void init_lstm(ParameterStore& params, const std::string& prefix, std::size_t input,
               std::size_t hidden, Rng& rng) {
  params.add_uniform(prefix + "wx", {input, 4 * hidden}, 1.0 / std::sqrt(double(input)), rng);
  params.add_uniform(prefix + "wh", {hidden, 4 * hidden}, 1.0 / std::sqrt(double(hidden)), rng);
  params.add_uniform(prefix + "b", {4 * hidden}, 1.0 / std::sqrt(double(hidden)), rng);
}

std::size_t lstm_hidden_size(const ParameterStore& params, const std::string& prefix) {
  return params.at(prefix + "wh").shape.at(0);
}

Var lstm(Graph& graph, const std::string& prefix, const std::vector<Var>& steps) {
  if (steps.empty()) throw InvalidInput(prefix + "lstm: empty sequence");
  Var wx = graph.param(prefix + "wx");
  Var wh = graph.param(prefix + "wh");
  Var b = graph.param(prefix + "b");
  const Eigen::Index hidden = wh.rows();
  const Eigen::Index batch = steps.front().rows();
  Var h = graph.constant(Matrix::Zero(batch, hidden));
  Var c = graph.constant(Matrix::Zero(batch, hidden));
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const Var& x = steps[t];
    if (x.cols() != wx.rows() || x.rows() != batch) {
      throw InvalidInput(prefix + "lstm: step " + std::to_string(t) + " has shape " +
                         std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         ", cell expects width " + std::to_string(wx.rows()));
    }
    Var gates = add_bias(add(matmul(x, wx), matmul(h, wh)), b);
    Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
    Var forget = sigmoid(slice_cols(gates, hidden, hidden));
    Var candidate = tanh(slice_cols(gates, 2 * hidden, hidden));
    Var out_gate = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    c = add(mul(forget, c), mul(in_gate, candidate));
    h = mul(out_gate, tanh(c));
  }
  return h;
}

std::vector<double> lstm_forward(const ParameterStore& params, const std::string& prefix,
                                 const std::vector<std::vector<double>>& sequence) {
  if (sequence.empty()) throw InvalidInput(prefix + "lstm: empty sequence");
  Graph graph(params, GradMode::kFrozen);
  std::vector<Var> steps;
  steps.reserve(sequence.size());
  for (const auto& x : sequence) steps.push_back(graph.constant(x));
  Var h = lstm(graph, prefix, steps);
  const auto& v = h.value();
  return {v.data(), v.data() + v.size()};
}

}  // namespace crowdsac::diff
