#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crowdsac/diff/params.hpp"

namespace crowdsac::diff {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

enum class GradMode {
  kTrack,   // parameters are differentiable leaves
  kFrozen,  // parameters enter as constants; nothing is recorded
};

/// Tape for reverse-mode differentiation over row-major matrices.
///
/// Nodes are appended in evaluation order, so a reverse sweep over ids is a
/// valid topological order. Parameters are looked up by name in the store the
/// graph was built against; each name maps to one leaf so repeated use
/// accumulates gradient.
class Graph {
 public:
  using BackFn = std::function<void(Graph&, int self)>;

  explicit Graph(const ParameterStore& params, GradMode mode = GradMode::kTrack);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var param(const std::string& name);
  Var constant(Matrix value);
  Var constant(std::span<const double> row);

  // Appends a node; `backward` runs only if some input requires grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackFn backward);
  Var record(Matrix value, const std::vector<Var>& inputs, BackFn backward);

  /// Reverse sweep from a 1x1 loss. Throws UsageError for non-scalar losses
  /// and NumericError if a parameter gradient is not finite.
  GradientStore backward(Var loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Lazily zero-initialized gradient buffer of a node.
  Matrix& grad(int id);

  GradMode mode() const { return mode_; }
  const ParameterStore& params() const { return *params_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackFn backward;
    std::string param_name;
    bool requires_grad = false;
  };

  const ParameterStore* params_;
  GradMode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  bool swept_ = false;
};

// ---- element-wise and shape ops -------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
// x + bias, bias broadcast over rows (bias is 1 x cols).
Var add_bias(Var x, Var bias);
// Row i of x scaled by w(i, 0).
Var scale_rows(Var x, Var w);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
Var minimum(Var a, Var b);
Var detach(Var x);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
// Row r of the result is row index[r] of x; index -1 yields a zero row.
Var gather_rows(Var x, std::vector<int> index);
// Element (r, index[r]) for each row; result is rows x 1.
Var gather_cols(Var x, std::vector<int> index);
// Same row-major data, new shape.
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);

// ---- reductions -----------------------------------------------------------

Var row_sum(Var x);
Var sum_all(Var x);
Var mean_all(Var x);
// Sums consecutive groups of `group` rows: (B*group) x d -> B x d.
Var group_sum_rows(Var x, Eigen::Index group);
// Per block b: a_b (group x group) times h_b (group x d).
Var block_matmul(Var a, Var h, Eigen::Index group);

// ---- distributions --------------------------------------------------------

Var row_softmax(Var x);
Var row_log_softmax(Var x);

// Max-subtracted softmax of a plain vector.
std::vector<double> softmax(std::span<const double> v);

}  // namespace crowdsac::diff
