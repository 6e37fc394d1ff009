#include "crowdsac/diff/graph.hpp"

#include <algorithm>
#include <cmath>

#include "crowdsac/errors.hpp"

namespace crowdsac::diff {

const Matrix& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw UsageError("scalar() on a " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + " node");
  }
  return v(0, 0);
}

bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Graph::Graph(const ParameterStore& params, GradMode mode) : params_(&params), mode_(mode) {
  nodes_.reserve(256);
}

Var Graph::param(const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return {this, it->second};
  Node node;
  node.value = params_->matrix(name);
  node.param_name = name;
  node.requires_grad = (mode_ == GradMode::kTrack);
  nodes_.push_back(std::move(node));
  int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(name, id);
  return {this, id};
}

Var Graph::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(std::span<const double> row) {
  Matrix m(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = row[i];
  return constant(std::move(m));
}

Var Graph::record(Matrix value, std::initializer_list<Var> inputs, BackFn backward) {
  Node node;
  node.value = std::move(value);
  for (const auto& in : inputs) {
    if (nodes_[in.id()].requires_grad) {
      node.requires_grad = true;
      break;
    }
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(Matrix value, const std::vector<Var>& inputs, BackFn backward) {
  Node node;
  node.value = std::move(value);
  for (const auto& in : inputs) {
    if (nodes_[in.id()].requires_grad) {
      node.requires_grad = true;
      break;
    }
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Graph::grad(int id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

GradientStore Graph::backward(Var loss) {
  const auto& v = loss.value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw UsageError("backward needs a scalar loss, got " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()));
  }
  if (swept_) throw UsageError("backward called twice on the same graph");
  swept_ = true;
  GradientStore out;
  if (!nodes_[loss.id()].requires_grad) return out;
  grad(loss.id())(0, 0) = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    auto& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (const auto& [name, id] : param_ids_) {
    auto& n = nodes_[id];
    if (!n.requires_grad) continue;
    const auto& entry = params_->at(name);
    if (n.grad.size() == 0) {
      // Touched by the graph but not reachable from the loss.
      continue;
    }
    out.accumulate(name, entry.shape, std::span<const double>(n.grad.data(), n.grad.size()));
  }
  out.check_finite();
  return out;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.rows()));
  }
  Matrix out;
  out.noalias() = a.value() * b.value();
  int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ia)) g.grad(ia).noalias() += go * g.value(ib).transpose();
    if (g.requires_grad(ib)) g.grad(ib).noalias() += g.value(ia).transpose() * go;
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  int ia = a.id(), ib = b.id();
  return a.graph().record(a.value() + b.value(), {a, b}, [ia, ib](Graph& g, int self) {
    if (g.requires_grad(ia)) g.grad(ia) += g.grad(self);
    if (g.requires_grad(ib)) g.grad(ib) += g.grad(self);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  int ia = a.id(), ib = b.id();
  return a.graph().record(a.value() - b.value(), {a, b}, [ia, ib](Graph& g, int self) {
    if (g.requires_grad(ia)) g.grad(ia) += g.grad(self);
    if (g.requires_grad(ib)) g.grad(ib) -= g.grad(self);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  int ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ia)) g.grad(ia) += go.cwiseProduct(g.value(ib));
    if (g.requires_grad(ib)) g.grad(ib) += go.cwiseProduct(g.value(ia));
  });
}

Var scale(Var a, double factor) {
  int ia = a.id();
  return a.graph().record(a.value() * factor, {a}, [ia, factor](Graph& g, int self) {
    g.grad(ia) += g.grad(self) * factor;
  });
}

Var add_scalar(Var a, double offset) {
  int ia = a.id();
  Matrix out = a.value().array() + offset;
  return a.graph().record(std::move(out), {a},
                          [ia](Graph& g, int self) { g.grad(ia) += g.grad(self); });
}

Var add_bias(Var x, Var bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ConfigError("add_bias: bias " + std::to_string(bias.rows()) + "x" +
                      std::to_string(bias.cols()) + " for input width " +
                      std::to_string(x.cols()));
  }
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  int ix = x.id(), ib = bias.id();
  return x.graph().record(std::move(out), {x, bias}, [ix, ib](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ix)) g.grad(ix) += go;
    if (g.requires_grad(ib)) g.grad(ib) += go.colwise().sum();
  });
}

Var scale_rows(Var x, Var w) {
  if (w.cols() != 1 || w.rows() != x.rows()) throw ConfigError("scale_rows: weight shape");
  Matrix out = w.value().col(0).asDiagonal() * x.value();
  int ix = x.id(), iw = w.id();
  return x.graph().record(std::move(out), {x, w}, [ix, iw](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    if (g.requires_grad(ix)) g.grad(ix) += g.value(iw).col(0).asDiagonal() * go;
    if (g.requires_grad(iw)) {
      g.grad(iw).col(0) += go.cwiseProduct(g.value(ix)).rowwise().sum();
    }
  });
}

Var relu(Var x) {
  int ix = x.id();
  Matrix out = x.value().cwiseMax(0.0);
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    g.grad(ix).array() += (g.value(ix).array() > 0.0).select(g.grad(self).array(), 0.0);
  });
}

Var sigmoid(Var x) {
  int ix = x.id();
  Matrix out = (1.0 + (-x.value().array()).exp()).inverse().matrix();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    const auto y = g.value(self).array();
    g.grad(ix).array() += g.grad(self).array() * y * (1.0 - y);
  });
}

Var tanh(Var x) {
  int ix = x.id();
  Matrix out = x.value().array().tanh().matrix();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    const auto y = g.value(self).array();
    g.grad(ix).array() += g.grad(self).array() * (1.0 - y.square());
  });
}

Var exp(Var x) {
  int ix = x.id();
  Matrix out = x.value().array().exp().matrix();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    g.grad(ix).array() += g.grad(self).array() * g.value(self).array();
  });
}

Var log(Var x) {
  int ix = x.id();
  Matrix out = x.value().array().log().matrix();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    g.grad(ix).array() += g.grad(self).array() / g.value(ix).array();
  });
}

Var square(Var x) {
  int ix = x.id();
  Matrix out = x.value().array().square().matrix();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    g.grad(ix).array() += 2.0 * g.grad(self).array() * g.value(ix).array();
  });
}

Var minimum(Var a, Var b) {
  require_same_shape(a, b, "minimum");
  int ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseMin(b.value());
  // Ties route the gradient to the first operand.
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, int self) {
    auto pick_a = (g.value(ia).array() <= g.value(ib).array());
    const auto go = g.grad(self).array();
    if (g.requires_grad(ia)) g.grad(ia).array() += pick_a.select(go, 0.0);
    if (g.requires_grad(ib)) g.grad(ib).array() += pick_a.select(0.0, go);
  });
}

Var detach(Var x) { return x.graph().constant(x.value()); }

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no parts");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ConfigError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(c);
    c += p.cols();
  }
  return parts[0].graph().record(std::move(out), parts, [ids, offsets](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g.requires_grad(ids[i])) continue;
      g.grad(ids[i]) += go.middleCols(offsets[i], g.value(ids[i]).cols());
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no parts");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ConfigError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(r);
    r += p.rows();
  }
  return parts[0].graph().record(std::move(out), parts, [ids, offsets](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g.requires_grad(ids[i])) continue;
      g.grad(ids[i]) += go.middleRows(offsets[i], g.value(ids[i]).rows());
    }
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ConfigError("slice_cols: range [" + std::to_string(start) + ", " +
                      std::to_string(start + count) + ") outside width " +
                      std::to_string(x.cols()));
  }
  int ix = x.id();
  Matrix out = x.value().middleCols(start, count);
  return x.graph().record(std::move(out), {x}, [ix, start, count](Graph& g, int self) {
    g.grad(ix).middleCols(start, count) += g.grad(self);
  });
}

Var gather_rows(Var x, std::vector<int> index) {
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), xv.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0) {
      out.row(static_cast<Eigen::Index>(r)).setZero();
    } else {
      if (index[r] >= xv.rows()) throw ConfigError("gather_rows: index out of range");
      out.row(static_cast<Eigen::Index>(r)) = xv.row(index[r]);
    }
  }
  int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, index = std::move(index)](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] >= 0) gx.row(index[r]) += go.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var gather_cols(Var x, std::vector<int> index) {
  const Matrix& xv = x.value();
  if (static_cast<Eigen::Index>(index.size()) != xv.rows()) {
    throw ConfigError("gather_cols: one index per row required");
  }
  Matrix out(xv.rows(), 1);
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    int c = index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= xv.cols()) throw ConfigError("gather_cols: index out of range");
    out(r, 0) = xv(r, c);
  }
  int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, index = std::move(index)](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (Eigen::Index r = 0; r < go.rows(); ++r) gx(r, index[static_cast<std::size_t>(r)]) += go(r, 0);
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != x.value().size()) throw ConfigError("reshape: size mismatch");
  Matrix out = ConstMatrixMap(x.value().data(), rows, cols);
  int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    Matrix& gx = g.grad(ix);
    const Matrix& go = g.grad(self);
    MatrixMap(gx.data(), go.rows(), go.cols()) += go;
  });
}

Var row_sum(Var x) {
  int ix = x.id();
  Matrix out = x.value().rowwise().sum();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    g.grad(ix).colwise() += g.grad(self).col(0);
  });
}

Var sum_all(Var x) {
  int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    g.grad(ix).array() += g.grad(self)(0, 0);
  });
}

Var mean_all(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw InvalidInput("mean_all of an empty matrix");
  return scale(sum_all(x), 1.0 / n);
}

Var group_sum_rows(Var x, Eigen::Index group) {
  const Matrix& xv = x.value();
  if (group <= 0 || xv.rows() % group != 0) throw ConfigError("group_sum_rows: bad group size");
  const Eigen::Index blocks = xv.rows() / group;
  Matrix out = Matrix::Zero(blocks, xv.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    for (Eigen::Index k = 0; k < group; ++k) out.row(b) += xv.row(b * group + k);
  }
  int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, group](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (Eigen::Index r = 0; r < gx.rows(); ++r) gx.row(r) += go.row(r / group);
  });
}

Var block_matmul(Var a, Var h, Eigen::Index group) {
  const Matrix& av = a.value();
  const Matrix& hv = h.value();
  if (group <= 0 || av.cols() != group || av.rows() != hv.rows() || av.rows() % group != 0) {
    throw ConfigError("block_matmul: incompatible block shapes");
  }
  const Eigen::Index blocks = av.rows() / group;
  Matrix out(hv.rows(), hv.cols());
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.middleRows(b * group, group).noalias() =
        av.middleRows(b * group, group) * hv.middleRows(b * group, group);
  }
  int ia = a.id(), ih = h.id();
  return a.graph().record(std::move(out), {a, h}, [ia, ih, group, blocks](Graph& g, int self) {
    const Matrix& go = g.grad(self);
    for (Eigen::Index b = 0; b < blocks; ++b) {
      auto gob = go.middleRows(b * group, group);
      if (g.requires_grad(ia)) {
        g.grad(ia).middleRows(b * group, group).noalias() +=
            gob * g.value(ih).middleRows(b * group, group).transpose();
      }
      if (g.requires_grad(ih)) {
        g.grad(ih).middleRows(b * group, group).noalias() +=
            g.value(ia).middleRows(b * group, group).transpose() * gob;
      }
    }
  });
}

Var row_softmax(Var x) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double m = xv.row(r).maxCoeff();
    out.row(r) = (xv.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& go = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = go.row(r).dot(y.row(r));
      gx.row(r).array() += y.row(r).array() * (go.row(r).array() - dot);
    }
  });
}

Var row_log_softmax(Var x) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double m = xv.row(r).maxCoeff();
    const double lse = m + std::log((xv.row(r).array() - m).exp().sum());
    out.row(r) = xv.row(r).array() - lse;
  }
  int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, int self) {
    const Matrix& y = g.value(self);
    const Matrix& go = g.grad(self);
    Matrix& gx = g.grad(ix);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double total = go.row(r).sum();
      gx.row(r).array() += go.row(r).array() - y.row(r).array().exp() * total;
    }
  });
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double m = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    total += out[i];
  }
  for (auto& o : out) o /= total;
  return out;
}

}  // namespace crowdsac::diff
