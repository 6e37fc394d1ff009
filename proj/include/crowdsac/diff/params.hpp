#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "crowdsac/rng.hpp"

namespace crowdsac::diff {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct ParamEntry {
  Shape shape;
  std::vector<double> values;

  // Rank-1 entries are viewed as a single row.
  std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  std::size_t cols() const;
};

/// Named flat arrays holding every trainable weight plus the log-temperature.
///
/// Shapes are fixed at insertion; later writes may only change values.
/// Iteration order is lexicographic by name, which fixes the checkpoint
/// byte layout.
class ParameterStore {
 public:
  static constexpr const char* kLogAlpha = "log_alpha";

  void add(const std::string& name, Shape shape, std::vector<double> values);
  void add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const ParamEntry& at(const std::string& name) const;

  // Replaces the values of an existing entry; the length must not change.
  void set_values(const std::string& name, std::span<const double> values);
  std::span<double> values(const std::string& name);

  ConstMatrixMap matrix(const std::string& name) const;
  MatrixMap matrix(const std::string& name);

  const std::map<std::string, ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  double log_alpha() const;
  double alpha() const;
  void set_log_alpha(double value);

  bool operator==(const ParameterStore& other) const;

 private:
  std::map<std::string, ParamEntry> entries_;
};

/// Gradients keyed like the store they were computed from. Only parameters
/// touched by the loss appear.
class GradientStore {
 public:
  void accumulate(const std::string& name, const Shape& shape, std::span<const double> grad);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const ParamEntry& at(const std::string& name) const;
  const std::map<std::string, ParamEntry>& entries() const { return entries_; }

  // Throws NumericError naming the first parameter with a non-finite value.
  void check_finite() const;

 private:
  std::map<std::string, ParamEntry> entries_;
};

}  // namespace crowdsac::diff
