#include "crowdsac/diff/params.hpp"

#include <cmath>
#include <sstream>

#include "crowdsac/errors.hpp"

namespace crowdsac::diff {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t ParamEntry::cols() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return shape[0];
  return shape_size(shape) / shape[0];
}

void ParameterStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (shape_size(shape) != values.size()) {
    throw ConfigError("parameter '" + name + "': " + std::to_string(values.size()) +
                      " values for shape " + shape_string(shape));
  }
  if (contains(name)) throw ConfigError("parameter '" + name + "' already exists");
  entries_.emplace(name, ParamEntry{std::move(shape), std::move(values)});
}

void ParameterStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = uniform(rng, -bound, bound);
  add(name, std::move(shape), std::move(values));
}

const ParamEntry& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

void ParameterStore::set_values(const std::string& name, std::span<const double> values) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter '" + name + "'");
  if (values.size() != it->second.values.size()) {
    throw ConfigError("parameter '" + name + "': size change " +
                      std::to_string(it->second.values.size()) + " -> " +
                      std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), it->second.values.begin());
}

std::span<double> ParameterStore::values(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second.values;
}

ConstMatrixMap ParameterStore::matrix(const std::string& name) const {
  const auto& e = at(name);
  return ConstMatrixMap(e.values.data(), static_cast<Eigen::Index>(e.rows()),
                        static_cast<Eigen::Index>(e.cols()));
}

MatrixMap ParameterStore::matrix(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("missing parameter '" + name + "'");
  auto& e = it->second;
  return MatrixMap(e.values.data(), static_cast<Eigen::Index>(e.rows()),
                   static_cast<Eigen::Index>(e.cols()));
}

double ParameterStore::log_alpha() const { return at(kLogAlpha).values.at(0); }

double ParameterStore::alpha() const { return std::exp(log_alpha()); }

void ParameterStore::set_log_alpha(double value) {
  if (!std::isfinite(value)) throw NumericError("log_alpha became non-finite");
  if (!contains(kLogAlpha)) {
    add(kLogAlpha, {1}, {value});
  } else {
    entries_.at(kLogAlpha).values[0] = value;
  }
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape != b->second.shape ||
        a->second.values != b->second.values) {
      return false;
    }
  }
  return true;
}

void GradientStore::accumulate(const std::string& name, const Shape& shape,
                               std::span<const double> grad) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    entries_.emplace(name, ParamEntry{shape, std::vector<double>(grad.begin(), grad.end())});
    return;
  }
  auto& dst = it->second.values;
  if (dst.size() != grad.size()) throw ConfigError("gradient size mismatch for '" + name + "'");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += grad[i];
}

const ParamEntry& GradientStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no gradient for '" + name + "'");
  return it->second;
}

void GradientStore::check_finite() const {
  for (const auto& [name, e] : entries_) {
    for (double v : e.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter '" + name + "'");
    }
  }
}

}  // namespace crowdsac::diff
