#include "crowdsac/diff/adam.hpp"

#include <cmath>

#include "crowdsac/errors.hpp"

namespace crowdsac::diff {

OptimizerState::OptimizerState(const ParameterStore& params, const std::vector<std::string>& names,
                               AdamConfig config)
    : config_(config) {
  for (const auto& name : names) {
    const auto n = params.at(name).values.size();
    moments_.emplace(name, Moments{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  }
}

void adam_step(ParameterStore& params, const GradientStore& grads, OptimizerState& opt) {
  grads.check_finite();
  for (const auto& [name, g] : grads.entries()) {
    if (!opt.tracks(name)) throw ConfigError("no optimizer state for parameter '" + name + "'");
  }
  ++opt.step_;
  const auto& c = opt.config_;
  const double t = static_cast<double>(opt.step_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, mom] : opt.moments_) {
    auto values = params.values(name);
    const std::vector<double>* g = grads.contains(name) ? &grads.at(name).values : nullptr;
    if (values.size() != mom.m.size()) throw ConfigError("optimizer shape drift for '" + name + "'");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * gi;
      mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      values[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace crowdsac::diff
