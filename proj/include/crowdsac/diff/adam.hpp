#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crowdsac/diff/params.hpp"

namespace crowdsac::diff {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments for a fixed set of parameter names.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const ParameterStore& params, const std::vector<std::string>& names,
                 AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  bool tracks(const std::string& name) const { return moments_.count(name) != 0; }

 private:
  friend void adam_step(ParameterStore&, const GradientStore&, OptimizerState&);

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

// Bias-corrected Adam update of every parameter present in `grads`.
// Tracked parameters absent from `grads` see a zero gradient.
void adam_step(ParameterStore& params, const GradientStore& grads, OptimizerState& opt);

}  // namespace crowdsac::diff
