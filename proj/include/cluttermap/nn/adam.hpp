#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "cluttermap/core/error.hpp"
#include "cluttermap/nn/layers.hpp"

namespace cluttermap::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed set of named parameter tensors.
template <typename T>
class AdamState {
public:
  AdamState(const std::vector<NamedParam<T>>& params, AdamConfig config)
      : config_(config) {
    require(config.learning_rate > 0, "learning rate must be positive");
    require(config.beta1 > 0 && config.beta1 < 1 && config.beta2 > 0 &&
                config.beta2 < 1,
            "Adam betas must be in (0,1)");
    require(config.epsilon > 0, "Adam epsilon must be positive");
    for (const auto& p : params) {
      moments_[p.name] = {std::vector<double>(p.tensor->size(), 0.0),
                          std::vector<double>(p.tensor->size(), 0.0)};
    }
  }

  long long step_count() const { return step_; }

  struct StepResult {
    bool applied = true;
    std::string diagnostic;
  };

  // One update over all parameters. If any gradient is non-finite the whole
  // step is rejected: no parameter moves and step_count stays unchanged.
  StepResult step(const std::vector<NamedParam<T>>& params) {
    for (const auto& p : params) {
      require(p.tensor->has_grad(), "parameter ", p.name, " has no gradient");
      for (const T g : p.tensor->grad) {
        if (!std::isfinite(static_cast<double>(g))) {
          return {false, "non-finite gradient in " + p.name +
                             "; update rejected for this step"};
        }
      }
    }
    const long long t = step_ + 1;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
    for (const auto& p : params) {
      auto it = moments_.find(p.name);
      require(it != moments_.end(), "unknown parameter ", p.name);
      auto& [m, v] = it->second;
      require(m.size() == p.tensor->size(), "moment shape mismatch for ",
              p.name);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = p.tensor->grad[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p.tensor->data[i] = static_cast<T>(
            p.tensor->data[i] -
            config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon));
      }
    }
    step_ = t;
    return {};
  }

private:
  AdamConfig config_;
  long long step_ = 0;
  std::unordered_map<std::string,
                     std::pair<std::vector<double>, std::vector<double>>>
      moments_;
};

}  // namespace cluttermap::nn
