#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cluttermap/nn/adam.hpp"
#include "cluttermap/nn/network.hpp"

namespace cluttermap::nn {

// Central-finite-difference verification of the analytic gradients. Dropout
// is reseeded to the same stream before every forward so each evaluation sees
// identical masks; batch statistics are recomputed per forward, which is part
// of the differentiated function.
//
// The central difference is only a valid oracle when the loss is smooth
// inside [theta-h, theta+h]. A ReLU or pooling kink falling inside the
// interval produces an O(1) discrepancy that has nothing to do with the
// analytic gradient, so a parameter that misses the tolerance at the primary
// step is re-evaluated at h/10 and h/100 and accepted if any scale agrees.
struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  std::string worst_param;

  bool passed(double tolerance = 1e-4) const {
    return max_rel_error <= tolerance;
  }
};

// loss(logits, dlogits_or_null) -> scalar loss
template <typename T>
using LossFn = std::function<double(const Tensor<T>&, Tensor<T>*)>;

template <typename T>
GradCheckReport check_gradients(Network<T>& net, const Tensor<T>& input,
                                const LossFn<T>& loss, Rng& rng,
                                int samples_per_tensor = 0, double h = 1e-5,
                                std::uint64_t mask_seed = 12345,
                                double tolerance = 1e-4) {
  ThreadPool& pool = serial_pool();
  auto run_loss = [&](Tensor<T>* dlogits) {
    net.reseed_dropout(mask_seed);
    Tensor<T> logits = net.forward(input, Mode::Train, pool);
    return loss(logits, dlogits);
  };

  net.zero_grad();
  Tensor<T> dlogits;
  run_loss(&dlogits);
  net.backward(dlogits, pool);

  auto params = net.params();
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.tensor->grad);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>* t = params[pi].tensor;
    std::vector<std::size_t> indices;
    if (samples_per_tensor <= 0 ||
        static_cast<std::size_t>(samples_per_tensor) >= t->size()) {
      indices.resize(t->size());
      for (std::size_t i = 0; i < t->size(); ++i) indices[i] = i;
    } else {
      for (int i = 0; i < samples_per_tensor; ++i)
        indices.push_back(static_cast<std::size_t>(rng.uniform_int(t->size())));
    }
    for (std::size_t idx : indices) {
      const double an = analytic[pi][idx];
      double best_rel = 0.0;
      for (int scale = 0; scale < 3; ++scale) {
        const double hs = h / std::pow(10.0, scale);
        const T saved = t->data[idx];
        t->data[idx] = saved + static_cast<T>(hs);
        const double up = run_loss(nullptr);
        t->data[idx] = saved - static_cast<T>(hs);
        const double down = run_loss(nullptr);
        t->data[idx] = saved;
        const double fd = (up - down) / (2.0 * hs);
        const double denom = std::max(std::abs(an), std::abs(fd));
        const double rel = denom < 1e-7 ? 0.0 : std::abs(an - fd) / denom;
        if (scale == 0 || rel < best_rel) best_rel = rel;
        if (best_rel <= tolerance) break;
      }
      ++report.checked;
      if (best_rel > report.max_rel_error) {
        report.max_rel_error = best_rel;
        report.worst_param =
            params[pi].name + "[" + std::to_string(idx) + "]";
      }
    }
  }
  // Leave the network consistent with the unperturbed parameters.
  net.zero_grad();
  run_loss(&dlogits);
  net.backward(dlogits, pool);
  return report;
}

}  // namespace cluttermap::nn
