#pragma once

#include <vector>

#include "cluttermap/core/rng.hpp"
#include "cluttermap/net/config.hpp"
#include "cluttermap/nn/grad_check.hpp"

namespace testutil {

using namespace cluttermap;

// Small randomized architectures for gradient sweeps: every layer kind is
// reachable (conv, relu, pool, batch norm, dropout, fully connected, both
// heads).
inline net::NetConfig random_small_config(Rng& rng) {
  net::NetConfig c;
  c.input_side = 8 + 4 * static_cast<int>(rng.uniform_int(2));  // 8 or 12
  const int blocks = 1 + static_cast<int>(rng.uniform_int(2));
  c.conv_block_channels.clear();
  for (int i = 0; i < blocks; ++i)
    c.conv_block_channels.push_back(2 + static_cast<int>(rng.uniform_int(3)));
  c.kernel_size = 3;
  c.batchnorm_on_last_conv = true;
  c.extra_final_pool = rng.uniform() < 0.5;
  c.dropout_probability = rng.uniform() < 0.3 ? 0.0 : 0.5;
  switch (rng.uniform_int(3)) {
    case 0: c.head = net::SoftmaxHead{3}; break;
    case 1: c.head = net::SoftmaxHead{5}; break;
    default: c.head = net::SigmoidHead{}; break;
  }
  return c;
}

template <typename T>
Tensor<T> random_batch(int n, int side, Rng& rng) {
  Tensor<T> x({n, 3, side, side});
  for (auto& v : x.data) v = static_cast<T>(rng.uniform(0.0, 1.0));
  return x;
}

// Cross-entropy / binary cross-entropy loss closures for gradient checks.
template <typename T>
nn::LossFn<T> loss_for_head(const net::NetConfig& config,
                            const std::vector<int>& labels) {
  if (std::holds_alternative<net::SigmoidHead>(config.head)) {
    return [labels](const Tensor<T>& logits, Tensor<T>* d) {
      return nn::binary_cross_entropy_batch(logits, labels, d);
    };
  }
  return [labels](const Tensor<T>& logits, Tensor<T>* d) {
    return nn::cross_entropy_batch(logits, labels, d);
  };
}

inline std::vector<int> random_labels(int n, int classes, Rng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(classes));
  return labels;
}

}  // namespace testutil
