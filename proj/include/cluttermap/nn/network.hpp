#pragma once

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cluttermap/nn/layers.hpp"

namespace cluttermap::nn {

// A plain layer sequence with recorded intermediate state. The head
// activation (softmax/sigmoid) is not a layer: losses are computed from the
// final logits in fused form, and inference applies the activation
// explicitly.
template <typename T>
class Network {
public:
  struct Entry {
    std::string name;
    std::unique_ptr<Layer<T>> layer;
  };

  void add(std::string name, std::unique_ptr<Layer<T>> layer) {
    if (layers_.empty()) layer->needs_input_grad = false;
    layers_.push_back({std::move(name), std::move(layer)});
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, ThreadPool& pool) {
    Tensor<T> cur = x;
    for (auto& e : layers_) cur = e.layer->forward(cur, mode, pool);
    forward_done_ = true;
    return cur;
  }

  // dlogits is the gradient of the scalar loss w.r.t. the network output.
  void backward(const Tensor<T>& dlogits, ThreadPool& pool) {
    require(forward_done_,
            "backward called without a completed forward pass");
    Tensor<T> cur = dlogits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      cur = it->layer->backward(cur, pool);
    forward_done_ = false;
  }

  std::vector<NamedParam<T>> params() {
    std::vector<NamedParam<T>> out;
    for (auto& e : layers_) e.layer->collect_params(e.name, out);
    return out;
  }

  std::vector<NamedParam<T>> buffers() {
    std::vector<NamedParam<T>> out;
    for (auto& e : layers_) e.layer->collect_buffers(e.name, out);
    return out;
  }

  // Learnable element count; running statistics are excluded.
  long long count_parameters() {
    long long n = 0;
    for (const auto& p : params()) n += static_cast<long long>(p.tensor->size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params()) {
      p.tensor->ensure_grad();
      p.tensor->zero_grad();
    }
  }

  // Reseeds every dropout layer; used to make repeated forwards (e.g. a
  // finite-difference sweep) draw identical masks.
  void reseed_dropout(std::uint64_t seed) {
    int i = 0;
    for (auto& e : layers_) {
      if (auto* d = dynamic_cast<Dropout<T>*>(e.layer.get()))
        d->reseed(derive_seed(seed, "dropout/" + std::to_string(i++)));
    }
  }

  std::vector<Entry>& layers() { return layers_; }

private:
  std::vector<Entry> layers_;
  bool forward_done_ = false;
};

// ---------------------------------------------------------------------------
// Batched losses from logits. Both return the mean loss over the batch and
// write the gradient w.r.t. the logits.
// ---------------------------------------------------------------------------

template <typename T>
double cross_entropy_batch(const Tensor<T>& logits,
                           const std::vector<int>& labels, Tensor<T>* dlogits) {
  require(logits.rank() == 2, "expected NxC logits");
  const int N = logits.dim(0), C = logits.dim(1);
  require(static_cast<int>(labels.size()) == N, "label count mismatch");
  if (dlogits) *dlogits = Tensor<T>(logits.shape);
  double total = 0;
  for (int n = 0; n < N; ++n) {
    const T* z = logits.data.data() + static_cast<std::size_t>(n) * C;
    const int y = labels[static_cast<std::size_t>(n)];
    require(y >= 0 && y < C, "class index ", y, " out of range");
    T mx = z[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, z[c]);
    double sum = 0;
    for (int c = 0; c < C; ++c) sum += std::exp(static_cast<double>(z[c] - mx));
    total += std::log(sum) + static_cast<double>(mx) - static_cast<double>(z[y]);
    if (dlogits) {
      T* d = dlogits->data.data() + static_cast<std::size_t>(n) * C;
      for (int c = 0; c < C; ++c) {
        const double p = std::exp(static_cast<double>(z[c] - mx)) / sum;
        d[c] = static_cast<T>((p - (c == y ? 1.0 : 0.0)) / N);
      }
    }
  }
  return total / N;
}

template <typename T>
double binary_cross_entropy_batch(const Tensor<T>& logits,
                                  const std::vector<int>& bits,
                                  Tensor<T>* dlogits) {
  require(logits.rank() == 2 && logits.dim(1) == 1,
          "expected Nx1 logits for the sigmoid head");
  const int N = logits.dim(0);
  require(static_cast<int>(bits.size()) == N, "label count mismatch");
  if (dlogits) *dlogits = Tensor<T>(logits.shape);
  double total = 0;
  for (int n = 0; n < N; ++n) {
    const double z = logits[static_cast<std::size_t>(n)];
    const int y = bits[static_cast<std::size_t>(n)];
    require(y == 0 || y == 1, "binary target must be 0 or 1");
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    if (dlogits) {
      const double p = 1.0 / (1.0 + std::exp(-z));
      (*dlogits)[static_cast<std::size_t>(n)] = static_cast<T>((p - y) / N);
    }
  }
  return total / N;
}

}  // namespace cluttermap::nn
