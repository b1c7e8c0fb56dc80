#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cluttermap/core/parallel.hpp"
#include "cluttermap/core/rng.hpp"
#include "cluttermap/core/tensor.hpp"
#include "cluttermap/nn/ops.hpp"

namespace cluttermap::nn {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Layer descriptors
// ---------------------------------------------------------------------------

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 3;
  bool same_padding = true;
  bool bias = true;
};

struct MaxPoolSpec {
  int window = 2;
  int stride = 2;
};

struct ReluSpec {};

struct BatchNormSpec {
  int channels = 0;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

struct DropoutSpec {
  double probability = 0.5;
};

struct FullyConnectedSpec {
  int in_features = 0;
  int out_features = 0;
};

struct SoftmaxHeadSpec {
  int num_classes = 0;
};

struct SigmoidHeadSpec {};

using LayerKind =
    std::variant<ConvSpec, MaxPoolSpec, ReluSpec, BatchNormSpec, DropoutSpec,
                 FullyConnectedSpec, SoftmaxHeadSpec, SigmoidHeadSpec>;

inline void validate(const LayerKind& kind) {
  if (const auto* c = std::get_if<ConvSpec>(&kind)) {
    require(c->in_channels > 0 && c->out_channels > 0 && c->kernel_size > 0,
            "conv spec must have positive channel counts and kernel size");
    require(!c->same_padding || c->kernel_size % 2 == 1,
            "same padding requires an odd kernel size, got ", c->kernel_size);
  } else if (const auto* p = std::get_if<MaxPoolSpec>(&kind)) {
    require(p->window >= 1 && p->stride >= 1, "bad pooling window/stride");
  } else if (const auto* b = std::get_if<BatchNormSpec>(&kind)) {
    require(b->channels > 0, "batch norm needs a positive channel count");
    require(b->epsilon > 0, "batch norm epsilon must be positive");
    require(b->momentum > 0 && b->momentum < 1,
            "batch norm momentum must be in (0,1)");
  } else if (const auto* d = std::get_if<DropoutSpec>(&kind)) {
    require(d->probability >= 0.0 && d->probability < 1.0,
            "dropout probability must be in [0,1), got ", d->probability);
  } else if (const auto* f = std::get_if<FullyConnectedSpec>(&kind)) {
    require(f->in_features > 0 && f->out_features > 0,
            "fully connected spec needs positive feature counts");
  } else if (const auto* s = std::get_if<SoftmaxHeadSpec>(&kind)) {
    require(s->num_classes >= 2, "softmax head needs at least 2 classes");
  }
}

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* tensor;
};

// ---------------------------------------------------------------------------
// Runtime layers. Batched tensors are NxCxHxW (or NxF after flattening).
// ---------------------------------------------------------------------------

template <typename T>
class Layer {
public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, ThreadPool& pool) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy, ThreadPool& pool) = 0;
  // Learnable parameters (Adam-updated, counted).
  virtual void collect_params(const std::string& prefix,
                              std::vector<NamedParam<T>>& out) {
    (void)prefix;
    (void)out;
  }
  // Persistent non-learnable state (batch-norm running statistics).
  virtual void collect_buffers(const std::string& prefix,
                               std::vector<NamedParam<T>>& out) {
    (void)prefix;
    (void)out;
  }
  // The first layer of a network skips computing input gradients.
  bool needs_input_grad = true;
};

template <typename T>
class Conv2d : public Layer<T> {
public:
  Conv2d(const ConvSpec& spec, Rng& rng) : spec_(spec) {
    const int fan_in = spec.in_channels * spec.kernel_size * spec.kernel_size;
    weight_ = Tensor<T>::randn({spec.out_channels, spec.in_channels,
                                spec.kernel_size, spec.kernel_size},
                               rng, std::sqrt(2.0 / fan_in));
    bias_ = Tensor<T>({spec.out_channels});
    weight_.ensure_grad();
    bias_.ensure_grad();
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, ThreadPool& pool) override {
    require(x.rank() == 4, "conv layer expects NxCxHxW input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(C == spec_.in_channels, "conv layer expects ", spec_.in_channels,
            " input channels, got ", C);
    const int K = spec_.kernel_size;
    const int pad = spec_.same_padding ? K / 2 : 0;
    in_h_ = H;
    in_w_ = W;
    ph_ = H + 2 * pad;
    pw_ = W + 2 * pad;
    const int OH = ph_ - K + 1, OW = pw_ - K + 1;
    require(OH >= 1 && OW >= 1, "conv input ", H, "x", W,
            " too small for kernel ", K);
    padded_.assign(static_cast<std::size_t>(N) * C * ph_ * pw_, T(0));
    Tensor<T> out({N, spec_.out_channels, OH, OW});
    const std::size_t in_stride = static_cast<std::size_t>(C) * H * W;
    const std::size_t pad_stride = static_cast<std::size_t>(C) * ph_ * pw_;
    const std::size_t out_stride =
        static_cast<std::size_t>(spec_.out_channels) * OH * OW;
    pool.parallel_for(0, N, [&](int n) {
      T* pin = padded_.data() + n * pad_stride;
      detail::zero_pad_plane(x.data.data() + n * in_stride, C, H, W, pad, pin);
      detail::conv_padded_forward(pin, C, ph_, pw_, weight_.data.data(),
                                  bias_.data.data(), spec_.out_channels, K,
                                  out.data.data() + n * out_stride);
    });
    batch_ = N;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool& pool) override {
    const int N = batch_;
    const int C = spec_.in_channels, O = spec_.out_channels;
    const int K = spec_.kernel_size;
    const int pad = spec_.same_padding ? K / 2 : 0;
    const int OH = ph_ - K + 1, OW = pw_ - K + 1;
    require(dy.rank() == 4 && dy.dim(0) == N && dy.dim(1) == O &&
                dy.dim(2) == OH && dy.dim(3) == OW,
            "conv backward shape mismatch");

    const std::size_t wsize = weight_.size();
    std::vector<T> dw_scratch(static_cast<std::size_t>(N) * wsize, T(0));
    const std::size_t pad_stride = static_cast<std::size_t>(C) * ph_ * pw_;
    const std::size_t dy_stride = static_cast<std::size_t>(O) * OH * OW;

    Tensor<T> dx;
    std::vector<T> wflip;
    std::vector<T> zero_bias;
    const int pad2 = K - 1 - pad;
    const int dph = OH + 2 * pad2, dpw = OW + 2 * pad2;
    std::vector<T> dy_padded;
    if (this->needs_input_grad) {
      dx = Tensor<T>({N, C, in_h_, in_w_});
      wflip.resize(wsize);
      detail::flip_transpose_weights(weight_.data.data(), O, C, K,
                                     wflip.data());
      zero_bias.assign(static_cast<std::size_t>(C), T(0));
      dy_padded.assign(static_cast<std::size_t>(N) * O * dph * dpw, T(0));
    }

    pool.parallel_for(0, N, [&](int n) {
      detail::conv_padded_grad_w(padded_.data() + n * pad_stride, C, ph_, pw_,
                                 dy.data.data() + n * dy_stride, O, K,
                                 dw_scratch.data() + n * wsize);
      if (this->needs_input_grad) {
        T* dpin = dy_padded.data() + static_cast<std::size_t>(n) * O * dph * dpw;
        detail::zero_pad_plane(dy.data.data() + n * dy_stride, O, OH, OW, pad2,
                               dpin);
        detail::conv_padded_forward(
            dpin, O, dph, dpw, wflip.data(), zero_bias.data(), C, K,
            dx.data.data() + static_cast<std::size_t>(n) * C * in_h_ * in_w_);
      }
    });

    // Reduce in sample order so results do not depend on the thread count.
    for (int n = 0; n < N; ++n) {
      const T* src = dw_scratch.data() + static_cast<std::size_t>(n) * wsize;
      for (std::size_t i = 0; i < wsize; ++i) weight_.grad[i] += src[i];
    }
    for (int n = 0; n < N; ++n) {
      const T* d = dy.data.data() + n * dy_stride;
      for (int o = 0; o < O; ++o) {
        T s = 0;
        const T* plane = d + static_cast<std::size_t>(o) * OH * OW;
        for (int i = 0; i < OH * OW; ++i) s += plane[i];
        bias_.grad[static_cast<std::size_t>(o)] += s;
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_});
    if (spec_.bias) out.push_back({prefix + ".bias", &bias_});
  }

  const ConvSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

private:
  ConvSpec spec_;
  Tensor<T> weight_, bias_;
  std::vector<T> padded_;
  int batch_ = 0, in_h_ = 0, in_w_ = 0, ph_ = 0, pw_ = 0;
};

template <typename T>
class MaxPool2 : public Layer<T> {
public:
  explicit MaxPool2(const MaxPoolSpec& spec) : spec_(spec) {}

  Tensor<T> forward(const Tensor<T>& x, Mode, ThreadPool& pool) override {
    require(x.rank() == 4, "pool layer expects NxCxHxW input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(H >= spec_.window && W >= spec_.window, "input ", H, "x", W,
            " smaller than pooling window ", spec_.window);
    const int OH = (H - spec_.window) / spec_.stride + 1;
    const int OW = (W - spec_.window) / spec_.stride + 1;
    in_shape_ = x.shape;
    Tensor<T> out({N, C, OH, OW});
    argmax_.resize(out.size());
    const std::size_t in_stride = static_cast<std::size_t>(C) * H * W;
    const std::size_t out_stride = static_cast<std::size_t>(C) * OH * OW;
    pool.parallel_for(0, N, [&](int n) {
      for (int c = 0; c < C; ++c) {
        const T* plane = x.data.data() + n * in_stride +
                         static_cast<std::size_t>(c) * H * W;
        T* op = out.data.data() + n * out_stride +
                static_cast<std::size_t>(c) * OH * OW;
        int* arg = argmax_.data() + n * out_stride +
                   static_cast<std::size_t>(c) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
          for (int ox = 0; ox < OW; ++ox) {
            int best_idx = (oy * spec_.stride) * W + ox * spec_.stride;
            T best = plane[best_idx];
            for (int ky = 0; ky < spec_.window; ++ky) {
              for (int kx = 0; kx < spec_.window; ++kx) {
                const int idx =
                    (oy * spec_.stride + ky) * W + ox * spec_.stride + kx;
                if (plane[idx] > best) {
                  best = plane[idx];
                  best_idx = idx;
                }
              }
            }
            op[oy * OW + ox] = best;
            arg[oy * OW + ox] = best_idx;
          }
        }
      }
    });
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool& pool) override {
    const int N = in_shape_[0], C = in_shape_[1], H = in_shape_[2],
              W = in_shape_[3];
    Tensor<T> dx({N, C, H, W});
    const int OH = dy.dim(2), OW = dy.dim(3);
    const std::size_t in_stride = static_cast<std::size_t>(C) * H * W;
    const std::size_t out_stride = static_cast<std::size_t>(C) * OH * OW;
    pool.parallel_for(0, N, [&](int n) {
      for (int c = 0; c < C; ++c) {
        const T* d = dy.data.data() + n * out_stride +
                     static_cast<std::size_t>(c) * OH * OW;
        const int* arg = argmax_.data() + n * out_stride +
                         static_cast<std::size_t>(c) * OH * OW;
        T* g = dx.data.data() + n * in_stride +
               static_cast<std::size_t>(c) * H * W;
        for (int i = 0; i < OH * OW; ++i) g[arg[i]] += d[i];
      }
    });
    return dx;
  }

private:
  MaxPoolSpec spec_;
  std::vector<int> argmax_;
  std::vector<int> in_shape_;
};

template <typename T>
class Relu : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& x, Mode, ThreadPool&) override {
    out_ = x;
    for (auto& v : out_.data) v = v > T(0) ? v : T(0);
    return out_;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool&) override {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(out_[i] > T(0))) dx[i] = T(0);
    return dx;
  }

private:
  Tensor<T> out_;
};

template <typename T>
class BatchNorm2d : public Layer<T> {
public:
  BatchNorm2d(const BatchNormSpec& spec) : spec_(spec) {
    gamma_ = Tensor<T>::full({spec.channels}, T(1));
    beta_ = Tensor<T>({spec.channels});
    running_mean_ = Tensor<T>({spec.channels});
    running_var_ = Tensor<T>::full({spec.channels}, T(1));
    gamma_.ensure_grad();
    beta_.ensure_grad();
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, ThreadPool&) override {
    require(x.rank() == 4 && x.dim(1) == spec_.channels,
            "batch norm expects NxCxHxW with C=", spec_.channels);
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    mode_ = mode;
    Tensor<T> out(x.shape);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t sample = static_cast<std::size_t>(C) * plane;
    if (mode == Mode::Train) {
      require(N >= 2,
              "batch norm in train mode needs batch size >= 2 (zero-variance "
              "hazard), got ",
              N);
      const double m = static_cast<double>(N) * H * W;
      mean_.assign(C, 0.0);
      inv_std_.assign(C, 0.0);
      for (int c = 0; c < C; ++c) {
        double s = 0;
        for (int n = 0; n < N; ++n) {
          const T* p = x.data.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i) s += p[i];
        }
        mean_[c] = s / m;
      }
      std::vector<double> var(C, 0.0);
      for (int c = 0; c < C; ++c) {
        double s = 0;
        for (int n = 0; n < N; ++n) {
          const T* p = x.data.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mean_[c];
            s += d * d;
          }
        }
        var[c] = s / m;
        inv_std_[c] = 1.0 / std::sqrt(var[c] + spec_.epsilon);
      }
      xhat_ = Tensor<T>(x.shape);
      for (int c = 0; c < C; ++c) {
        const T g = gamma_[static_cast<std::size_t>(c)];
        const T b = beta_[static_cast<std::size_t>(c)];
        for (int n = 0; n < N; ++n) {
          const T* p = x.data.data() + n * sample + c * plane;
          T* xh = xhat_.data.data() + n * sample + c * plane;
          T* o = out.data.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            xh[i] = static_cast<T>((p[i] - mean_[c]) * inv_std_[c]);
            o[i] = g * xh[i] + b;
          }
        }
      }
      // Running statistics: biased variance normalizes the batch, the
      // unbiased estimate feeds the running average.
      const double unbias = m > 1 ? m / (m - 1) : 1.0;
      for (int c = 0; c < C; ++c) {
        running_mean_[static_cast<std::size_t>(c)] = static_cast<T>(
            (1 - spec_.momentum) * running_mean_[static_cast<std::size_t>(c)] +
            spec_.momentum * mean_[c]);
        running_var_[static_cast<std::size_t>(c)] = static_cast<T>(
            (1 - spec_.momentum) * running_var_[static_cast<std::size_t>(c)] +
            spec_.momentum * var[c] * unbias);
      }
      batch_ = N;
    } else {
      for (int c = 0; c < C; ++c) {
        const double inv = 1.0 / std::sqrt(
                 static_cast<double>(running_var_[static_cast<std::size_t>(c)]) +
                 spec_.epsilon);
        const double mu = running_mean_[static_cast<std::size_t>(c)];
        const T g = gamma_[static_cast<std::size_t>(c)];
        const T b = beta_[static_cast<std::size_t>(c)];
        for (int n = 0; n < N; ++n) {
          const T* p = x.data.data() + n * sample + c * plane;
          T* o = out.data.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i)
            o[i] = static_cast<T>(g * ((p[i] - mu) * inv) + b);
        }
      }
      eval_shape_ = x.shape;
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool&) override {
    const int C = spec_.channels;
    if (mode_ == Mode::Eval) {
      Tensor<T> dx(eval_shape_);
      const int N = eval_shape_[0], H = eval_shape_[2], W = eval_shape_[3];
      const std::size_t plane = static_cast<std::size_t>(H) * W;
      const std::size_t sample = static_cast<std::size_t>(C) * plane;
      for (int c = 0; c < C; ++c) {
        const double inv = 1.0 / std::sqrt(
                 static_cast<double>(running_var_[static_cast<std::size_t>(c)]) +
                 spec_.epsilon);
        const T scale = static_cast<T>(gamma_[static_cast<std::size_t>(c)] * inv);
        for (int n = 0; n < N; ++n) {
          const T* d = dy.data.data() + n * sample + c * plane;
          T* g = dx.data.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i) g[i] = d[i] * scale;
        }
      }
      return dx;
    }
    const int N = batch_, H = xhat_.dim(2), W = xhat_.dim(3);
    const double m = static_cast<double>(N) * H * W;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t sample = static_cast<std::size_t>(C) * plane;
    Tensor<T> dx(xhat_.shape);
    for (int c = 0; c < C; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int n = 0; n < N; ++n) {
        const T* d = dy.data.data() + n * sample + c * plane;
        const T* xh = xhat_.data.data() + n * sample + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += d[i];
          sum_dy_xhat += static_cast<double>(d[i]) * xh[i];
        }
      }
      gamma_.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xhat);
      beta_.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
      const double g = gamma_[static_cast<std::size_t>(c)];
      const double k = g * inv_std_[c] / m;
      for (int n = 0; n < N; ++n) {
        const T* d = dy.data.data() + n * sample + c * plane;
        const T* xh = xhat_.data.data() + n * sample + c * plane;
        T* gx = dx.data.data() + n * sample + c * plane;
        for (std::size_t i = 0; i < plane; ++i)
          gx[i] = static_cast<T>(k * (m * d[i] - sum_dy - xh[i] * sum_dy_xhat));
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    out.push_back({prefix + ".gamma", &gamma_});
    out.push_back({prefix + ".beta", &beta_});
  }

  void collect_buffers(const std::string& prefix,
                       std::vector<NamedParam<T>>& out) override {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
  }

  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

private:
  BatchNormSpec spec_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_, xhat_;
  std::vector<double> mean_, inv_std_;
  std::vector<int> eval_shape_;
  Mode mode_ = Mode::Eval;
  int batch_ = 0;
};

// Inverted dropout: survivors are scaled by 1/(1-p) at train time so that
// inference is a pure identity.
template <typename T>
class Dropout : public Layer<T> {
public:
  explicit Dropout(const DropoutSpec& spec, std::uint64_t seed)
      : spec_(spec), rng_(seed) {}

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, ThreadPool&) override {
    if (mode == Mode::Eval || spec_.probability == 0.0) {
      identity_ = true;
      return x;
    }
    identity_ = false;
    const T scale = static_cast<T>(1.0 / (1.0 - spec_.probability));
    mask_.resize(x.size());
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool keep = rng_.uniform() >= spec_.probability;
      mask_[i] = keep;
      out[i] = keep ? x[i] * scale : T(0);
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool&) override {
    if (identity_) return dy;
    const T scale = static_cast<T>(1.0 / (1.0 - spec_.probability));
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[i] = mask_[i] ? dy[i] * scale : T(0);
    return dx;
  }

private:
  DropoutSpec spec_;
  Rng rng_;
  std::vector<std::uint8_t> mask_;
  bool identity_ = true;
};

// NxCxHxW -> NxF reshape in front of the fully connected layer.
template <typename T>
class Flatten : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& x, Mode, ThreadPool&) override {
    in_shape_ = x.shape;
    Tensor<T> out = x;
    const int n = x.dim(0);
    out.shape = {n, static_cast<int>(x.size()) / n};
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool&) override {
    Tensor<T> dx = dy;
    dx.shape = in_shape_;
    return dx;
  }

private:
  std::vector<int> in_shape_;
};

template <typename T>
class Linear : public Layer<T> {
public:
  Linear(const FullyConnectedSpec& spec, Rng& rng) : spec_(spec) {
    weight_ = Tensor<T>::randn({spec.out_features, spec.in_features}, rng,
                               std::sqrt(2.0 / spec.in_features));
    bias_ = Tensor<T>({spec.out_features});
    weight_.ensure_grad();
    bias_.ensure_grad();
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, ThreadPool&) override {
    require(x.rank() == 2, "linear layer expects NxF input");
    require(x.dim(1) == spec_.in_features, "linear layer expects ",
            spec_.in_features, " features, got ", x.dim(1));
    in_ = x;
    const int N = x.dim(0), F = spec_.in_features, O = spec_.out_features;
    Tensor<T> out({N, O});
    for (int n = 0; n < N; ++n) {
      const T* xi = x.data.data() + static_cast<std::size_t>(n) * F;
      T* oi = out.data.data() + static_cast<std::size_t>(n) * O;
      for (int o = 0; o < O; ++o) {
        const T* w = weight_.data.data() + static_cast<std::size_t>(o) * F;
        T s = bias_[static_cast<std::size_t>(o)];
        for (int f = 0; f < F; ++f) s += w[f] * xi[f];
        oi[o] = s;
      }
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, ThreadPool&) override {
    const int N = in_.dim(0), F = spec_.in_features, O = spec_.out_features;
    Tensor<T> dx({N, F});
    for (int n = 0; n < N; ++n) {
      const T* d = dy.data.data() + static_cast<std::size_t>(n) * O;
      const T* xi = in_.data.data() + static_cast<std::size_t>(n) * F;
      T* g = dx.data.data() + static_cast<std::size_t>(n) * F;
      for (int o = 0; o < O; ++o) {
        const T dv = d[o];
        T* wg = weight_.grad.data() + static_cast<std::size_t>(o) * F;
        const T* w = weight_.data.data() + static_cast<std::size_t>(o) * F;
        bias_.grad[static_cast<std::size_t>(o)] += dv;
        for (int f = 0; f < F; ++f) {
          wg[f] += dv * xi[f];
          g[f] += dv * w[f];
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedParam<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_});
    out.push_back({prefix + ".bias", &bias_});
  }

private:
  FullyConnectedSpec spec_;
  Tensor<T> weight_, bias_, in_;
};

}  // namespace cluttermap::nn
