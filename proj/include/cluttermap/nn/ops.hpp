#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "cluttermap/core/error.hpp"
#include "cluttermap/core/tensor.hpp"

namespace cluttermap::nn {

namespace detail {

// All convolution kernels run on explicitly zero-padded input planes, so the
// inner loops carry no bounds logic and vectorize cleanly.
//
//   pin : C x PH x PW   (PH = H + 2*pad)
//   out : O x OH x OW   (OH = PH - K + 1)

template <typename T, int OB>
void conv_rows_block(const T* __restrict pin, int C, int PH, int PW,
                     const T* __restrict wt, const T* __restrict bias, int O,
                     int K, int o0, T* __restrict out) {
  const int OH = PH - K + 1;
  const int OW = PW - K + 1;
  constexpr int kTile = 160;
  T acc[OB][kTile];
  for (int y = 0; y < OH; ++y) {
    for (int x0 = 0; x0 < OW; x0 += kTile) {
      const int tw = std::min(kTile, OW - x0);
      for (int j = 0; j < OB; ++j)
        for (int x = 0; x < tw; ++x) acc[j][x] = bias[o0 + j];
      for (int c = 0; c < C; ++c) {
        const T* plane = pin + (static_cast<std::size_t>(c) * PH + y) * PW + x0;
        if (K == 3) {
          const T* r0 = plane;
          const T* r1 = r0 + PW;
          const T* r2 = r1 + PW;
          const T* w[OB];
          for (int j = 0; j < OB; ++j)
            w[j] = wt + (static_cast<std::size_t>(o0 + j) * C + c) * 9;
          for (int x = 0; x < tw; ++x) {
            const T i00 = r0[x], i01 = r0[x + 1], i02 = r0[x + 2];
            const T i10 = r1[x], i11 = r1[x + 1], i12 = r1[x + 2];
            const T i20 = r2[x], i21 = r2[x + 1], i22 = r2[x + 2];
            for (int j = 0; j < OB; ++j) {
              const T* wj = w[j];
              acc[j][x] += wj[0] * i00 + wj[1] * i01 + wj[2] * i02 +
                           wj[3] * i10 + wj[4] * i11 + wj[5] * i12 +
                           wj[6] * i20 + wj[7] * i21 + wj[8] * i22;
            }
          }
        } else {
          for (int ky = 0; ky < K; ++ky) {
            const T* row = plane + static_cast<std::size_t>(ky) * PW;
            for (int kx = 0; kx < K; ++kx) {
              for (int j = 0; j < OB; ++j) {
                const T w =
                    wt[((static_cast<std::size_t>(o0 + j) * C + c) * K + ky) * K +
                       kx];
                const T* r = row + kx;
                for (int x = 0; x < tw; ++x) acc[j][x] += w * r[x];
              }
            }
          }
        }
      }
      for (int j = 0; j < OB; ++j)
        std::memcpy(out + (static_cast<std::size_t>(o0 + j) * OH + y) * OW + x0,
                    acc[j], sizeof(T) * static_cast<std::size_t>(tw));
    }
  }
}

template <typename T>
void conv_padded_forward(const T* pin, int C, int PH, int PW, const T* wt,
                         const T* bias, int O, int K, T* out) {
  int o = 0;
  for (; o + 4 <= O; o += 4)
    conv_rows_block<T, 4>(pin, C, PH, PW, wt, bias, O, K, o, out);
  for (; o < O; ++o)
    conv_rows_block<T, 1>(pin, C, PH, PW, wt, bias, O, K, o, out);
}

// Weight-gradient contribution of one padded sample:
//   dw[o][c][ky][kx] += sum_{y,x} pin[c][y+ky][x+kx] * dout[o][y][x]
template <typename T>
void conv_padded_grad_w(const T* __restrict pin, int C, int PH, int PW,
                        const T* __restrict dout, int O, int K,
                        T* __restrict dw) {
  const int OH = PH - K + 1;
  const int OW = PW - K + 1;
  for (int o = 0; o < O; ++o) {
    const T* dplane = dout + static_cast<std::size_t>(o) * OH * OW;
    for (int c = 0; c < C; ++c) {
      const T* iplane = pin + static_cast<std::size_t>(c) * PH * PW;
      T* dwoc = dw + (static_cast<std::size_t>(o) * C + c) * K * K;
      if (K == 3) {
        T s00 = 0, s01 = 0, s02 = 0, s10 = 0, s11 = 0, s12 = 0, s20 = 0,
          s21 = 0, s22 = 0;
        for (int y = 0; y < OH; ++y) {
          const T* d = dplane + static_cast<std::size_t>(y) * OW;
          const T* r0 = iplane + static_cast<std::size_t>(y) * PW;
          const T* r1 = r0 + PW;
          const T* r2 = r1 + PW;
          for (int x = 0; x < OW; ++x) {
            const T v = d[x];
            s00 += v * r0[x];
            s01 += v * r0[x + 1];
            s02 += v * r0[x + 2];
            s10 += v * r1[x];
            s11 += v * r1[x + 1];
            s12 += v * r1[x + 2];
            s20 += v * r2[x];
            s21 += v * r2[x + 1];
            s22 += v * r2[x + 2];
          }
        }
        dwoc[0] += s00;
        dwoc[1] += s01;
        dwoc[2] += s02;
        dwoc[3] += s10;
        dwoc[4] += s11;
        dwoc[5] += s12;
        dwoc[6] += s20;
        dwoc[7] += s21;
        dwoc[8] += s22;
      } else {
        for (int ky = 0; ky < K; ++ky) {
          for (int kx = 0; kx < K; ++kx) {
            T s = 0;
            for (int y = 0; y < OH; ++y) {
              const T* d = dplane + static_cast<std::size_t>(y) * OW;
              const T* r = iplane + (static_cast<std::size_t>(y) + ky) * PW + kx;
              for (int x = 0; x < OW; ++x) s += d[x] * r[x];
            }
            dwoc[ky * K + kx] += s;
          }
        }
      }
    }
  }
}

template <typename T>
void zero_pad_plane(const T* src, int C, int H, int W, int pad, T* dst) {
  const int PH = H + 2 * pad;
  const int PW = W + 2 * pad;
  std::fill(dst, dst + static_cast<std::size_t>(C) * PH * PW, T(0));
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      std::memcpy(dst + (static_cast<std::size_t>(c) * PH + y + pad) * PW + pad,
                  src + (static_cast<std::size_t>(c) * H + y) * W,
                  sizeof(T) * static_cast<std::size_t>(W));
    }
  }
}

// Repacks weights for the input-gradient pass: the gradient w.r.t. the input
// is a correlation of the (re-padded) output gradient with the kernels
// flipped in both spatial axes and transposed in channels.
template <typename T>
void flip_transpose_weights(const T* w, int O, int C, int K, T* wflip) {
  for (int c = 0; c < C; ++c)
    for (int o = 0; o < O; ++o)
      for (int ky = 0; ky < K; ++ky)
        for (int kx = 0; kx < K; ++kx)
          wflip[((static_cast<std::size_t>(c) * O + o) * K + ky) * K + kx] =
              w[((static_cast<std::size_t>(o) * C + c) * K + (K - 1 - ky)) * K +
                (K - 1 - kx)];
}

}  // namespace detail

inline int conv_output_side(int side, int kernel, bool same_padding) {
  if (same_padding) return side;
  return side - kernel + 1;
}

// Single-image convolution: input CxHxW, weights OxCxKxK, bias O.
// Out-of-bounds taps read as zero under same padding.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias, bool same_padding) {
  require(input.rank() == 3, "conv2d input must be CxHxW, got ",
          shape_str(input.shape));
  require(weights.rank() == 4, "conv2d weights must be OxCxKxK, got ",
          shape_str(weights.shape));
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int O = weights.dim(0), K = weights.dim(2);
  require(weights.dim(1) == C, "conv2d channel mismatch: input has ", C,
          " channels but weights expect ", weights.dim(1));
  require(weights.dim(3) == K, "conv2d kernels must be square");
  require(bias.rank() == 1 && bias.dim(0) == O, "conv2d bias must have ", O,
          " entries");
  require(!same_padding || K % 2 == 1,
          "same padding requires an odd kernel size, got ", K);
  require(same_padding || (H >= K && W >= K),
          "input smaller than kernel without padding");

  const int pad = same_padding ? K / 2 : 0;
  const int PH = H + 2 * pad, PW = W + 2 * pad;
  std::vector<T> padded(static_cast<std::size_t>(C) * PH * PW);
  detail::zero_pad_plane(input.data.data(), C, H, W, pad, padded.data());

  const int OH = PH - K + 1, OW = PW - K + 1;
  Tensor<T> out({O, OH, OW});
  detail::conv_padded_forward(padded.data(), C, PH, PW, weights.data.data(),
                              bias.data.data(), O, K, out.data.data());
  return out;
}

// Single-image max pooling with floor semantics; trailing rows/columns that
// do not fill a window are dropped. Records row-major argmax indices (first
// occurrence wins ties) for the backward pass.
template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<int> argmax;  // flat index into the input C-plane per output elem
};

template <typename T>
PoolResult<T> maxpool_forward(const Tensor<T>& input, int window = 2,
                              int stride = 2) {
  require(input.rank() == 3, "maxpool input must be CxHxW");
  require(window >= 1 && stride >= 1, "bad pooling window/stride");
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  require(H >= window && W >= window, "input ", H, "x", W,
          " smaller than pooling window ", window);
  const int OH = (H - window) / stride + 1;
  const int OW = (W - window) / stride + 1;
  PoolResult<T> res{Tensor<T>({C, OH, OW}), {}};
  res.argmax.resize(static_cast<std::size_t>(C) * OH * OW);
  for (int c = 0; c < C; ++c) {
    const T* plane = input.data.data() + static_cast<std::size_t>(c) * H * W;
    T* out = res.output.data.data() + static_cast<std::size_t>(c) * OH * OW;
    int* arg = res.argmax.data() + static_cast<std::size_t>(c) * OH * OW;
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        int best_idx = (oy * stride) * W + ox * stride;
        T best = plane[best_idx];
        for (int ky = 0; ky < window; ++ky) {
          for (int kx = 0; kx < window; ++kx) {
            const int idx = (oy * stride + ky) * W + ox * stride + kx;
            if (plane[idx] > best) {
              best = plane[idx];
              best_idx = idx;
            }
          }
        }
        out[oy * OW + ox] = best;
        arg[oy * OW + ox] = best_idx;
      }
    }
  }
  return res;
}

template <typename T>
Tensor<T> fully_connected_forward(const Tensor<T>& input,
                                  const Tensor<T>& weights,
                                  const Tensor<T>& bias) {
  require(input.rank() == 1, "fully connected input must be a vector");
  require(weights.rank() == 2, "fully connected weights must be OxF");
  const int F = input.dim(0), O = weights.dim(0);
  require(weights.dim(1) == F, "fully connected expects ", weights.dim(1),
          " input features, got ", F);
  require(bias.rank() == 1 && bias.dim(0) == O, "bias must have ", O,
          " entries");
  Tensor<T> out({O});
  for (int o = 0; o < O; ++o) {
    T s = bias[static_cast<std::size_t>(o)];
    const T* w = weights.data.data() + static_cast<std::size_t>(o) * F;
    for (int f = 0; f < F; ++f) s += w[f] * input[static_cast<std::size_t>(f)];
    out[static_cast<std::size_t>(o)] = s;
  }
  return out;
}

// Max-subtracted softmax; outputs sum to 1 and stay finite for any finite
// logits.
template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
  require(!logits.empty(), "softmax of empty vector");
  T mx = logits[0];
  for (T v : logits) {
    require(std::isfinite(static_cast<double>(v)), "softmax logits must be finite");
    mx = std::max(mx, v);
  }
  std::vector<T> out(logits.size());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

template <typename T>
T sigmoid(T logit) {
  if (logit >= T(0)) return T(1) / (T(1) + std::exp(-logit));
  const T e = std::exp(logit);
  return e / (T(1) + e);
}

// Cross-entropy from logits in fused log-sum-exp form.
template <typename T>
T cross_entropy_loss(const std::vector<T>& logits, int true_index) {
  require(true_index >= 0 && true_index < static_cast<int>(logits.size()),
          "class index ", true_index, " out of range for ", logits.size(),
          " classes");
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T sum = 0;
  for (T v : logits) sum += std::exp(v - mx);
  return std::log(sum) + mx - logits[static_cast<std::size_t>(true_index)];
}

// Binary cross-entropy from the raw logit; stable for large |logit|.
template <typename T>
T binary_cross_entropy_from_logit(T logit, int true_bit) {
  require(true_bit == 0 || true_bit == 1, "true_bit must be 0 or 1");
  const T y = static_cast<T>(true_bit);
  return std::max(logit, T(0)) - logit * y +
         std::log1p(std::exp(-std::abs(logit)));
}

template <typename T>
T binary_cross_entropy(T probability, int true_bit) {
  require(true_bit == 0 || true_bit == 1, "true_bit must be 0 or 1");
  const T p = std::clamp(probability, std::numeric_limits<T>::min(),
                         T(1) - std::numeric_limits<T>::epsilon());
  return true_bit ? -std::log(p) : -std::log(T(1) - p);
}

}  // namespace cluttermap::nn
