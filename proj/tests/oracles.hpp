#pragma once

// Independent reference implementations used to pin expected values. These
// stay brute-force on purpose: they share no code with the library paths they
// check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cluttermap/core/tensor.hpp"

namespace oracle {

using cluttermap::Tensor;

// Direct nested-loop convolution, double accumulation.
template <typename T>
Tensor<T> conv2d_ref(const Tensor<T>& in, const Tensor<T>& w,
                     const Tensor<T>& bias, bool same_padding) {
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int O = w.dim(0), K = w.dim(2);
  const int pad = same_padding ? K / 2 : 0;
  const int OH = H + 2 * pad - K + 1;
  const int OW = W + 2 * pad - K + 1;
  Tensor<T> out({O, OH, OW});
  for (int o = 0; o < O; ++o) {
    for (int y = 0; y < OH; ++y) {
      for (int x = 0; x < OW; ++x) {
        double acc = bias[(std::size_t)o];
        for (int c = 0; c < C; ++c) {
          for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
              const int iy = y + ky - pad;
              const int ix = x + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += static_cast<double>(
                         in[((std::size_t)c * H + iy) * W + ix]) *
                     static_cast<double>(
                         w[(((std::size_t)o * C + c) * K + ky) * K + kx]);
            }
          }
        }
        out[((std::size_t)o * OH + y) * OW + x] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool_ref(const Tensor<T>& in, int window, int stride) {
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int OH = (H - window) / stride + 1;
  const int OW = (W - window) / stride + 1;
  Tensor<T> out({C, OH, OW});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < OH; ++y)
      for (int x = 0; x < OW; ++x) {
        T best = in[((std::size_t)c * H + y * stride) * W + x * stride];
        for (int ky = 0; ky < window; ++ky)
          for (int kx = 0; kx < window; ++kx)
            best = std::max(best, in[((std::size_t)c * H + y * stride + ky) * W +
                                     x * stride + kx]);
        out[((std::size_t)c * OH + y) * OW + x] = best;
      }
  return out;
}

template <typename T>
Tensor<T> fully_connected_ref(const Tensor<T>& in, const Tensor<T>& w,
                              const Tensor<T>& bias) {
  const int F = in.dim(0), O = w.dim(0);
  Tensor<T> out({O});
  for (int o = 0; o < O; ++o) {
    double acc = bias[(std::size_t)o];
    for (int f = 0; f < F; ++f)
      acc += static_cast<double>(w[(std::size_t)o * F + f]) *
             static_cast<double>(in[(std::size_t)f]);
    out[(std::size_t)o] = static_cast<T>(acc);
  }
  return out;
}

// Upper tail of the chi-squared(1) distribution by direct numerical
// integration of the standard normal density (the tail equals
// 2*P(Z > sqrt(s))). Composite Simpson on [sqrt(s), sqrt(s)+cut] in long
// double; accurate to well below 1e-8 relative for tails down to 1e-30.
inline long double chi2_1_upper_tail_ref(long double s) {
  if (s <= 0) return 1.0L;
  const long double a = sqrtl(s);
  const long double cut = 40.0L;  // e^{-40^2/2} is far below any tail we need
  const int steps = 200000;       // even
  const long double h = cut / steps;
  const long double inv_sqrt_2pi = 0.3989422804014326779399461L;
  auto phi = [&](long double v) { return expl(-0.5L * v * v) * inv_sqrt_2pi; };
  long double sum = phi(a) + phi(a + cut);
  for (int i = 1; i < steps; ++i)
    sum += phi(a + h * i) * ((i % 2) ? 4.0L : 2.0L);
  const long double tail = sum * h / 3.0L;
  return 2.0L * tail;
}

// Exact one-sided binomial(n, 1/2) upper tail P(X >= k).
inline long double binomial_upper_tail_ref(int n, int k) {
  if (k <= 0) return 1.0L;
  if (k > n) return 0.0L;
  // Sum C(n,i)/2^n for i in [k, n] with exact binomials in long double.
  long double total = 0.0L;
  for (int i = k; i <= n; ++i) {
    long double c = 1.0L;
    for (int j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
    total += c;
  }
  return total * powl(0.5L, n);
}

}  // namespace oracle
