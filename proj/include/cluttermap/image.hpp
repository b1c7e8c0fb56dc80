#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cluttermap/core/error.hpp"
#include "cluttermap/core/tensor.hpp"

namespace cluttermap {

// 8-bit RGB image, row-major, interleaved channels, top-left origin.
struct ImagePatch {
  int width = 0;
  int height = 0;
  static constexpr int channels = 3;
  std::vector<std::uint8_t> data;

  ImagePatch() = default;
  ImagePatch(int w, int h) : width(w), height(h) {
    require(w >= 0 && h >= 0, "image dimensions must be non-negative");
    data.assign(static_cast<std::size_t>(w) * h * channels, 0);
  }

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Crop window offset is floor((dim - side)/2) on each axis.
inline ImagePatch center_crop(const ImagePatch& img, int side) {
  require(side >= 1, "crop side must be positive");
  require(img.width >= side && img.height >= side, "image ", img.width, "x",
          img.height, " too small to center-crop to ", side, "x", side);
  const int ox = (img.width - side) / 2;
  const int oy = (img.height - side) / 2;
  ImagePatch out(side, side);
  for (int y = 0; y < side; ++y) {
    const std::uint8_t* src =
        img.data.data() +
        (static_cast<std::size_t>(y + oy) * img.width + ox) * 3;
    std::copy(src, src + static_cast<std::size_t>(side) * 3,
              out.data.data() + static_cast<std::size_t>(y) * side * 3);
  }
  return out;
}

// Maps 8-bit pixels to [0,1] planes; output is planar 3xHxW in RGB order.
template <typename T>
Tensor<T> normalize(const ImagePatch& img) {
  Tensor<T> out({3, img.height, img.width});
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    out[0 * plane + i] = static_cast<T>(img.data[i * 3 + 0]) / T(255);
    out[1 * plane + i] = static_cast<T>(img.data[i * 3 + 1]) / T(255);
    out[2 * plane + i] = static_cast<T>(img.data[i * 3 + 2]) / T(255);
  }
  return out;
}

// ---------------------------------------------------------------------------
// The eight symmetries of a square. Transform k first rotates by 90deg
// clockwise (k % 4) times, then mirrors horizontally if k >= 4:
//   k: 0=identity 1=rot90 2=rot180 3=rot270 4..7 = same with a final h-flip.
// ---------------------------------------------------------------------------

inline constexpr int kNumD4Transforms = 8;

// Source pixel for output (x, y) of transform k on a side x side image.
inline std::pair<int, int> d4_source(int k, int side, int x, int y) {
  if (k >= 4) x = side - 1 - x;  // undo the final horizontal mirror
  switch (k & 3) {
    case 0: return {x, y};
    case 1: return {y, side - 1 - x};          // inverse of rot90 cw
    case 2: return {side - 1 - x, side - 1 - y};
    default: return {side - 1 - y, x};
  }
}

inline ImagePatch apply_d4(const ImagePatch& img, int k) {
  require(k >= 0 && k < kNumD4Transforms, "D4 transform index must be in [0,8)");
  require(img.width == img.height, "D4 transforms require a square image, got ",
          img.width, "x", img.height);
  const int side = img.width;
  ImagePatch out(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const auto [sx, sy] = d4_source(k, side, x, y);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

// All eight symmetries in the fixed documented order:
// {identity, rot90, rot180, rot270} x {no flip, horizontal flip}.
inline std::array<ImagePatch, kNumD4Transforms> augment_d4(
    const ImagePatch& img) {
  require(img.width == img.height, "augmentation requires a square image, got ",
          img.width, "x", img.height);
  std::array<ImagePatch, kNumD4Transforms> out;
  for (int k = 0; k < kNumD4Transforms; ++k) out[static_cast<std::size_t>(k)] = apply_d4(img, k);
  return out;
}

// Fused transform + normalize used by the training loop: writes the planar
// 3 x side x side normalized view of transform k directly into dst.
template <typename T>
void d4_normalize_into(const ImagePatch& img, int k, T* dst) {
  const int side = img.width;
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const auto [sx, sy] = d4_source(k, side, x, y);
      const std::uint8_t* px =
          img.data.data() + (static_cast<std::size_t>(sy) * side + sx) * 3;
      const std::size_t o = static_cast<std::size_t>(y) * side + x;
      dst[0 * plane + o] = static_cast<T>(px[0]) / T(255);
      dst[1 * plane + o] = static_cast<T>(px[1]) / T(255);
      dst[2 * plane + o] = static_cast<T>(px[2]) / T(255);
    }
  }
}

}  // namespace cluttermap
