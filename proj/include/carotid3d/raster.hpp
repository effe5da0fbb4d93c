#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "carotid3d/error.hpp"

namespace carotid {

/// Row-major 2D grid; x indexes columns, y indexes rows.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("raster dimensions must be >= 1, got " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  [[nodiscard]] std::vector<T>& data() { return data_; }
  [[nodiscard]] const std::vector<T>& data() const { return data_; }

  [[nodiscard]] bool same_shape(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const Raster&) const = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Binary mask: 0 background, non-zero foreground.
using Mask = Raster<std::uint8_t>;

/// Vessel label raster: 0 background, 1 wall (MAB minus LIB), 2 lumen (LIB).
using LabelRaster = Raster<std::uint8_t>;

enum Label : std::uint8_t { kBackground = 0, kWall = 1, kLumen = 2 };

/// Per-frame segmentation: media-adventitia region and lumen-intima region.
struct MaskPair {
  Mask mab;
  Mask lib;
};

/// Combines a MAB/LIB pair into labels. Throws InvalidArgument when the
/// shapes differ or LIB is not contained in MAB.
LabelRaster to_labels(const MaskPair& masks);

/// Splits a label raster back into MAB (label >= 1) and LIB (label == 2).
MaskPair from_labels(const LabelRaster& labels);

}  // namespace carotid
