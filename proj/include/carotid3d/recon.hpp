#pragma once

// Freehand 3D reconstruction: posed 2D frames are forward-mapped into an
// axis-aligned voxel grid ("fast dot projection"), then remaining holes are
// filled from nearby written voxels.
//
// Frame geometry: pixel (u, v) sits at (u * pixel_spacing, v * pixel_spacing, 0)
// in the probe frame; the frame's pose maps that point to world millimetres.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "carotid3d/pose.hpp"
#include "carotid3d/raster.hpp"
#include "carotid3d/regularization.hpp"

namespace carotid {

struct Frame {
  Raster<std::uint8_t> pixels;  // 8-bit grayscale or label values
  double pixel_spacing = 0.1;   // mm per pixel, isotropic in-plane

  [[nodiscard]] int width() const { return pixels.width(); }
  [[nodiscard]] int height() const { return pixels.height(); }
};

struct FrameSequence {
  std::vector<Frame> frames;
  PoseSequence poses;
  std::vector<double> timestamps;  // seconds; carried through, never consumed
  double frame_rate = 24.0;        // Hz

  [[nodiscard]] std::size_t size() const { return frames.size(); }
  /// Throws InvalidArgument unless frames and poses pair up and geometry is sane.
  void validate() const;
};

/// Axis-aligned voxel grid, x-fastest storage. Voxel (i, j, k) is centred at
/// origin + spacing * (i, j, k).
struct Volume {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double spacing = 0.2;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<std::uint8_t> voxels;
  std::vector<std::uint8_t> fill_mask;  // 1 where a value was written
  bool label_mode = false;

  /// Zero-initialized volume; throws InvalidArgument on bad geometry.
  static Volume make(const Eigen::Vector3d& origin, double spacing, std::array<int, 3> dims,
                     bool label_mode);

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims[0]) +
           static_cast<std::size_t>(i);
  }
  [[nodiscard]] bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  [[nodiscard]] std::uint8_t at(int i, int j, int k) const { return voxels[index(i, j, k)]; }
  [[nodiscard]] Eigen::Vector3d voxel_center(int i, int j, int k) const {
    return origin + spacing * Eigen::Vector3d(i, j, k);
  }
  /// Transverse slice k as an nx-by-ny raster.
  [[nodiscard]] Raster<std::uint8_t> slice(int k) const;
  [[nodiscard]] double filled_fraction() const;
  [[nodiscard]] bool same_grid(const Volume& other) const;
};

struct ReconConfig {
  double spacing = 0.2;      // mm
  int hole_fill_radius = 3;  // voxels, Chebyshev
  bool label_mode = false;   // max-write and nearest fill instead of averaging

  void validate() const;
};

/// World position of pixel (u, v) of frame `frame_index`. Throws
/// InvalidArgument when the pixel lies outside the frame.
Eigen::Vector3d pixel_to_world(std::size_t frame_index, double u, double v,
                               const FrameSequence& seq);

/// Forward-maps every pixel to its nearest voxel. The grid is the hull of all
/// frame corners padded by one voxel. Coincident writes average (intensity
/// mode, rounded half away from zero) or take the maximum (label mode).
/// No hole filling.
Volume fdp_reconstruct(const FrameSequence& seq, const ReconConfig& cfg);

/// Fills each unwritten voxel that has written neighbours within `radius`
/// (Chebyshev): inverse-distance-weighted mean in intensity mode, nearest
/// value in label mode. Reads `v` only; written voxels are unchanged.
Volume hole_fill(const Volume& v, int radius);

/// fdp_reconstruct followed by hole_fill(cfg.hole_fill_radius).
Volume reconstruct(const FrameSequence& seq, const ReconConfig& cfg);

/// Label volume (0 background, 1 wall, 2 lumen) from per-frame label
/// rasters; always max-write with nearest-neighbour hole filling.
Volume reconstruct_mask_volume(std::span<const LabelRaster> masks, std::span<const Pose> poses,
                               double pixel_spacing, ReconConfig cfg);

/// Baseline that ignores probe orientation: frames are stacked as parallel
/// slabs whose positions are the frame centres projected on the overall
/// sweep direction. Hole filling per cfg.
Volume stack_pseudo_volume(const FrameSequence& seq, const ReconConfig& cfg);

/// Poses used by stack_pseudo_volume (exposed for inspection and tests).
PoseSequence pseudo_stack_poses(const FrameSequence& seq);

}  // namespace carotid
