#pragma once

// Synthetic carotid phantoms with analytic ground truth.
//
// The vessel is a straight tube along world z through the origin. Its MAB
// cross-section is a disk of radius mab_radius_mm; the lumen is a disk of
// radius lib_radius_mm centred lumen_offset_mm along +x. An optional flat-top
// plaque ("bump") thickens the wall on the +y side over
// [center - length/2, center + length/2): inside it the lumen keeps touching
// its healthy boundary on the -y side while its +y side recedes by depth_mm.
//
// Frames are posed cross-sections: frame i has its centre pixel on the tube
// axis at z_i and its plane tilted by tilt_deg about the world x-axis.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "carotid3d/pose.hpp"
#include "carotid3d/raster.hpp"
#include "carotid3d/recon.hpp"
#include "carotid3d/regularization.hpp"

namespace carotid {

struct Bump {
  double center_mm = 20.0;
  double length_mm = 10.0;
  double depth_mm = 1.0;
};

struct PhantomSpec {
  double length_mm = 40.0;
  double mab_radius_mm = 4.0;
  double lib_radius_mm = 3.0;
  double lumen_offset_mm = 0.0;
  std::optional<Bump> bump;

  std::uint8_t wall_intensity = 200;
  std::uint8_t lumen_intensity = 20;
  std::uint8_t background_intensity = 90;
  double pixel_noise_sigma = 0.0;  // grey levels
  std::uint64_t seed = 0;          // pixel noise only

  int frame_width = 160;
  int frame_height = 160;
  double pixel_spacing_mm = 0.1;
  int n_frames = 200;
  double frame_pitch_mm = 0.2;
  double tilt_deg = 0.0;
  double frame_rate_hz = 24.0;

  /// Throws InvalidArgument on inconsistent geometry.
  void validate() const;

  [[nodiscard]] bool in_bump(double z) const;
  [[nodiscard]] double mab_radius(double z) const;
  [[nodiscard]] double lib_radius(double z) const;
  [[nodiscard]] Eigen::Vector2d lib_center(double z) const;
  /// z of frame i's centre.
  [[nodiscard]] double frame_z(int i) const;

  /// Analytic ECST stenosis at z: 1 - sqrt(r^2 - e^2) / R, e the lumen offset.
  [[nodiscard]] double designed_stenosis(double z) const;
  /// Max of designed_stenosis over the tube.
  [[nodiscard]] double designed_grade() const;
  /// Analytic max wall thickness at z, measured from the vessel axis.
  [[nodiscard]] double designed_thickness(double z) const;
};

/// Plaque depth giving designed grade S for a concentric healthy tube.
double bump_depth_for_grade(double mab_radius_mm, double lib_radius_mm, double grade);

struct Fallback {
  std::size_t start = 0;
  std::size_t length = 5;
};

struct NoiseSpec {
  double sigma_trans = 0.0;  // mm, per axis
  double sigma_rot = 0.0;    // rad, per axis of the rotation vector
  std::optional<Fallback> fallback;
  std::uint64_t seed = 0;

  void validate(std::size_t n_frames) const;
};

struct Sweep {
  FrameSequence seq;                // frames and their (possibly noisy) poses
  std::vector<MaskPair> masks;      // exact MAB / LIB rasterization per frame
  PoseSequence ground_truth;        // true pose of each frame
  std::vector<std::size_t> source;  // index of each frame in the monotone sweep

  [[nodiscard]] std::vector<LabelRaster> labels() const;
};

/// Pseudo-random source used by every generator: mt19937_64 with uniforms
/// built from the top 53 bits and Box-Muller normals, so streams are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double normal();   // N(0, 1)

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

PoseSequence ground_truth_poses(const PhantomSpec& spec);

/// Noise-free sweep with exact equispaced poses.
Sweep generate_sweep(const PhantomSpec& spec);
Sweep generate_sweep(PhantomSpec spec, int n_frames, double frame_pitch_mm);

/// Acquisition order under `noise`: identity, except a fallback run is
/// reversed. order[k] is the sweep index acquired k-th.
std::vector<std::size_t> acquisition_order(std::size_t n, const NoiseSpec& noise);

/// Adds i.i.d. Gaussian translation and rotation-vector noise to each pose,
/// then reverses the fallback run. Deterministic per seed.
PoseSequence perturb_poses(std::span<const Pose> gt, const NoiseSpec& noise);

/// Applies perturb_poses to the sweep and reorders frames, masks and ground
/// truth consistently with the fallback.
Sweep perturb_sweep(const Sweep& sweep, const NoiseSpec& noise);

/// Root-mean-square geodesic distance between corresponding poses.
double trajectory_rmse(std::span<const Pose> a, std::span<const Pose> b,
                       const MetricWeights& w = {});

}  // namespace carotid
