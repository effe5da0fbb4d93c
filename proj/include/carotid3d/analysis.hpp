#pragma once

// Quantification on reconstructed label volumes. Transverse slices are the
// z-slices of the volume; in-plane coordinates are the volume's x and y.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "carotid3d/raster.hpp"
#include "carotid3d/recon.hpp"

namespace carotid {

/// One centroid per transverse slice, in world mm; valid where MAB exists.
struct CentroidPath {
  std::vector<Eigen::Vector3d> points;
  std::vector<bool> valid;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] std::size_t valid_count() const;
};

struct LongitudinalImage {
  Raster<std::uint8_t> image;  // column i = slice i, row r = offset along the cut line
  double theta_deg = 0.0;
  double column_pixel_mm = 0.2;  // slice pitch
  double row_pixel_mm = 0.2;     // sample step along the cut line
};

struct ChordMeasurement {
  double stenosis = 0.0;   // S = L_wall / (L_wall + L_lumen), in [0, 1]
  double angle_deg = 0.0;  // chord direction that attains it, in [0, 180)
  double mab_length_mm = 0.0;
  double lumen_length_mm = 0.0;
};

struct StenosisReport {
  std::vector<std::optional<double>> per_slice;  // empty where no vessel
  double grade = 0.0;
  std::size_t argmax_slice = 0;
  double argmax_angle_deg = 0.0;
  std::vector<std::size_t> bifurcation_slices;  // slices with >1 MAB component
};

struct PlaqueRun {
  std::size_t first_slice = 0;
  std::size_t last_slice = 0;  // inclusive
  double length_mm = 0.0;
  double thickness_mm = 0.0;
};

struct PlaqueMeasurement {
  double length_mm = 0.0;     // longest run of flagged slices
  double thickness_mm = 0.0;  // max wall thickness over that run
  std::optional<PlaqueRun> longest;
  std::vector<PlaqueRun> runs;  // every flagged run, in slice order
};

struct ScanDiagnosis {
  std::vector<bool> per_slice_flags;
  bool diseased = false;
};

/// Mean of foreground pixel centres in mm (pixel (x, y) centred at
/// (x * pixel_mm, y * pixel_mm)); nullopt for an empty mask.
std::optional<Eigen::Vector2d> slice_centroid(const Mask& mask, double pixel_mm = 1.0);

/// Largest 8-connected foreground component; ties keep the one found first
/// in row-major order. Returns the component and the number of components.
std::pair<Mask, std::size_t> largest_component(const Mask& mask);

/// World-space MAB centroid (largest component) of every posed frame. Throws
/// DomainError when a frame has no MAB.
std::vector<Eigen::Vector3d> world_centroids(std::span<const Mask> mab, std::span<const Pose> poses,
                                             double pixel_spacing_mm);

/// Per-slice MAB centroid (largest component) of a label volume.
CentroidPath centroid_path(const Volume& labels);

/// Samples, for every slice i, the in-plane line through C_i at theta degrees
/// from the y-axis with bilinear interpolation; samples outside the volume
/// and slices without a centroid are zero. theta must lie in [-90, 90).
LongitudinalImage cut_longitudinal(const Volume& vol, const CentroidPath& path, double theta_deg,
                                   double extent_mm = 20.0, double step_mm = 0.2);

/// ECST diameter stenosis of one transverse slice: the maximum over chord
/// directions (1 degree steps) through the MAB centroid of
/// L_wall / (L_wall + L_lumen). Chord lengths are averaged over a strip of
/// half-width 3 pixels (triangular weights) around the line, which removes
/// the boundary staircase a single digital line would see. Throws
/// InvalidArgument on empty MAB, mismatched shapes, or LIB outside MAB.
ChordMeasurement stenosis_diameter(const Mask& mab, const Mask& lib, double pixel_mm);

/// Per-slice stenosis over a label volume; grade is the maximum (smallest
/// slice index on ties). Throws DomainError when no slice holds a vessel.
StenosisReport stenosis_grade(const Volume& labels);

/// Wall thickness in mm for chord directions 0..179 degrees: along each of
/// the two rays from the MAB centroid, MAB length minus lumen length (same
/// strip averaging as stenosis_diameter); the larger side is reported.
std::vector<double> wall_thickness_profile(const Mask& mab, const Mask& lib, double pixel_mm);

/// Per-slice thickness profiles of a label volume (empty where no vessel).
std::vector<std::vector<double>> thickness_profiles(const Volume& labels);

/// flag[i] = max(profile[i]) > threshold_mm. Empty profiles are unflagged.
std::vector<bool> detect_plaque_slices(std::span<const std::vector<double>> profiles,
                                       double threshold_mm = 1.5);

/// Diseased when some run of at least run_length consecutive flags exists.
ScanDiagnosis scan_diagnosis(const std::vector<bool>& flags, std::size_t run_length = 5);

PlaqueMeasurement plaque_size(const std::vector<bool>& flags,
                              std::span<const std::vector<double>> profiles,
                              double slice_spacing_mm);

}  // namespace carotid
