#include "carotid3d/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace carotid {
namespace {

constexpr int kAngleCount = 180;         // 1 degree chord directions over [0, 180)
constexpr double kStripHalfWidth = 3.0;  // pixels

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Centroid in pixel units (x, y).
std::optional<Eigen::Vector2d> pixel_centroid(const Mask& mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return Eigen::Vector2d(sx / double(n), sy / double(n));
}

struct VesselPixel {
  double dx = 0.0;  // offset from the MAB centroid, pixels
  double dy = 0.0;
  bool lumen = false;
};

std::vector<VesselPixel> vessel_pixels(const Mask& mab, const Mask& lib, const Eigen::Vector2d& c) {
  std::vector<VesselPixel> out;
  for (int y = 0; y < mab.height(); ++y) {
    for (int x = 0; x < mab.width(); ++x) {
      if (mab(x, y)) out.push_back({x - c.x(), y - c.y(), lib(x, y) != 0});
    }
  }
  return out;
}

// Chord lengths (pixels) on both sides of the centroid along direction phi.
// A single digital line sees the staircase of the mask boundary, so each
// length is averaged over a thin strip: every pixel contributes the weight
// max(0, 1 - d / h) / h, d its distance from the line and h the strip
// half-width. On a straight band this reproduces the exact chord length.
// Pixels exactly on the perpendicular through the centroid count half to
// each side.
struct ChordLengths {
  double mab_fwd = 0.0, mab_back = 0.0;
  double lib_fwd = 0.0, lib_back = 0.0;

  [[nodiscard]] double mab() const { return mab_fwd + mab_back; }
  [[nodiscard]] double lib() const { return lib_fwd + lib_back; }
};

ChordLengths chord(std::span<const VesselPixel> pixels, double phi) {
  const double ux = std::cos(phi), uy = std::sin(phi);
  ChordLengths out;
  for (const auto& p : pixels) {
    const double d = std::abs(-p.dx * uy + p.dy * ux);
    if (d >= kStripHalfWidth) continue;
    const double w = (1.0 - d / kStripHalfWidth) / kStripHalfWidth;
    const double t = p.dx * ux + p.dy * uy;
    const double fwd = t > 0.0 ? w : t < 0.0 ? 0.0 : 0.5 * w;
    const double back = w - fwd;
    out.mab_fwd += fwd;
    out.mab_back += back;
    if (p.lumen) {
      out.lib_fwd += fwd;
      out.lib_back += back;
    }
  }
  return out;
}

void check_pair(const Mask& mab, const Mask& lib) {
  if (!mab.same_shape(lib)) throw InvalidArgument("MAB and LIB masks differ in shape");
  bool any = false;
  for (std::size_t i = 0; i < mab.size(); ++i) {
    if (lib.data()[i] && !mab.data()[i]) {
      throw InvalidArgument("LIB region is not contained in the MAB region");
    }
    any = any || mab.data()[i];
  }
  if (!any) throw InvalidArgument("MAB mask is empty");
}

Mask intersect(const Mask& a, const Mask& b) {
  Mask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  return out;
}

struct SliceMasks {
  Mask mab;
  Mask lib;
  std::size_t components = 0;
};

std::optional<SliceMasks> vessel_in_slice(const Volume& labels, int k) {
  const MaskPair pair = from_labels(labels.slice(k));
  auto [component, count] = largest_component(pair.mab);
  if (count == 0) return std::nullopt;
  Mask lib = intersect(pair.lib, component);
  return SliceMasks{std::move(component), std::move(lib), count};
}

}  // namespace

std::size_t CentroidPath::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

std::optional<Eigen::Vector2d> slice_centroid(const Mask& mask, double pixel_mm) {
  auto c = pixel_centroid(mask);
  if (!c) return std::nullopt;
  return *c * pixel_mm;
}

std::pair<Mask, std::size_t> largest_component(const Mask& mask) {
  const int w = mask.width(), h = mask.height();
  Raster<int> label(w, h, 0);
  std::vector<std::size_t> sizes{0};
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y) || label(x, y)) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      stack.emplace_back(x, y);
      label(x, y) = id;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++sizes[id];
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (mask.contains(nx, ny) && mask(nx, ny) && !label(nx, ny)) {
              label(nx, ny) = id;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
    }
  }
  Mask out(w, h, 0);
  const std::size_t count = sizes.size() - 1;
  if (count == 0) return {out, 0};
  const auto best = static_cast<int>(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = label.data()[i] == best ? 1 : 0;
  return {out, count};
}

std::vector<Eigen::Vector3d> world_centroids(std::span<const Mask> mab, std::span<const Pose> poses,
                                             double pixel_spacing_mm) {
  if (mab.size() != poses.size()) throw InvalidArgument("mask count does not match pose count");
  if (!(pixel_spacing_mm > 0.0)) throw InvalidArgument("pixel spacing must be > 0");
  std::vector<Eigen::Vector3d> out;
  out.reserve(mab.size());
  for (std::size_t f = 0; f < mab.size(); ++f) {
    const auto c = pixel_centroid(largest_component(mab[f]).first);
    if (!c) throw DomainError("frame " + std::to_string(f) + " has an empty MAB mask");
    out.push_back(poses[f].transform(Eigen::Vector3d(c->x() * pixel_spacing_mm,
                                                     c->y() * pixel_spacing_mm, 0.0)));
  }
  return out;
}

CentroidPath centroid_path(const Volume& labels) {
  CentroidPath path;
  path.points.assign(static_cast<std::size_t>(labels.dims[2]), Eigen::Vector3d::Zero());
  path.valid.assign(static_cast<std::size_t>(labels.dims[2]), false);
  for (int k = 0; k < labels.dims[2]; ++k) {
    const auto slice = vessel_in_slice(labels, k);
    if (!slice) continue;
    const Eigen::Vector2d c = *pixel_centroid(slice->mab);
    path.points[static_cast<std::size_t>(k)] = labels.voxel_center(0, 0, k) +
                                               labels.spacing * Eigen::Vector3d(c.x(), c.y(), 0.0);
    path.valid[static_cast<std::size_t>(k)] = true;
  }
  return path;
}

LongitudinalImage cut_longitudinal(const Volume& vol, const CentroidPath& path, double theta_deg,
                                   double extent_mm, double step_mm) {
  if (!(theta_deg >= -90.0 && theta_deg < 90.0)) {
    throw InvalidArgument("cut angle must lie in [-90, 90), got " + std::to_string(theta_deg));
  }
  if (path.size() != static_cast<std::size_t>(vol.dims[2])) {
    throw InvalidArgument("centroid path length does not match the slice count");
  }
  if (path.valid_count() == 0) throw InvalidArgument("centroid path is empty");
  if (!(extent_mm > 0.0) || !(step_mm > 0.0)) throw InvalidArgument("cut extent and step must be > 0");

  const int half = static_cast<int>(std::lround(0.5 * extent_mm / step_mm));
  const int rows = 2 * half + 1;
  LongitudinalImage out;
  out.image = Raster<std::uint8_t>(vol.dims[2], rows, 0);
  out.theta_deg = theta_deg;
  out.column_pixel_mm = vol.spacing;
  out.row_pixel_mm = step_mm;

  const double th = deg2rad(theta_deg);
  const Eigen::Vector2d dir(std::sin(th), std::cos(th));
  for (int k = 0; k < vol.dims[2]; ++k) {
    if (!path.valid[static_cast<std::size_t>(k)]) continue;
    const Eigen::Vector3d& c = path.points[static_cast<std::size_t>(k)];
    for (int r = 0; r < rows; ++r) {
      const double s = double(r - half) * step_mm;
      const double gx = (c.x() + s * dir.x() - vol.origin.x()) / vol.spacing;
      const double gy = (c.y() + s * dir.y() - vol.origin.y()) / vol.spacing;
      const int x0 = static_cast<int>(std::floor(gx));
      const int y0 = static_cast<int>(std::floor(gy));
      const double fx = gx - x0, fy = gy - y0;
      auto value = [&](int x, int y) -> double {
        return vol.contains(x, y, k) ? vol.at(x, y, k) : 0.0;
      };
      const double v = (1 - fx) * (1 - fy) * value(x0, y0) + fx * (1 - fy) * value(x0 + 1, y0) +
                       (1 - fx) * fy * value(x0, y0 + 1) + fx * fy * value(x0 + 1, y0 + 1);
      out.image(k, r) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

ChordMeasurement stenosis_diameter(const Mask& mab, const Mask& lib, double pixel_mm) {
  if (!(pixel_mm > 0.0)) throw InvalidArgument("pixel size must be > 0");
  check_pair(mab, lib);
  const auto pixels = vessel_pixels(mab, lib, *pixel_centroid(mab));

  ChordMeasurement best;
  best.stenosis = -1.0;
  for (int a = 0; a < kAngleCount; ++a) {
    const ChordLengths len = chord(pixels, deg2rad(a));
    if (!(len.mab() > 0.0)) continue;
    const double s = std::clamp((len.mab() - len.lib()) / len.mab(), 0.0, 1.0);
    if (s > best.stenosis) {
      best.stenosis = s;
      best.angle_deg = a;
      best.mab_length_mm = len.mab() * pixel_mm;
      best.lumen_length_mm = len.lib() * pixel_mm;
    }
  }
  if (best.stenosis < 0.0) throw DomainError("no chord through the MAB centroid meets the MAB");
  return best;
}

StenosisReport stenosis_grade(const Volume& labels) {
  StenosisReport report;
  report.per_slice.assign(static_cast<std::size_t>(labels.dims[2]), std::nullopt);
  bool found = false;
  for (int k = 0; k < labels.dims[2]; ++k) {
    const auto slice = vessel_in_slice(labels, k);
    if (!slice) continue;
    const auto idx = static_cast<std::size_t>(k);
    if (slice->components > 1) report.bifurcation_slices.push_back(idx);
    const ChordMeasurement m = stenosis_diameter(slice->mab, slice->lib, labels.spacing);
    report.per_slice[idx] = m.stenosis;
    if (!found || m.stenosis > report.grade) {
      report.grade = m.stenosis;
      report.argmax_slice = idx;
      report.argmax_angle_deg = m.angle_deg;
      found = true;
    }
  }
  if (!found) throw DomainError("no slice of the label volume contains a vessel");
  return report;
}

std::vector<double> wall_thickness_profile(const Mask& mab, const Mask& lib, double pixel_mm) {
  if (!(pixel_mm > 0.0)) throw InvalidArgument("pixel size must be > 0");
  check_pair(mab, lib);
  const auto pixels = vessel_pixels(mab, lib, *pixel_centroid(mab));
  std::vector<double> profile(kAngleCount);
  for (int a = 0; a < kAngleCount; ++a) {
    const ChordLengths len = chord(pixels, deg2rad(a));
    profile[static_cast<std::size_t>(a)] =
        std::max(len.mab_fwd - len.lib_fwd, len.mab_back - len.lib_back) * pixel_mm;
  }
  return profile;
}

std::vector<std::vector<double>> thickness_profiles(const Volume& labels) {
  std::vector<std::vector<double>> profiles(static_cast<std::size_t>(labels.dims[2]));
  for (int k = 0; k < labels.dims[2]; ++k) {
    const auto slice = vessel_in_slice(labels, k);
    if (!slice) continue;
    profiles[static_cast<std::size_t>(k)] =
        wall_thickness_profile(slice->mab, slice->lib, labels.spacing);
  }
  return profiles;
}

std::vector<bool> detect_plaque_slices(std::span<const std::vector<double>> profiles,
                                       double threshold_mm) {
  std::vector<bool> flags(profiles.size(), false);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].empty()) continue;
    flags[i] = *std::max_element(profiles[i].begin(), profiles[i].end()) > threshold_mm;
  }
  return flags;
}

ScanDiagnosis scan_diagnosis(const std::vector<bool>& flags, std::size_t run_length) {
  if (run_length < 1) throw InvalidArgument("run length must be >= 1");
  ScanDiagnosis d;
  d.per_slice_flags = flags;
  std::size_t run = 0;
  for (bool f : flags) {
    run = f ? run + 1 : 0;
    if (run >= run_length) {
      d.diseased = true;
      break;
    }
  }
  return d;
}

PlaqueMeasurement plaque_size(const std::vector<bool>& flags,
                              std::span<const std::vector<double>> profiles,
                              double slice_spacing_mm) {
  if (!(slice_spacing_mm > 0.0)) throw InvalidArgument("slice spacing must be > 0");
  if (!profiles.empty() && profiles.size() != flags.size()) {
    throw InvalidArgument("flag and profile counts differ");
  }
  auto max_thickness = [&](std::size_t i) {
    if (profiles.empty() || profiles[i].empty()) return 0.0;
    return *std::max_element(profiles[i].begin(), profiles[i].end());
  };

  PlaqueMeasurement m;
  std::size_t i = 0;
  while (i < flags.size()) {
    if (!flags[i]) {
      ++i;
      continue;
    }
    PlaqueRun run;
    run.first_slice = i;
    while (i < flags.size() && flags[i]) {
      run.thickness_mm = std::max(run.thickness_mm, max_thickness(i));
      ++i;
    }
    run.last_slice = i - 1;
    run.length_mm = double(run.last_slice - run.first_slice + 1) * slice_spacing_mm;
    if (!m.longest || run.length_mm > m.longest->length_mm) m.longest = run;
    m.runs.push_back(run);
  }
  if (m.longest) {
    m.length_mm = m.longest->length_mm;
    m.thickness_mm = m.longest->thickness_mm;
  }
  return m;
}

}  // namespace carotid
