#include "carotid3d/recon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace carotid {
namespace {

constexpr std::size_t kMaxVoxels = std::size_t{1} << 31;

struct Offset {
  int di, dj, dk;
  double distance;  // voxels
};

std::vector<Offset> neighbourhood(int radius) {
  std::vector<Offset> offsets;
  for (int dk = -radius; dk <= radius; ++dk) {
    for (int dj = -radius; dj <= radius; ++dj) {
      for (int di = -radius; di <= radius; ++di) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        offsets.push_back({di, dj, dk, std::sqrt(double(di * di + dj * dj + dk * dk))});
      }
    }
  }
  std::stable_sort(offsets.begin(), offsets.end(),
                   [](const Offset& a, const Offset& b) { return a.distance < b.distance; });
  return offsets;
}

std::uint8_t round_to_u8(double value) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
}

// Shared forward mapping for intensity and label frames.
Volume forward_map(std::span<const Raster<std::uint8_t>> images, std::span<const Pose> poses,
                   double pixel_spacing, double spacing, bool label_mode) {
  if (images.empty()) throw InvalidArgument("reconstruction needs at least one frame");
  if (images.size() != poses.size()) {
    throw InvalidArgument("frame count " + std::to_string(images.size()) +
                          " does not match pose count " + std::to_string(poses.size()));
  }
  if (!(pixel_spacing > 0.0)) throw InvalidArgument("pixel spacing must be > 0");

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::size_t f = 0; f < images.size(); ++f) {
    if (!poses[f].is_finite()) {
      throw InvalidArgument("pose " + std::to_string(f) + " is not finite");
    }
    const double w = (images[f].width() - 1) * pixel_spacing;
    const double h = (images[f].height() - 1) * pixel_spacing;
    for (const auto& corner : {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(w, 0, 0),
                               Eigen::Vector3d(0, h, 0), Eigen::Vector3d(w, h, 0)}) {
      const Eigen::Vector3d p = poses[f].transform(corner);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }

  const Eigen::Vector3d origin = lo - Eigen::Vector3d::Constant(spacing);
  std::array<int, 3> dims{};
  double total = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double extent = std::llround((hi[a] - origin[a]) / spacing) + 2.0;
    total *= extent;
    if (total > double(kMaxVoxels)) {
      throw InvalidArgument("reconstruction grid too large; increase the voxel spacing");
    }
    dims[a] = static_cast<int>(extent);
  }
  Volume vol = Volume::make(origin, spacing, dims, label_mode);

  std::vector<std::uint64_t> sum;
  std::vector<std::uint32_t> count;
  if (!label_mode) {
    sum.assign(vol.size(), 0);
    count.assign(vol.size(), 0);
  }

  const double inv = 1.0 / spacing;
  for (std::size_t f = 0; f < images.size(); ++f) {
    const auto& img = images[f];
    const Eigen::Matrix3d r = poses[f].rotation.matrix();
    const Eigen::Vector3d step_u = r.col(0) * pixel_spacing * inv;
    const Eigen::Vector3d step_v = r.col(1) * pixel_spacing * inv;
    const Eigen::Vector3d base = (poses[f].translation - origin) * inv;
    for (int v = 0; v < img.height(); ++v) {
      const Eigen::Vector3d row = base + double(v) * step_v;
      for (int u = 0; u < img.width(); ++u) {
        const Eigen::Vector3d g = row + double(u) * step_u;
        const int i = static_cast<int>(std::lround(g.x()));
        const int j = static_cast<int>(std::lround(g.y()));
        const int k = static_cast<int>(std::lround(g.z()));
        if (!vol.contains(i, j, k)) continue;  // cannot happen for the padded hull
        const std::size_t idx = vol.index(i, j, k);
        const std::uint8_t value = img(u, v);
        if (label_mode) {
          vol.voxels[idx] = std::max(vol.voxels[idx], value);
        } else {
          sum[idx] += value;
          ++count[idx];
        }
        vol.fill_mask[idx] = 1;
      }
    }
  }

  if (!label_mode) {
    for (std::size_t idx = 0; idx < vol.size(); ++idx) {
      if (count[idx] > 0) vol.voxels[idx] = round_to_u8(double(sum[idx]) / double(count[idx]));
    }
  }
  return vol;
}

std::vector<Raster<std::uint8_t>> frame_images(const FrameSequence& seq) {
  std::vector<Raster<std::uint8_t>> images;
  images.reserve(seq.frames.size());
  for (const auto& f : seq.frames) images.push_back(f.pixels);
  return images;
}

}  // namespace

LabelRaster to_labels(const MaskPair& masks) {
  if (!masks.mab.same_shape(masks.lib)) throw InvalidArgument("MAB and LIB masks differ in shape");
  LabelRaster labels(masks.mab.width(), masks.mab.height(), kBackground);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool mab = masks.mab.data()[i] != 0;
    const bool lib = masks.lib.data()[i] != 0;
    if (lib && !mab) throw InvalidArgument("LIB region is not contained in the MAB region");
    labels.data()[i] = lib ? kLumen : (mab ? kWall : kBackground);
  }
  return labels;
}

MaskPair from_labels(const LabelRaster& labels) {
  MaskPair out{Mask(labels.width(), labels.height()), Mask(labels.width(), labels.height())};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.mab.data()[i] = labels.data()[i] >= kWall ? 1 : 0;
    out.lib.data()[i] = labels.data()[i] == kLumen ? 1 : 0;
  }
  return out;
}

void FrameSequence::validate() const {
  if (frames.empty()) throw InvalidArgument("frame sequence is empty");
  if (frames.size() != poses.size()) {
    throw InvalidArgument("frame count " + std::to_string(frames.size()) +
                          " does not match pose count " + std::to_string(poses.size()));
  }
  if (!timestamps.empty() && timestamps.size() != frames.size()) {
    throw InvalidArgument("timestamp count does not match frame count");
  }
  const double spacing = frames.front().pixel_spacing;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!(frames[i].pixel_spacing > 0.0)) throw InvalidArgument("pixel spacing must be > 0");
    if (frames[i].pixel_spacing != spacing) {
      throw InvalidArgument("frames must share one pixel spacing");
    }
    if (frames[i].pixels.empty()) throw InvalidArgument("frame " + std::to_string(i) + " is empty");
    if (!poses[i].is_finite()) throw InvalidArgument("pose " + std::to_string(i) + " is not finite");
  }
}

Volume Volume::make(const Eigen::Vector3d& origin, double spacing, std::array<int, 3> dims,
                    bool label_mode) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("voxel spacing must be > 0");
  if (!origin.allFinite()) throw InvalidArgument("volume origin must be finite");
  for (int d : dims) {
    if (d < 1) throw InvalidArgument("volume dimensions must be >= 1");
  }
  Volume v;
  v.origin = origin;
  v.spacing = spacing;
  v.dims = dims;
  v.label_mode = label_mode;
  v.voxels.assign(v.size(), 0);
  v.fill_mask.assign(v.size(), 0);
  return v;
}

Raster<std::uint8_t> Volume::slice(int k) const {
  if (k < 0 || k >= dims[2]) throw InvalidArgument("slice index out of range");
  Raster<std::uint8_t> out(dims[0], dims[1]);
  const auto first = voxels.begin() + static_cast<std::ptrdiff_t>(index(0, 0, k));
  std::copy(first, first + static_cast<std::ptrdiff_t>(out.size()), out.data().begin());
  return out;
}

double Volume::filled_fraction() const {
  if (fill_mask.empty()) return 0.0;
  const auto filled = std::count(fill_mask.begin(), fill_mask.end(), std::uint8_t{1});
  return double(filled) / double(fill_mask.size());
}

bool Volume::same_grid(const Volume& other) const {
  return dims == other.dims && spacing == other.spacing && origin == other.origin;
}

void ReconConfig::validate() const {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("voxel spacing must be > 0");
  if (hole_fill_radius < 0) throw InvalidArgument("hole fill radius must be >= 0");
}

Eigen::Vector3d pixel_to_world(std::size_t frame_index, double u, double v,
                               const FrameSequence& seq) {
  if (frame_index >= seq.frames.size() || frame_index >= seq.poses.size()) {
    throw InvalidArgument("frame index out of range");
  }
  const Frame& f = seq.frames[frame_index];
  if (!(u >= 0.0 && v >= 0.0 && u <= f.width() - 1 && v <= f.height() - 1)) {
    throw InvalidArgument("pixel lies outside the frame");
  }
  return seq.poses[frame_index].transform(
      Eigen::Vector3d(u * f.pixel_spacing, v * f.pixel_spacing, 0.0));
}

Volume fdp_reconstruct(const FrameSequence& seq, const ReconConfig& cfg) {
  cfg.validate();
  seq.validate();
  const auto images = frame_images(seq);
  return forward_map(images, seq.poses, seq.frames.front().pixel_spacing, cfg.spacing,
                     cfg.label_mode);
}

Volume hole_fill(const Volume& v, int radius) {
  if (radius < 0) throw InvalidArgument("hole fill radius must be >= 0");
  Volume out = v;
  if (radius == 0) return out;

  const auto offsets = neighbourhood(radius);
  for (int k = 0; k < v.dims[2]; ++k) {
    for (int j = 0; j < v.dims[1]; ++j) {
      for (int i = 0; i < v.dims[0]; ++i) {
        const std::size_t idx = v.index(i, j, k);
        if (v.fill_mask[idx]) continue;

        if (v.label_mode) {
          // Nearest written voxel; equidistant ties take the larger label.
          double nearest = -1.0;
          std::uint8_t label = 0;
          for (const Offset& o : offsets) {
            if (nearest >= 0.0 && o.distance > nearest) break;
            const int ni = i + o.di, nj = j + o.dj, nk = k + o.dk;
            if (!v.contains(ni, nj, nk)) continue;
            const std::size_t n = v.index(ni, nj, nk);
            if (!v.fill_mask[n]) continue;
            if (nearest < 0.0) {
              nearest = o.distance;
              label = v.voxels[n];
            } else {
              label = std::max(label, v.voxels[n]);
            }
          }
          if (nearest >= 0.0) {
            out.voxels[idx] = label;
            out.fill_mask[idx] = 1;
          }
        } else {
          double weighted = 0.0;
          double weights = 0.0;
          for (const Offset& o : offsets) {
            const int ni = i + o.di, nj = j + o.dj, nk = k + o.dk;
            if (!v.contains(ni, nj, nk)) continue;
            const std::size_t n = v.index(ni, nj, nk);
            if (!v.fill_mask[n]) continue;
            const double w = 1.0 / o.distance;
            weighted += w * v.voxels[n];
            weights += w;
          }
          if (weights > 0.0) {
            out.voxels[idx] = round_to_u8(weighted / weights);
            out.fill_mask[idx] = 1;
          }
        }
      }
    }
  }
  return out;
}

Volume reconstruct(const FrameSequence& seq, const ReconConfig& cfg) {
  return hole_fill(fdp_reconstruct(seq, cfg), cfg.hole_fill_radius);
}

Volume reconstruct_mask_volume(std::span<const LabelRaster> masks, std::span<const Pose> poses,
                               double pixel_spacing, ReconConfig cfg) {
  cfg.validate();
  if (!masks.empty()) {
    for (std::size_t f = 0; f < masks.size(); ++f) {
      if (!masks[f].same_shape(masks.front())) {
        throw InvalidArgument("mask " + std::to_string(f) + " differs in shape from mask 0");
      }
      for (std::uint8_t value : masks[f].data()) {
        if (value > kLumen) {
          throw InvalidArgument("mask " + std::to_string(f) + " holds a value outside {0,1,2}");
        }
      }
    }
  }
  cfg.label_mode = true;
  return hole_fill(forward_map(masks, poses, pixel_spacing, cfg.spacing, true),
                   cfg.hole_fill_radius);
}

PoseSequence pseudo_stack_poses(const FrameSequence& seq) {
  seq.validate();
  if (seq.size() < 2) throw InvalidArgument("pseudo volume needs at least 2 frames");

  const Frame& first = seq.frames.front();
  const Eigen::Vector3d local_center(0.5 * (first.width() - 1) * first.pixel_spacing,
                                     0.5 * (first.height() - 1) * first.pixel_spacing, 0.0);
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(seq.size());
  for (const Pose& p : seq.poses) centers.push_back(p.transform(local_center));

  const Eigen::Vector3d sweep = centers.back() - centers.front();
  if (!(sweep.norm() > 0.0)) {
    throw DomainError("first and last frame centres coincide; sweep direction undefined");
  }
  const Eigen::Vector3d dir = sweep.normalized();

  PoseSequence stacked;
  stacked.reserve(seq.size());
  for (const auto& c : centers) {
    const double z = dir.dot(c - centers.front());
    stacked.push_back(Pose::from_translation(centers.front() + Eigen::Vector3d(0, 0, z) -
                                             local_center));
  }
  return stacked;
}

Volume stack_pseudo_volume(const FrameSequence& seq, const ReconConfig& cfg) {
  FrameSequence stacked = seq;
  stacked.poses = pseudo_stack_poses(seq);
  return reconstruct(stacked, cfg);
}

}  // namespace carotid
