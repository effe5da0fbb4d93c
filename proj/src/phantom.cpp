#include "carotid3d/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace carotid {
namespace {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

template <typename T>
std::vector<T> reorder(const std::vector<T>& items, const std::vector<std::size_t>& order) {
  std::vector<T> out;
  out.reserve(order.size());
  for (std::size_t src : order) out.push_back(items[src]);
  return out;
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

void PhantomSpec::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("phantom spec: " + msg); };
  if (!(length_mm > 0.0)) fail("length_mm must be > 0");
  if (!(mab_radius_mm > 0.0)) fail("mab_radius_mm must be > 0");
  if (!(lib_radius_mm > 0.0) || lib_radius_mm > mab_radius_mm) {
    fail("lib_radius_mm must lie in (0, mab_radius_mm]");
  }
  if (!(lumen_offset_mm >= 0.0) || lumen_offset_mm + lib_radius_mm > mab_radius_mm) {
    fail("lumen must lie inside the MAB disk (lumen_offset_mm + lib_radius_mm <= mab_radius_mm)");
  }
  if (bump) {
    if (!(bump->length_mm > 0.0)) fail("bump length_mm must be > 0");
    if (!(bump->depth_mm >= 0.0) || !(bump->depth_mm < 2.0 * lib_radius_mm)) {
      fail("bump depth_mm must lie in [0, 2 * lib_radius_mm)");
    }
    const double z = bump->center_mm;
    if (lib_center(z).norm() + lib_radius(z) > mab_radius_mm + 1e-12) {
      fail("bump lumen leaves the MAB disk");
    }
  }
  if (frame_width < 2 || frame_height < 2) fail("frame must be at least 2x2 pixels");
  if (!(pixel_spacing_mm > 0.0)) fail("pixel_spacing_mm must be > 0");
  if (n_frames < 2) fail("n_frames must be >= 2");
  if (!(frame_pitch_mm > 0.0)) fail("frame_pitch_mm must be > 0");
  if ((n_frames - 1) * frame_pitch_mm > length_mm + 1e-9) fail("sweep is longer than the tube");
  if (!(std::abs(tilt_deg) < 60.0)) fail("tilt_deg must lie in (-60, 60)");
  const double half_extent =
      0.5 * std::min(frame_width - 1, frame_height - 1) * pixel_spacing_mm;
  if (mab_radius_mm / std::cos(deg2rad(tilt_deg)) >= half_extent) {
    fail("vessel does not fit inside the frame");
  }
  if (!(pixel_noise_sigma >= 0.0)) fail("pixel_noise_sigma must be >= 0");
  if (!(frame_rate_hz > 0.0)) fail("frame_rate_hz must be > 0");
}

bool PhantomSpec::in_bump(double z) const {
  return bump && z >= bump->center_mm - 0.5 * bump->length_mm &&
         z < bump->center_mm + 0.5 * bump->length_mm;
}

double PhantomSpec::mab_radius(double) const { return mab_radius_mm; }

double PhantomSpec::lib_radius(double z) const {
  return in_bump(z) ? lib_radius_mm - 0.5 * bump->depth_mm : lib_radius_mm;
}

Eigen::Vector2d PhantomSpec::lib_center(double z) const {
  return {lumen_offset_mm, in_bump(z) ? -0.5 * bump->depth_mm : 0.0};
}

double PhantomSpec::frame_z(int i) const {
  const double start = 0.5 * (length_mm - (n_frames - 1) * frame_pitch_mm);
  return start + i * frame_pitch_mm;
}

double PhantomSpec::designed_stenosis(double z) const {
  const double r = lib_radius(z);
  const double e = lib_center(z).norm();
  return 1.0 - std::sqrt(std::max(r * r - e * e, 0.0)) / mab_radius(z);
}

double PhantomSpec::designed_grade() const {
  double grade = designed_stenosis(bump ? bump->center_mm - 0.5 * bump->length_mm - 1.0 : 0.0);
  if (bump) grade = std::max(grade, designed_stenosis(bump->center_mm));
  return grade;
}

double PhantomSpec::designed_thickness(double z) const {
  return mab_radius(z) - lib_radius(z) + lib_center(z).norm();
}

double bump_depth_for_grade(double mab_radius_mm, double lib_radius_mm, double grade) {
  const double chord = (1.0 - grade) * mab_radius_mm;
  if (!(grade >= 0.0 && grade < 1.0) || chord > lib_radius_mm) {
    throw InvalidArgument("grade not reachable by a plaque on this tube");
  }
  return (lib_radius_mm * lib_radius_mm - chord * chord) / lib_radius_mm;
}

void NoiseSpec::validate(std::size_t n_frames) const {
  if (!(sigma_trans >= 0.0) || !(sigma_rot >= 0.0)) {
    throw InvalidArgument("noise sigmas must be >= 0");
  }
  if (fallback) {
    if (fallback->length < 1 || fallback->start + fallback->length > n_frames) {
      throw InvalidArgument("fallback run [" + std::to_string(fallback->start) + ", " +
                            std::to_string(fallback->start + fallback->length) +
                            ") lies outside the " + std::to_string(n_frames) + "-frame sweep");
    }
  }
}

std::vector<LabelRaster> Sweep::labels() const {
  std::vector<LabelRaster> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(to_labels(m));
  return out;
}

PoseSequence ground_truth_poses(const PhantomSpec& spec) {
  spec.validate();
  const Rotation tilt = Rotation::from_axis_angle(Eigen::Vector3d::UnitX(), deg2rad(spec.tilt_deg));
  const Eigen::Vector3d local_center(0.5 * (spec.frame_width - 1) * spec.pixel_spacing_mm,
                                     0.5 * (spec.frame_height - 1) * spec.pixel_spacing_mm, 0.0);
  PoseSequence poses;
  poses.reserve(static_cast<std::size_t>(spec.n_frames));
  for (int i = 0; i < spec.n_frames; ++i) {
    poses.push_back({tilt, Eigen::Vector3d(0, 0, spec.frame_z(i)) - tilt.rotate(local_center)});
  }
  return poses;
}

Sweep generate_sweep(const PhantomSpec& spec) {
  Sweep sweep;
  sweep.ground_truth = ground_truth_poses(spec);
  sweep.seq.poses = sweep.ground_truth;
  sweep.seq.frame_rate = spec.frame_rate_hz;
  Rng rng(spec.seed);

  for (int i = 0; i < spec.n_frames; ++i) {
    const Pose& pose = sweep.ground_truth[static_cast<std::size_t>(i)];
    Frame frame{Raster<std::uint8_t>(spec.frame_width, spec.frame_height), spec.pixel_spacing_mm};
    MaskPair masks{Mask(spec.frame_width, spec.frame_height), Mask(spec.frame_width, spec.frame_height)};
    for (int v = 0; v < spec.frame_height; ++v) {
      for (int u = 0; u < spec.frame_width; ++u) {
        const Eigen::Vector3d p =
            pose.transform(Eigen::Vector3d(u * spec.pixel_spacing_mm, v * spec.pixel_spacing_mm, 0));
        const bool inside_tube = p.z() >= 0.0 && p.z() <= spec.length_mm;
        const Eigen::Vector2d xy = p.head<2>();
        const bool mab = inside_tube && xy.norm() <= spec.mab_radius(p.z());
        const bool lib = mab && (xy - spec.lib_center(p.z())).norm() <= spec.lib_radius(p.z());
        double value = lib   ? spec.lumen_intensity
                       : mab ? spec.wall_intensity
                             : spec.background_intensity;
        if (spec.pixel_noise_sigma > 0.0) value += spec.pixel_noise_sigma * rng.normal();
        frame.pixels(u, v) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
        masks.mab(u, v) = mab ? 1 : 0;
        masks.lib(u, v) = lib ? 1 : 0;
      }
    }
    sweep.seq.frames.push_back(std::move(frame));
    sweep.masks.push_back(std::move(masks));
    sweep.seq.timestamps.push_back(i / spec.frame_rate_hz);
  }
  sweep.source.resize(sweep.seq.frames.size());
  std::iota(sweep.source.begin(), sweep.source.end(), std::size_t{0});
  return sweep;
}

Sweep generate_sweep(PhantomSpec spec, int n_frames, double frame_pitch_mm) {
  spec.n_frames = n_frames;
  spec.frame_pitch_mm = frame_pitch_mm;
  return generate_sweep(spec);
}

std::vector<std::size_t> acquisition_order(std::size_t n, const NoiseSpec& noise) {
  noise.validate(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (noise.fallback) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(noise.fallback->start);
    std::reverse(first, first + static_cast<std::ptrdiff_t>(noise.fallback->length));
  }
  return order;
}

PoseSequence perturb_poses(std::span<const Pose> gt, const NoiseSpec& noise) {
  const auto order = acquisition_order(gt.size(), noise);
  Rng rng(noise.seed);
  PoseSequence noisy;
  noisy.reserve(gt.size());
  for (const Pose& p : gt) {
    Eigen::Vector3d dt, dr;
    for (int a = 0; a < 3; ++a) dt[a] = noise.sigma_trans * rng.normal();
    for (int a = 0; a < 3; ++a) dr[a] = noise.sigma_rot * rng.normal();
    Pose q = p;
    q.translation += dt;
    if (noise.sigma_rot > 0.0) q.rotation = p.rotation * Rotation::exp(dr);
    noisy.push_back(q);
  }
  return reorder(noisy, order);
}

Sweep perturb_sweep(const Sweep& sweep, const NoiseSpec& noise) {
  const auto order = acquisition_order(sweep.seq.size(), noise);
  Sweep out;
  out.seq.frames = reorder(sweep.seq.frames, order);
  out.seq.poses = perturb_poses(sweep.seq.poses, noise);
  out.seq.frame_rate = sweep.seq.frame_rate;
  out.seq.timestamps = sweep.seq.timestamps;  // acquisition times stay monotone
  out.masks = reorder(sweep.masks, order);
  out.ground_truth = reorder(sweep.ground_truth, order);
  out.source = reorder(sweep.source, order);
  return out;
}

double trajectory_rmse(std::span<const Pose> a, std::span<const Pose> b, const MetricWeights& w) {
  if (a.size() != b.size()) throw InvalidArgument("trajectories differ in length");
  if (a.empty()) throw InvalidArgument("trajectories are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = geodesic_distance(a[i], b[i], w);
    sum += d * d;
  }
  return std::sqrt(sum / double(a.size()));
}

}  // namespace carotid
