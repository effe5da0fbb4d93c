#include "doctest.h"

#include <cmath>
#include <numbers>

#include "carotid3d/phantom.hpp"
#include "carotid3d/recon.hpp"
#include "support.hpp"

using namespace carotid;
using doctest::Approx;

namespace {

FrameSequence single(const Raster<std::uint8_t>& px, const Pose& pose, double spacing) {
  FrameSequence seq;
  seq.frames.push_back({px, spacing});
  seq.poses.push_back(pose);
  return seq;
}

Raster<std::uint8_t> ramp(int w, int h) {
  Raster<std::uint8_t> r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) r(x, y) = static_cast<std::uint8_t>((7 * x + 13 * y) % 256);
  return r;
}

// Sparse random volume for the hole-fill oracles.
Volume sparse_volume(Rng& rng, bool label_mode) {
  Volume v = Volume::make(Eigen::Vector3d(0.5, -1, 2), 0.3, {9, 8, 7}, label_mode);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (rng.uniform() < 0.08) {
      v.fill_mask[i] = 1;
      v.voxels[i] = label_mode ? static_cast<std::uint8_t>(1 + (rng.uniform() < 0.5))
                               : static_cast<std::uint8_t>(255 * rng.uniform());
    }
  }
  return v;
}

}  // namespace

TEST_CASE("pixel_to_world examples") {
  const auto seq = single(Raster<std::uint8_t>(32, 32), Pose::identity(), 0.1);
  CHECK(pixel_to_world(0, 0, 0, seq).isApprox(Eigen::Vector3d::Zero()));
  CHECK((pixel_to_world(0, 10, 20, seq) - Eigen::Vector3d(1.0, 2.0, 0)).norm() < 1e-12);
  const auto shifted = single(Raster<std::uint8_t>(32, 32), Pose::from_translation({0, 0, 5}), 0.1);
  CHECK((pixel_to_world(0, 10, 20, shifted) - Eigen::Vector3d(1.0, 2.0, 5)).norm() < 1e-12);
  CHECK_THROWS_AS(pixel_to_world(0, 32, 0, seq), InvalidArgument);
  CHECK_THROWS_AS(pixel_to_world(1, 0, 0, seq), InvalidArgument);
}

TEST_CASE("one axis-aligned frame is reproduced bit-exactly") {
  const auto px = ramp(23, 17);
  const auto vol = fdp_reconstruct(single(px, Pose::identity(), 0.2), {0.2, 3, false});
  // Hull padded by one voxel on each side.
  CHECK(vol.dims == std::array<int, 3>{25, 19, 3});
  CHECK((vol.origin - Eigen::Vector3d(-0.2, -0.2, -0.2)).norm() < 1e-12);
  for (int y = 0; y < 17; ++y)
    for (int x = 0; x < 23; ++x) REQUIRE(vol.at(x + 1, y + 1, 1) == px(x, y));
  std::size_t filled = 0;
  for (auto f : vol.fill_mask) filled += f;
  CHECK(filled == 23u * 17u);
}

TEST_CASE("hull dimensions follow the padded corner hull") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    FrameSequence seq;
    for (int f = 0; f < 4; ++f) {
      seq.frames.push_back({Raster<std::uint8_t>(30, 20, 1), 0.15});
      seq.poses.push_back(test::random_pose(rng, 3.0, std::numbers::pi));
    }
    const double s = 0.25;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), hi = -lo;
    for (int f = 0; f < 4; ++f) {
      for (double u : {0.0, 29.0})
        for (double v : {0.0, 19.0}) {
          const auto p = pixel_to_world(f, u, v, seq);
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
    }
    const auto vol = fdp_reconstruct(seq, {s, 0, false});
    for (int a = 0; a < 3; ++a) {
      CHECK(vol.origin[a] == Approx(lo[a] - s));
      CHECK(std::abs(vol.dims[a] - ((hi[a] - lo[a]) / s + 3.0)) <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("coincident writes average with half-away rounding") {
  FrameSequence seq;
  seq.frames = {{Raster<std::uint8_t>(5, 5, 100), 0.2}, {Raster<std::uint8_t>(5, 5, 200), 0.2}};
  seq.poses = {Pose::identity(), Pose::identity()};
  auto vol = fdp_reconstruct(seq, {0.2, 0, false});
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (vol.fill_mask[i]) REQUIRE(vol.voxels[i] == 150);
  }
  seq.frames[1].pixels = Raster<std::uint8_t>(5, 5, 201);
  vol = fdp_reconstruct(seq, {0.2, 0, false});
  CHECK(vol.at(1, 1, 1) == 151);

  // Label mode keeps the maximum.
  seq.frames = {{Raster<std::uint8_t>(5, 5, 2), 0.2}, {Raster<std::uint8_t>(5, 5, 1), 0.2}};
  vol = fdp_reconstruct(seq, {0.2, 0, true});
  CHECK(vol.at(2, 2, 1) == 2);
}

TEST_CASE("constant frames give a constant volume") {
  Rng rng(42);
  FrameSequence seq;
  for (int f = 0; f < 30; ++f) {
    seq.frames.push_back({Raster<std::uint8_t>(40, 30, 77), 0.1});
    Pose p = test::random_pose(rng, 0.2, 0.1);
    p.translation.z() += 0.15 * f;
    seq.poses.push_back(p);
  }
  const auto vol = reconstruct(seq, {0.2, 3, false});
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (vol.fill_mask[i]) REQUIRE(vol.voxels[i] == 77);
  }
}

TEST_CASE("hole fill examples") {
  Rng rng(43);
  const Volume v = sparse_volume(rng, false);
  CHECK(hole_fill(v, 0).voxels == v.voxels);
  CHECK(hole_fill(v, 0).fill_mask == v.fill_mask);
  CHECK_THROWS_AS(hole_fill(v, -1), InvalidArgument);

  Volume line = Volume::make(Eigen::Vector3d::Zero(), 1.0, {3, 1, 1}, false);
  line.voxels = {100, 0, 100};
  line.fill_mask = {1, 0, 1};
  CHECK(hole_fill(line, 1).voxels[1] == 100);

  Volume slab = Volume::make(Eigen::Vector3d::Zero(), 1.0, {8, 8, 1}, false);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i)
      if ((i + j) % 2 == 0) {
        slab.voxels[slab.index(i, j, 0)] = 50;
        slab.fill_mask[slab.index(i, j, 0)] = 1;
      }
  const auto full = hole_fill(slab, 1);
  for (auto f : full.fill_mask) CHECK(f == 1);
}

TEST_CASE("intensity hole fill matches an inverse-distance oracle") {
  Rng rng(44);
  const Volume v = sparse_volume(rng, false);
  const int radius = 2;
  const Volume out = hole_fill(v, radius);
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        const auto idx = v.index(i, j, k);
        if (v.fill_mask[idx]) {
          REQUIRE(out.voxels[idx] == v.voxels[idx]);
          continue;
        }
        double num = 0, den = 0;
        for (int c = 0; c < v.dims[2]; ++c)
          for (int b = 0; b < v.dims[1]; ++b)
            for (int a = 0; a < v.dims[0]; ++a) {
              if (std::max({std::abs(a - i), std::abs(b - j), std::abs(c - k)}) > radius) continue;
              const auto n = v.index(a, b, c);
              if (!v.fill_mask[n]) continue;
              const double d = std::sqrt(double((a - i) * (a - i) + (b - j) * (b - j) + (c - k) * (c - k)));
              num += v.voxels[n] / d;
              den += 1 / d;
            }
        if (den == 0) {
          REQUIRE(out.fill_mask[idx] == 0);
        } else {
          REQUIRE(out.fill_mask[idx] == 1);
          REQUIRE(std::abs(int(out.voxels[idx]) - int(std::lround(num / den))) == 0);
        }
      }
}

TEST_CASE("label hole fill takes the nearest label") {
  Rng rng(45);
  const Volume v = sparse_volume(rng, true);
  const Volume out = hole_fill(v, 3);
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        const auto idx = v.index(i, j, k);
        if (v.fill_mask[idx]) continue;
        double best = 1e300;
        int label = -1;
        for (int c = 0; c < v.dims[2]; ++c)
          for (int b = 0; b < v.dims[1]; ++b)
            for (int a = 0; a < v.dims[0]; ++a) {
              if (std::max({std::abs(a - i), std::abs(b - j), std::abs(c - k)}) > 3) continue;
              const auto n = v.index(a, b, c);
              if (!v.fill_mask[n]) continue;
              const int d2 = (a - i) * (a - i) + (b - j) * (b - j) + (c - k) * (c - k);
              if (d2 < best) {
                best = d2;
                label = v.voxels[n];
              } else if (d2 == best) {
                label = std::max(label, int(v.voxels[n]));
              }
            }
        if (label < 0) {
          REQUIRE(out.fill_mask[idx] == 0);
        } else {
          REQUIRE(int(out.voxels[idx]) == label);
        }
      }
}

TEST_CASE("reconstruction is translation-equivariant") {
  PhantomSpec spec;
  spec.n_frames = 40;
  spec.tilt_deg = 12;
  spec.frame_width = spec.frame_height = 100;
  const Sweep sweep = generate_sweep(spec);
  FrameSequence moved = sweep.seq;
  const Eigen::Vector3d offset(0.4, -1.0, 0.6);  // whole voxels at 0.2 mm
  for (auto& p : moved.poses) p.translation += offset;
  const auto a = fdp_reconstruct(sweep.seq, {});
  const auto b = fdp_reconstruct(moved, {});
  CHECK(a.dims == b.dims);
  CHECK((b.origin - a.origin - offset).norm() < 1e-9);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differ += a.voxels[i] != b.voxels[i];
  CHECK(double(differ) <= 1e-3 * double(a.size()));
}

TEST_CASE("mask volumes") {
  PhantomSpec spec;
  spec.n_frames = 60;
  spec.frame_width = spec.frame_height = 100;
  const Sweep sweep = generate_sweep(spec);
  const auto labels = sweep.labels();

  std::vector<LabelRaster> zeros(labels.size(), LabelRaster(100, 100, 0));
  const auto empty = reconstruct_mask_volume(zeros, sweep.seq.poses, 0.1, {});
  for (auto v : empty.voxels) REQUIRE(v == 0);

  const auto vol = reconstruct_mask_volume(labels, sweep.seq.poses, 0.1, {});
  CHECK(vol.label_mode);
  for (auto v : vol.voxels) REQUIRE(v <= 2);

  // Interior slices: voxelized lumen area against the analytic disk.
  const double r = spec.lib_radius_mm;
  for (int k = 5; k < vol.dims[2] - 5; ++k) {
    std::size_t lumen = 0;
    for (int j = 0; j < vol.dims[1]; ++j)
      for (int i = 0; i < vol.dims[0]; ++i) lumen += vol.at(i, j, k) == kLumen;
    const double area = double(lumen) * vol.spacing * vol.spacing;
    REQUIRE(std::abs(area - std::numbers::pi * r * r) <= 2 * std::numbers::pi * r * vol.spacing);
  }

  LabelRaster bad(100, 100, 0);
  bad(3, 3) = 7;
  std::vector<LabelRaster> bads(labels.size(), bad);
  CHECK_THROWS_AS(reconstruct_mask_volume(bads, sweep.seq.poses, 0.1, {}), InvalidArgument);
}

TEST_CASE("pseudo volume equals the true volume for parallel equispaced frames") {
  PhantomSpec spec;
  spec.n_frames = 30;
  spec.frame_width = spec.frame_height = 90;
  const Sweep sweep = generate_sweep(spec);
  const auto truth = reconstruct(sweep.seq, {});
  const auto pseudo = stack_pseudo_volume(sweep.seq, {});
  CHECK(truth.same_grid(pseudo));
  CHECK(truth.voxels == pseudo.voxels);
  const auto poses = pseudo_stack_poses(sweep.seq);
  for (std::size_t i = 0; i < poses.size(); ++i) CHECK(test::pose_close(poses[i], sweep.seq.poses[i], 1e-9));
}

TEST_CASE("pseudo volume stretches a tilted sweep") {
  PhantomSpec spec;
  spec.n_frames = 40;
  spec.tilt_deg = 30;
  const Sweep sweep = generate_sweep(spec);
  const auto labels = sweep.labels();
  FrameSequence seq;
  for (std::size_t i = 0; i < labels.size(); ++i) seq.frames.push_back({labels[i], 0.1});
  seq.poses = sweep.seq.poses;

  ReconConfig cfg;
  cfg.label_mode = true;
  const auto truth = reconstruct(seq, cfg);
  const auto pseudo = stack_pseudo_volume(seq, cfg);
  auto mid_area = [](const Volume& v) {
    std::size_t n = 0;
    const int k = v.dims[2] / 2;
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) n += v.at(i, j, k) != 0;
    return double(n) * v.spacing * v.spacing;
  };
  const double disk = std::numbers::pi * spec.mab_radius_mm * spec.mab_radius_mm;
  CHECK(mid_area(truth) == Approx(disk).epsilon(0.05));
  // A tilted cross-section is an ellipse stretched by 1 / cos(tilt).
  CHECK(mid_area(pseudo) == Approx(disk / std::cos(30 * std::numbers::pi / 180)).epsilon(0.05));
}

TEST_CASE("reconstruction input validation") {
  FrameSequence seq = single(Raster<std::uint8_t>(4, 4), Pose::identity(), 0.1);
  seq.poses.push_back(Pose::identity());
  CHECK_THROWS_AS(fdp_reconstruct(seq, {}), InvalidArgument);
  seq.poses.pop_back();
  CHECK_THROWS_AS(fdp_reconstruct(seq, {0.0, 3, false}), InvalidArgument);
  CHECK_THROWS_AS(fdp_reconstruct(seq, {0.2, -1, false}), InvalidArgument);
  CHECK_THROWS_AS(stack_pseudo_volume(seq, {}), InvalidArgument);
  FrameSequence huge = single(Raster<std::uint8_t>(4, 4), Pose::identity(), 1e4);
  CHECK_THROWS_AS(fdp_reconstruct(huge, {1e-3, 0, false}), InvalidArgument);
}
