#include "doctest.h"

#include <cmath>
#include <numbers>

#include "carotid3d/analysis.hpp"
#include "carotid3d/phantom.hpp"
#include "support.hpp"

using namespace carotid;
using doctest::Approx;

namespace {

// Label volume whose z-slices are the given label rasters.
Volume stack(const std::vector<LabelRaster>& slices, double spacing) {
  Volume v = Volume::make(Eigen::Vector3d::Zero(), spacing,
                          {slices[0].width(), slices[0].height(), int(slices.size())}, true);
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        v.voxels[v.index(i, j, k)] = slices[std::size_t(k)](i, j);
        v.fill_mask[v.index(i, j, k)] = 1;
      }
  return v;
}

LabelRaster annulus(int size, double R, double r, double ex = 0, double ey = 0) {
  const double c = 0.5 * (size - 1);
  return to_labels({test::disk(size, size, c, c, R), test::disk(size, size, c + ex, c + ey, r)});
}

Mask rotate90(const Mask& m) {
  Mask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out(m.height() - 1 - y, x) = m(x, y);
  return out;
}

}  // namespace

TEST_CASE("slice centroid") {
  Mask m(20, 20);
  CHECK_FALSE(slice_centroid(m).has_value());
  m(10, 10) = 1;
  CHECK((*slice_centroid(m) - Eigen::Vector2d(10, 10)).norm() == 0.0);
  const Mask d = test::disk(40, 40, 17.3, 21.6, 9);
  CHECK((*slice_centroid(d) - Eigen::Vector2d(17.3, 21.6)).norm() < 0.5);
  CHECK((*slice_centroid(d, 0.1) - *slice_centroid(d) * 0.1).norm() < 1e-12);
}

TEST_CASE("largest component") {
  Mask m(12, 6);
  m(0, 0) = 1;
  m(1, 1) = 1;  // diagonal neighbour: same component
  for (int x = 5; x < 10; ++x) m(x, 3) = 1;
  const auto [big, count] = largest_component(m);
  CHECK(count == 2);
  CHECK(big(7, 3) == 1);
  CHECK(big(0, 0) == 0);
  CHECK(largest_component(Mask(3, 3)).second == 0);
}

TEST_CASE("stenosis of simple shapes") {
  // Concentric 5 mm / 4 mm at 0.1 mm pixels.
  const Mask mab = test::disk(121, 121, 60, 60, 50);
  const Mask lib = test::disk(121, 121, 60, 60, 40);
  const auto m = stenosis_diameter(mab, lib, 0.1);
  CHECK(std::abs(m.stenosis - 0.2) <= 0.005);
  CHECK(m.mab_length_mm == Approx(10.0).epsilon(0.02));

  CHECK(stenosis_diameter(mab, mab, 0.1).stenosis == 0.0);
  CHECK(stenosis_diameter(mab, Mask(121, 121), 0.1).stenosis == 1.0);

  CHECK_THROWS_AS(stenosis_diameter(Mask(5, 5), Mask(5, 5), 0.1), InvalidArgument);
  CHECK_THROWS_AS(stenosis_diameter(lib, mab, 0.1), InvalidArgument);
  CHECK_THROWS_AS(stenosis_diameter(mab, Mask(3, 3), 0.1), InvalidArgument);
}

TEST_CASE("stenosis matches the exhaustive chord oracle") {
  Rng rng(51);
  for (int trial = 0; trial < 50; ++trial) {
    const int size = 12 + int(20 * rng.uniform());
    const double c = 0.5 * (size - 1);
    const double R = 3 + (0.5 * size - 4) * rng.uniform();
    const double r = 1 + (R - 1.5) * rng.uniform();
    const double e = (R - r) * rng.uniform();
    const double phi = 2 * std::numbers::pi * rng.uniform();
    const Mask mab = test::disk(size, size, c, c, R);
    Mask lib = test::disk(size, size, c + e * std::cos(phi), c + e * std::sin(phi), r);
    for (std::size_t i = 0; i < lib.size(); ++i) lib.data()[i] &= mab.data()[i];
    const double s = stenosis_diameter(mab, lib, 0.2).stenosis;
    REQUIRE(std::abs(s - test::brute_force_stenosis(mab, lib)) <= 0.02);
  }
}

TEST_CASE("stenosis is scale- and rotation-consistent") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const double R = 6 + 6 * rng.uniform();
    const double r = 2 + (R - 3) * rng.uniform();
    const auto labels = annulus(32, R, r, (R - r) * rng.uniform(), 0);
    const auto masks = from_labels(labels);
    const double s = stenosis_diameter(masks.mab, masks.lib, 0.1).stenosis;
    CHECK(stenosis_diameter(masks.mab, masks.lib, 0.37).stenosis == s);
    const double rotated = stenosis_diameter(rotate90(masks.mab), rotate90(masks.lib), 0.1).stenosis;
    CHECK(std::abs(rotated - s) <= 0.02);
  }
}

TEST_CASE("grade is the maximum of per-slice chord searches") {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<LabelRaster> slices;
    const int n = 3 + int(6 * rng.uniform());
    for (int k = 0; k < n; ++k) {
      const double R = 5 + 9 * rng.uniform();
      const double r = 1 + (R - 2) * rng.uniform();
      slices.push_back(annulus(32, R, r, (R - r) * rng.uniform(), 0));
    }
    slices.push_back(LabelRaster(32, 32, 0));  // no vessel
    const auto report = stenosis_grade(stack(slices, 0.2));
    double best = -1;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < slices.size(); ++k) {
      const auto m = from_labels(slices[k]);
      if (!report.per_slice[k]) continue;
      const double s = stenosis_diameter(m.mab, m.lib, 0.2).stenosis;
      REQUIRE(*report.per_slice[k] == s);
      if (s > best) {
        best = s;
        arg = k;
      }
    }
    CHECK_FALSE(report.per_slice.back().has_value());
    CHECK(report.grade == best);
    CHECK(report.argmax_slice == arg);
  }
  CHECK_THROWS_AS(stenosis_grade(stack({LabelRaster(8, 8, 0)}, 0.2)), DomainError);
}

TEST_CASE("bifurcations are flagged and the larger branch measured") {
  LabelRaster two(40, 20, 0), big(40, 20, 0);
  const auto left = annulus(20, 8, 5);
  const auto right = annulus(20, 4, 2);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      big(x, y) = two(x, y) = left(x, y);
      two(x + 20, y) = right(x, y);
    }
  const auto report = stenosis_grade(stack({two, big}, 0.2));
  CHECK(report.bifurcation_slices == std::vector<std::size_t>{0});
  CHECK(*report.per_slice[0] == *report.per_slice[1]);
}

TEST_CASE("wall thickness profiles") {
  const Mask mab = test::disk(121, 121, 60, 60, 50);
  const Mask lib = test::disk(121, 121, 60, 60, 40);
  for (double t : wall_thickness_profile(mab, lib, 0.1)) CHECK(t == Approx(1.0).epsilon(0.11));
  for (double t : wall_thickness_profile(mab, mab, 0.1)) CHECK(t == 0.0);

  // Lumen pushed toward -y: the wall is thickest along the y axis (90 deg).
  const Mask shifted = test::disk(121, 121, 60, 50, 40);
  const auto profile = wall_thickness_profile(mab, shifted, 0.1);
  const double peak = *std::max_element(profile.begin(), profile.end());
  CHECK(peak == Approx(2.0).epsilon(0.06));
  CHECK(profile[90] >= peak - 0.05);
  CHECK(profile[0] < peak - 0.5);
}

TEST_CASE("plaque flags use a strict threshold") {
  std::vector<std::vector<double>> profiles{{1.0, 1.0}, {1.6}, {1.5}, {}};
  const auto flags = detect_plaque_slices(profiles);
  CHECK(flags == std::vector<bool>{false, true, false, false});
  CHECK(detect_plaque_slices(profiles, 0.5) == std::vector<bool>{true, true, true, false});
}

TEST_CASE("scan diagnosis examples") {
  CHECK(scan_diagnosis({false, true, true, true, true, true, false}).diseased);
  CHECK_FALSE(scan_diagnosis({true, true, true, true, false, true, true, true, true}).diseased);
  CHECK_FALSE(scan_diagnosis(std::vector<bool>(20, false)).diseased);
  CHECK_FALSE(scan_diagnosis({}).diseased);
  CHECK(scan_diagnosis({true}, 1).diseased);
  CHECK_THROWS_AS(scan_diagnosis({true}, 0), InvalidArgument);
}

TEST_CASE("scan diagnosis agrees with a window scanner and is monotone") {
  for (std::size_t len = 0; len <= 10; ++len) {
    for (unsigned bits = 0; bits < (1u << len); ++bits) {
      std::vector<bool> flags(len);
      for (std::size_t i = 0; i < len; ++i) flags[i] = (bits >> i) & 1u;
      for (std::size_t k : {1u, 3u, 5u}) {
        const bool d = scan_diagnosis(flags, k).diseased;
        REQUIRE(d == test::brute_force_has_run(flags, k));
        if (d) {
          for (std::size_t i = 0; i < len; ++i) {
            auto more = flags;
            more[i] = true;
            REQUIRE(scan_diagnosis(more, k).diseased);
          }
        }
      }
    }
  }
}

TEST_CASE("plaque size") {
  CHECK(plaque_size(std::vector<bool>(10, false), {}, 0.2).length_mm == 0.0);
  std::vector<bool> flags(80, false);
  std::vector<std::vector<double>> profiles(80, std::vector<double>{1.0});
  for (int i = 10; i < 60; ++i) {
    flags[std::size_t(i)] = true;
    profiles[std::size_t(i)] = {2.0, i == 30 ? 3.0 : 2.5};
  }
  flags[70] = flags[71] = true;
  const auto m = plaque_size(flags, profiles, 0.2);
  CHECK(m.length_mm == Approx(10.0));
  CHECK(m.thickness_mm == Approx(3.0));
  CHECK(m.runs.size() == 2);
  CHECK(m.longest->first_slice == 10);
  CHECK(m.longest->last_slice == 59);
  CHECK_THROWS_AS(plaque_size(flags, profiles, 0.0), InvalidArgument);
}

TEST_CASE("centroid path and longitudinal cuts of a straight tube") {
  std::vector<LabelRaster> slices(12, annulus(41, 15, 11));
  slices[0] = LabelRaster(41, 41, 0);
  const Volume labels = stack(slices, 0.2);
  const auto path = centroid_path(labels);
  CHECK(path.valid_count() == 11);
  CHECK_FALSE(path.valid[0]);
  CHECK((path.points[5] - Eigen::Vector3d(4, 4, 1.0)).norm() < 1e-9);

  // Intensity volume: wall bright, lumen dark.
  Volume vol = labels;
  vol.label_mode = false;
  for (auto& v : vol.voxels) v = v == kWall ? 200 : v == kLumen ? 20 : 90;

  const auto cut = cut_longitudinal(vol, path, 0.0, 8.0, 0.2);
  CHECK(cut.image.width() == 12);
  CHECK(cut.image.height() == 41);
  // Column 0 has no centroid.
  for (int r = 0; r < 41; ++r) CHECK(cut.image(0, r) == 0);
  // Every column is the same symmetric profile: lumen centred, two wall bands.
  for (int k = 1; k < 12; ++k) {
    for (int r = 0; r < 41; ++r) {
      REQUIRE(cut.image(k, r) == cut.image(1, r));
      REQUIRE(cut.image(k, r) == cut.image(k, 40 - r));
    }
  }
  CHECK(cut.image(5, 20) == 20);
  CHECK(cut.image(5, 20 - 13) == 200);
  CHECK(cut.image(5, 20 + 13) == 200);
  CHECK(cut.image(5, 0) == 90);

  // theta and -theta mirror each other on this mirror-symmetric volume.
  for (double th : {15.0, 30.0, 45.0}) {
    const auto plus = cut_longitudinal(vol, path, th, 8.0, 0.2);
    const auto minus = cut_longitudinal(vol, path, -th, 8.0, 0.2);
    REQUIRE(plus.image == minus.image);
  }
  // Rotational symmetry holds up to the disk's pixel boundary.
  const auto c15 = cut_longitudinal(vol, path, 15.0, 8.0, 0.2);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < cut.image.size(); ++i) differ += cut.image.data()[i] != c15.image.data()[i];
  CHECK(double(differ) <= 0.15 * double(cut.image.size()));

  CHECK_THROWS_AS(cut_longitudinal(vol, path, 90.0), InvalidArgument);
  CHECK_THROWS_AS(cut_longitudinal(vol, path, -90.5), InvalidArgument);
  CHECK_NOTHROW(cut_longitudinal(vol, path, -90.0));
}

TEST_CASE("phantom bump: thickness peaks toward the plaque") {
  PhantomSpec spec;
  spec.n_frames = 2;
  spec.length_mm = 10;
  spec.frame_pitch_mm = 0.2;
  spec.bump = Bump{5.0, 20.0, 2.0};
  const Sweep sweep = generate_sweep(spec);
  const auto& m = sweep.masks[0];
  const auto profile = wall_thickness_profile(m.mab, m.lib, 0.1);
  const double peak = *std::max_element(profile.begin(), profile.end());
  CHECK(peak == Approx(spec.designed_thickness(5.0)).epsilon(0.05));
  CHECK(profile[90] >= peak - 0.05);
  CHECK(profile[0] < peak - 0.5);
}
