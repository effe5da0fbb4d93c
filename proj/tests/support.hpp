#pragma once

// Helpers and brute-force oracles shared by the test binaries. The oracles
// are deliberately written without the library's algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "carotid3d/phantom.hpp"
#include "carotid3d/pose.hpp"
#include "carotid3d/raster.hpp"

namespace carotid::test {

inline Pose random_pose(Rng& rng, double max_trans, double max_angle) {
  Eigen::Vector3d axis;
  do {
    axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (axis.norm() < 1e-6);
  const double angle = max_angle * rng.uniform();
  const Eigen::Vector3d t = max_trans * Eigen::Vector3d(2 * rng.uniform() - 1, 2 * rng.uniform() - 1,
                                                        2 * rng.uniform() - 1);
  return {Rotation::from_axis_angle(axis.normalized(), angle), t};
}

inline bool pose_close(const Pose& a, const Pose& b, double tol) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff() <= tol;
}

inline Eigen::Vector2d mask_centroid(const Mask& m) {
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  int n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(x, y)) {
        s += Eigen::Vector2d(x, y);
        ++n;
      }
    }
  }
  return s / n;
}

// Strip-averaged length of the line c + t u inside the mask: pixels within
// distance h of the line contribute (1 - d / h) / h each.
inline double strip_length(const Mask& m, Eigen::Vector2d c, Eigen::Vector2d u, double h = 3.0) {
  double total = 0.0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      const Eigen::Vector2d p(x - c.x(), y - c.y());
      const double d = std::abs(p.x() * u.y() - p.y() * u.x());
      if (d < h) total += (1.0 - d / h) / h;
    }
  }
  return total;
}

// Exhaustive chord search through the MAB centroid: 1-degree steps, every
// direction toward a MAB pixel centre, and every direction between two
// boundary pixels. Returns max (L_mab - L_lib) / L_mab.
inline double brute_force_stenosis(const Mask& mab, const Mask& lib) {
  const Eigen::Vector2d c = mask_centroid(mab);
  std::vector<Eigen::Vector2d> dirs, edge;
  for (int a = 0; a < 180; ++a) {
    const double phi = a * std::numbers::pi / 180.0;
    dirs.emplace_back(std::cos(phi), std::sin(phi));
  }
  for (int y = 0; y < mab.height(); ++y) {
    for (int x = 0; x < mab.width(); ++x) {
      if (!mab(x, y)) continue;
      const Eigen::Vector2d d = Eigen::Vector2d(x, y) - c;
      if (d.norm() > 1e-9) dirs.push_back(d.normalized());
      bool boundary = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          boundary = boundary || !mab.contains(x + dx, y + dy) || !mab(x + dx, y + dy);
      if (boundary) edge.emplace_back(x, y);
    }
  }
  for (std::size_t i = 0; i < edge.size(); ++i)
    for (std::size_t j = i + 1; j < edge.size(); ++j) dirs.push_back((edge[j] - edge[i]).normalized());

  double best = 0.0;
  for (const auto& u : dirs) {
    const double lm = strip_length(mab, c, u);
    if (lm <= 0.0) continue;
    best = std::max(best, (lm - strip_length(lib, c, u)) / lm);
  }
  return best;
}

// Any window of k consecutive true values?
inline bool brute_force_has_run(const std::vector<bool>& flags, std::size_t k) {
  for (std::size_t start = 0; start + k <= flags.size(); ++start) {
    bool all = true;
    for (std::size_t j = start; j < start + k; ++j) all = all && flags[j];
    if (all) return true;
  }
  return false;
}

inline double brute_force_dsc(const Mask& a, const Mask& b) {
  long both = 0, na = 0, nb = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      na += a(x, y) != 0;
      nb += b(x, y) != 0;
      both += a(x, y) && b(x, y);
    }
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

// Foreground pixels touching background or the border in the 8-neighbourhood.
inline std::vector<Eigen::Vector2d> brute_force_boundary(const Mask& m) {
  std::vector<Eigen::Vector2d> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height() || !m(nx, ny)) edge = true;
        }
      }
      if (edge) out.emplace_back(x, y);
    }
  }
  return out;
}

// Directed distances by double loop, sorted; percentile by the inclusive
// linear rule on the sorted list.
inline double brute_force_directed_percentile(const std::vector<Eigen::Vector2d>& a,
                                              const std::vector<Eigen::Vector2d>& b, double q) {
  std::vector<double> d;
  for (const auto& p : a) {
    double best = 1e300;
    for (const auto& r : b) best = std::min(best, (p - r).norm());
    d.push_back(best);
  }
  std::sort(d.begin(), d.end());
  const double pos = q / 100.0 * double(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, d.size() - 1);
  return d[lo] + (pos - double(lo)) * (d[hi] - d[lo]);
}

inline double brute_force_hd95(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b) {
  return std::max(brute_force_directed_percentile(a, b, 95.0), brute_force_directed_percentile(b, a, 95.0));
}

inline double brute_force_hausdorff(const std::vector<Eigen::Vector2d>& a,
                                    const std::vector<Eigen::Vector2d>& b) {
  return std::max(brute_force_directed_percentile(a, b, 100.0), brute_force_directed_percentile(b, a, 100.0));
}

inline Mask random_mask(Rng& rng, int w, int h, double p) {
  Mask m(w, h);
  for (auto& v : m.data()) v = rng.uniform() < p ? 1 : 0;
  return m;
}

inline Mask disk(int w, int h, double cx, double cy, double r) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(x, y) = std::hypot(x - cx, y - cy) <= r ? 1 : 0;
  }
  return m;
}

// Fresh empty directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("carotid3d_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace carotid::test
