#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "carotid3d/raster.hpp"

namespace carotid {

using Point2 = Eigen::Vector2d;

/// Dice similarity 2|P n L| / (|P| + |L|); 1 when both masks are empty.
double dsc(const Mask& prediction, const Mask& reference);

/// Foreground pixels with at least one 8-neighbour in the background (or
/// beyond the raster edge), as (x, y) * spacing.
std::vector<Point2> boundary_points(const Mask& mask, double spacing = 1.0);

/// Symmetric Hausdorff distance. Throws InvalidArgument on an empty set.
double hausdorff(std::span<const Point2> a, std::span<const Point2> b);

/// Larger of the two 95th percentiles (linear interpolation between order
/// statistics) of the directed nearest-neighbour distances.
double hd95(std::span<const Point2> a, std::span<const Point2> b);

/// Distances from every point of `from` to its nearest point in `to`.
std::vector<double> nearest_distances(std::span<const Point2> from, std::span<const Point2> to);

/// Linear-interpolation percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

struct Contingency {
  std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
};

struct Rates {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
};

/// Throws InvalidArgument on negative counts or a zero denominator.
Rates classification_rates(const Contingency& c);

struct AbsDifference {
  double mad = 0.0;  // mean |a_i - b_i|
  double sd = 0.0;   // population standard deviation of |a_i - b_i|
};

AbsDifference mad(std::span<const double> a, std::span<const double> b);

/// Sample correlation coefficient. Throws DomainError when either series is
/// constant.
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace carotid
