#include "carotid3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "carotid3d/error.hpp"

namespace carotid {
namespace {

void require_non_empty(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("point sets must be non-empty");
}

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InvalidArgument("series lengths differ: " + std::to_string(a) + " vs " +
                          std::to_string(b));
  }
}

// Directed Hausdorff distance with early break: an inner scan stops as soon
// as it finds a point closer than the running maximum.
double directed_hausdorff(std::span<const Point2> from, std::span<const Point2> to) {
  double cmax = 0.0;
  for (const Point2& p : from) {
    double cmin = std::numeric_limits<double>::infinity();
    for (const Point2& q : to) {
      const double d = (p - q).norm();
      if (d < cmax) {
        cmin = d;
        break;
      }
      cmin = std::min(cmin, d);
    }
    cmax = std::max(cmax, cmin);
  }
  return cmax;
}

}  // namespace

double dsc(const Mask& prediction, const Mask& reference) {
  if (!prediction.same_shape(reference)) throw InvalidArgument("masks differ in shape");
  std::size_t inter = 0, np = 0, nl = 0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const bool p = prediction.data()[i] != 0;
    const bool l = reference.data()[i] != 0;
    np += p;
    nl += l;
    inter += p && l;
  }
  if (np + nl == 0) return 1.0;
  return 2.0 * double(inter) / double(np + nl);
}

std::vector<Point2> boundary_points(const Mask& mask, double spacing) {
  std::vector<Point2> points;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy) {
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          const int nx = x + dx, ny = y + dy;
          edge = !mask.contains(nx, ny) || !mask(nx, ny);
        }
      }
      if (edge) points.emplace_back(x * spacing, y * spacing);
    }
  }
  return points;
}

double hausdorff(std::span<const Point2> a, std::span<const Point2> b) {
  require_non_empty(a, b);
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

std::vector<double> nearest_distances(std::span<const Point2> from, std::span<const Point2> to) {
  require_non_empty(from, to);
  std::vector<double> out;
  out.reserve(from.size());
  for (const Point2& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& q : to) best = std::min(best, (p - q).norm());
    out.push_back(best);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double hd95(std::span<const Point2> a, std::span<const Point2> b) {
  require_non_empty(a, b);
  return std::max(percentile(nearest_distances(a, b), 95.0),
                  percentile(nearest_distances(b, a), 95.0));
}

Rates classification_rates(const Contingency& c) {
  if (c.tp < 0 || c.fn < 0 || c.fp < 0 || c.tn < 0) {
    throw InvalidArgument("contingency counts must be non-negative");
  }
  const auto pos = c.tp + c.fn;
  const auto neg = c.tn + c.fp;
  if (pos == 0) throw InvalidArgument("sensitivity undefined: tp + fn = 0");
  if (neg == 0) throw InvalidArgument("specificity undefined: tn + fp = 0");
  return {double(c.tp) / double(pos), double(c.tn) / double(neg),
          double(c.tp + c.tn) / double(pos + neg)};
}

AbsDifference mad(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size());
  if (a.empty()) throw InvalidArgument("series must be non-empty");
  const double n = double(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  AbsDifference out;
  out.mad = sum / n;
  double var = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]) - out.mad;
    var += d * d;
  }
  out.sd = std::sqrt(var / n);
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size());
  if (a.size() < 2) throw InvalidArgument("correlation needs at least 2 pairs");
  auto constant = [](std::span<const double> s) {
    return std::all_of(s.begin(), s.end(), [&](double v) { return v == s.front(); });
  };
  if (constant(a) || constant(b)) {
    throw DomainError("correlation undefined for a constant series");
  }
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace carotid
