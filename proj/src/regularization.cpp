#include "carotid3d/regularization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace carotid {
namespace {

constexpr double kHuberKnee = 1.0 / std::numbers::sqrt2;

void require_same_length(std::span<const Pose> x, std::span<const Pose> p) {
  if (x.size() != p.size()) {
    throw InvalidArgument("pose sequences differ in length: " + std::to_string(x.size()) +
                          " vs " + std::to_string(p.size()));
  }
}

// Distance left between the two arguments after the proximal step, where the
// remaining distance r solves  step * h'(r) = (s - r) / share.
// share = 1 for a one-sided pull, 2 when both endpoints move.
double prox_remaining(double s, double step, double share) {
  const double quadratic = s / (1.0 + 2.0 * share * step);
  if (quadratic < kHuberKnee) return quadratic;
  return s - share * step * std::numbers::sqrt2;
}

}  // namespace

void RegConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be > 0");
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw InvalidArgument("lambda0 must be > 0");
  if (n_cycles < 1) throw InvalidArgument("n_cycles must be >= 1");
  if (!(tol >= 0.0)) throw InvalidArgument("tol must be >= 0");
  weights.validate();
}

double data_term(std::span<const Pose> x, std::span<const Pose> p, const MetricWeights& w) {
  require_same_length(x, p);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += huber(geodesic_distance(x[i], p[i], w));
  return sum;
}

double reg_term(std::span<const Pose> x, const MetricWeights& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    sum += huber(geodesic_distance(x[i], x[i + 1], w));
  }
  return sum;
}

double tv_objective(std::span<const Pose> x, std::span<const Pose> p, const RegConfig& cfg) {
  return data_term(x, p, cfg.weights) + cfg.alpha * reg_term(x, cfg.weights);
}

Pose prox_data(const Pose& x, const Pose& target, double step, const MetricWeights& w) {
  if (!(step > 0.0)) throw InvalidArgument("proximal step must be > 0");
  const double s = geodesic_distance(x, target, w);
  if (s == 0.0) return x;
  const double r = prox_remaining(s, step, 1.0);
  const double t = std::clamp((s - r) / s, 0.0, 1.0);
  return geodesic_interpolate(x, target, t);
}

std::pair<Pose, Pose> prox_pair(const Pose& xi, const Pose& xj, double step,
                                const MetricWeights& w) {
  if (!(step > 0.0)) throw InvalidArgument("proximal step must be > 0");
  const double s = geodesic_distance(xi, xj, w);
  if (s == 0.0) return {xi, xj};
  const double r = prox_remaining(s, step, 2.0);
  const double t = std::clamp(0.5 * (s - r) / s, 0.0, 0.5);
  return {geodesic_interpolate(xi, xj, t), geodesic_interpolate(xi, xj, 1.0 - t)};
}

DenoiseResult cppa_denoise(std::span<const Pose> p, const RegConfig& cfg,
                           std::span<const Pose> init) {
  cfg.validate();
  if (p.size() < 2) throw InvalidArgument("cppa_denoise needs at least 2 poses");
  if (!init.empty()) require_same_length(init, p);
  for (const Pose& pose : p) {
    if (!pose.is_finite()) throw InvalidArgument("pose sequence contains non-finite values");
  }

  DenoiseResult result;
  result.initial_objective = tv_objective(p, p, cfg);

  PoseSequence x(init.empty() ? p.begin() : init.begin(), init.empty() ? p.end() : init.end());
  double current = tv_objective(x, p, cfg);
  PoseSequence best = x;
  double best_objective = current;
  if (result.initial_objective < best_objective) {
    best.assign(p.begin(), p.end());
    best_objective = result.initial_objective;
  }

  const std::size_t n = x.size();
  for (int cycle = 0; cycle < cfg.n_cycles; ++cycle) {
    const double step = cfg.lambda0 / static_cast<double>(cycle + 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = prox_data(x[i], p[i], step, cfg.weights);
    // Pairs within one parity sweep are disjoint.
    for (std::size_t parity = 0; parity < 2; ++parity) {
      for (std::size_t i = parity; i + 1 < n; i += 2) {
        std::tie(x[i], x[i + 1]) = prox_pair(x[i], x[i + 1], step * cfg.alpha, cfg.weights);
      }
    }
    const double previous = current;
    current = tv_objective(x, p, cfg);
    result.cycles = cycle + 1;
    if (current < best_objective) {
      best = x;
      best_objective = current;
    }
    if (std::abs(previous - current) <= cfg.tol * std::max(1.0, std::abs(previous))) break;
  }

  result.poses = std::move(best);
  result.final_objective = best_objective;
  return result;
}

RerankResult rerank(std::span<const Eigen::Vector3d> centroids) {
  const std::size_t n = centroids.size();
  if (n < 3) throw InvalidArgument("rerank needs at least 3 centroids");

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& c : centroids) {
    if (!c.allFinite()) throw InvalidArgument("centroid contains non-finite values");
    mean += c;
  }
  mean /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& c : centroids) {
    const Eigen::Vector3d d = c - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) throw DomainError("PCA of centroids failed");
  // Eigenvalues are sorted ascending.
  if (!(solver.eigenvalues()(2) > 1e-12)) {
    throw DomainError("no principal direction: centroids are coincident");
  }

  RerankResult result;
  result.axis = solver.eigenvectors().col(2).normalized();
  result.projections.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.projections[i] = result.axis.dot(centroids[i] - mean);

  const double mid = 0.5 * static_cast<double>(n - 1);
  double trend = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    trend += result.projections[i] * (static_cast<double>(i) - mid);
  }
  if (trend < 0.0 || (trend == 0.0 && result.projections.back() < result.projections.front())) {
    result.axis = -result.axis;
    for (double& v : result.projections) v = -v;
  }

  result.permutation.resize(n);
  std::iota(result.permutation.begin(), result.permutation.end(), std::size_t{0});
  std::stable_sort(result.permutation.begin(), result.permutation.end(),
                   [&](std::size_t a, std::size_t b) {
                     return result.projections[a] < result.projections[b];
                   });
  return result;
}

}  // namespace carotid
