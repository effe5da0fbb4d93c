#pragma once

// Total-variation denoising of a pose trajectory and the centroid-based
// re-rank that repairs out-of-order frames.
//
// The objective is
//
//   E(x) = sum_i h(d(x_i, p_i)) + alpha * sum_i h(d(x_i, x_{i+1}))
//
// with h the Huber norm and d the product-metric geodesic distance. It is
// minimized by a cyclic proximal point algorithm: every summand's proximal
// map has a closed form along the geodesic joining its arguments.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "carotid3d/error.hpp"
#include "carotid3d/pose.hpp"

namespace carotid {

using PoseSequence = std::vector<Pose>;

struct RegConfig {
  double alpha = 0.5;
  double lambda0 = 1.0;  // step at cycle n is lambda0 / (n + 1)
  int n_cycles = 200;
  MetricWeights weights;
  double tol = 1e-8;  // stop once the relative objective change drops below

  void validate() const;
};

double data_term(std::span<const Pose> x, std::span<const Pose> p, const MetricWeights& w);
double reg_term(std::span<const Pose> x, const MetricWeights& w);
double tv_objective(std::span<const Pose> x, std::span<const Pose> p, const RegConfig& cfg);

/// Proximal map of step * h(d(., target)) evaluated at x. The result lies on
/// the geodesic from x to target and never passes target.
Pose prox_data(const Pose& x, const Pose& target, double step, const MetricWeights& w);

/// Proximal map of step * h(d(., .)) on a pair: both poses move the same
/// distance toward each other along their geodesic, meeting at most at the
/// midpoint.
std::pair<Pose, Pose> prox_pair(const Pose& xi, const Pose& xj, double step,
                                const MetricWeights& w);

struct DenoiseResult {
  PoseSequence poses;
  double initial_objective = 0.0;  // E(p)
  double final_objective = 0.0;    // E(poses)
  int cycles = 0;
};

/// Cyclic proximal point minimization of E starting from `init` (defaults to
/// p). The returned poses are the best iterate seen, so E never exceeds E(init)
/// or E(p).
DenoiseResult cppa_denoise(std::span<const Pose> p, const RegConfig& cfg,
                           std::span<const Pose> init = {});

struct RerankResult {
  std::vector<std::size_t> permutation;  // permutation[k] = source index of k-th output
  std::vector<double> projections;       // per input frame, mm along axis
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

/// Orders frames by the signed projection of their (world) centroids onto the
/// first principal axis. The axis is oriented so the projection grows with
/// acquisition index; ties keep acquisition order. Throws DomainError when
/// the centroids have no principal direction.
RerankResult rerank(std::span<const Eigen::Vector3d> centroids);

template <typename T>
std::vector<T> apply_permutation(std::span<const T> items, std::span<const std::size_t> perm) {
  if (items.size() != perm.size()) {
    throw InvalidArgument("permutation length does not match sequence length");
  }
  std::vector<T> out;
  out.reserve(items.size());
  for (std::size_t src : perm) out.push_back(items[src]);
  return out;
}

}  // namespace carotid
