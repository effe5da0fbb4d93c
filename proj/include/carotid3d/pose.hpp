#pragma once

// Rigid-transform algebra on SE(3) for tracked probe poses.
//
// Rotations are unit quaternions canonicalized to w >= 0, translations are in
// millimetres. Geodesics use the product structure SO(3) x R^3 (slerp on the
// rotation, lerp on the translation); the coupled SE(3) exponential and
// logarithm are provided separately for tangent-space I/O.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace carotid {

class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  /// Normalizes and canonicalizes the input. Throws InvalidArgument on a
  /// zero or non-finite quaternion.
  explicit Rotation(const Eigen::Quaterniond& q);
  Rotation(double w, double x, double y, double z)
      : Rotation(Eigen::Quaterniond(w, x, y, z)) {}

  static Rotation identity() { return {}; }
  static Rotation from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);
  /// Exponential map of so(3): rotation vector (axis * angle) to rotation.
  static Rotation exp(const Eigen::Vector3d& rotation_vector);

  /// Rotation vector with norm in [0, pi].
  [[nodiscard]] Eigen::Vector3d log() const;
  /// Rotation angle in [0, pi].
  [[nodiscard]] double angle() const;

  [[nodiscard]] const Eigen::Quaterniond& quaternion() const { return q_; }
  [[nodiscard]] Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }
  [[nodiscard]] Eigen::Vector3d rotate(const Eigen::Vector3d& v) const { return q_ * v; }
  [[nodiscard]] Rotation inverse() const;

  Rotation operator*(const Rotation& other) const;

 private:
  Eigen::Quaterniond q_;
};

/// Element of SE(3): x -> R x + t.
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) { return {Rotation{}, t}; }

  [[nodiscard]] Eigen::Vector3d transform(const Eigen::Vector3d& point) const {
    return rotation.rotate(point) + translation;
  }
  /// Homogeneous 4x4 form.
  [[nodiscard]] Eigen::Matrix4d matrix() const;
  [[nodiscard]] bool is_finite() const;
};

/// Tangent vector of SE(3): translational part rho (mm) and rotational part
/// phi (axis * angle, radians).
struct Twist {
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();
};

/// Weighting of the product metric on SO(3) x R^3. The defaults make a
/// 0.1 rad rotation cost the same as a 1 mm translation.
struct MetricWeights {
  double w_trans = 1.0;  // mm^-1
  double w_rot = 10.0;   // rad^-1

  void validate() const;
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

Twist log_map(const Pose& p);
Pose exp_map(const Twist& v);

/// SO(3) geodesic angle between two rotations, in [0, pi].
double rotation_distance(const Rotation& a, const Rotation& b);

/// sqrt(w_trans^2 |t_a - t_b|^2 + w_rot^2 theta^2), theta the angle of a^-1 b.
double geodesic_distance(const Pose& a, const Pose& b, const MetricWeights& w = {});

/// Point at fraction t along the product-metric geodesic from a to b.
/// Throws InvalidArgument unless 0 <= t <= 1.
Pose geodesic_interpolate(const Pose& a, const Pose& b, double t);

/// Huber norm: s^2 below 1/sqrt(2), sqrt(2) s - 1/2 above. Throws on s < 0.
double huber(double s);

}  // namespace carotid
