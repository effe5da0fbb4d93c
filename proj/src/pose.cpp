#include "carotid3d/pose.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "carotid3d/error.hpp"

namespace carotid {
namespace {

constexpr double kSmallAngle = 1e-6;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

// Left Jacobian of SO(3); maps rho to the translation in exp_map.
Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  double b, c;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    b = 0.5 - t2 / 24.0;
    c = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t2 = theta * theta;
    b = (1.0 - std::cos(theta)) / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }
  return Eigen::Matrix3d::Identity() + b * k + c * k * k;
}

Eigen::Matrix3d left_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  double c;
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    // (1 - (theta/2) cot(theta/2)) / theta^2 stays finite up to theta = pi.
    const double half = 0.5 * theta;
    c = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  }
  return Eigen::Matrix3d::Identity() - 0.5 * k + c * k * k;
}

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

}  // namespace

Rotation::Rotation(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || n == 0.0) {
    throw InvalidArgument("rotation quaternion must be finite and non-zero");
  }
  q_ = canonical(q);
}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw InvalidArgument("rotation axis must be non-zero");
  return exp(axis / n * angle_rad);
}

Rotation Rotation::exp(const Eigen::Vector3d& rotation_vector) {
  const double theta = rotation_vector.norm();
  double scale;  // sin(theta/2) / theta
  if (theta < kSmallAngle) {
    scale = 0.5 - theta * theta / 48.0;
  } else {
    scale = std::sin(0.5 * theta) / theta;
  }
  Eigen::Quaterniond q;
  q.w() = std::cos(0.5 * theta);
  q.vec() = scale * rotation_vector;
  return Rotation(q);
}

Eigen::Vector3d Rotation::log() const {
  const Eigen::Vector3d v = q_.vec();
  const double n = v.norm();
  const double w = q_.w();  // >= 0 by canonicalization
  if (n < kSmallAngle) {
    // theta / sin(theta/2) ~ 2/w (1 - n^2 / (3 w^2))
    return (2.0 / w - 2.0 * n * n / (3.0 * w * w * w)) * v;
  }
  const double theta = 2.0 * std::atan2(n, w);
  return (theta / n) * v;
}

double Rotation::angle() const {
  return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::is_finite() const {
  return translation.allFinite() && rotation.quaternion().coeffs().allFinite();
}

void MetricWeights::validate() const {
  if (!(w_trans > 0.0) || !std::isfinite(w_trans)) {
    throw InvalidArgument("metric weight w_trans must be > 0");
  }
  if (!(w_rot >= 0.0) || !std::isfinite(w_rot)) {
    throw InvalidArgument("metric weight w_rot must be >= 0");
  }
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.translation + a.rotation.rotate(b.translation)};
}

Pose inverse(const Pose& p) {
  const Rotation r_inv = p.rotation.inverse();
  return {r_inv, -r_inv.rotate(p.translation)};
}

Twist log_map(const Pose& p) {
  Twist v;
  v.phi = p.rotation.log();
  v.rho = left_jacobian_inverse(v.phi) * p.translation;
  return v;
}

Pose exp_map(const Twist& v) {
  return {Rotation::exp(v.phi), left_jacobian(v.phi) * v.rho};
}

double rotation_distance(const Rotation& a, const Rotation& b) {
  // Half the S^3 angle between the quaternions, taken from chord lengths: this
  // is exactly symmetric in a and b and accurate at both ends of [0, pi].
  const Eigen::Vector4d qa = a.quaternion().coeffs();
  const Eigen::Vector4d qb = b.quaternion().coeffs();
  const double minus = (qa - qb).norm();
  const double plus = (qa + qb).norm();
  return 4.0 * std::atan2(std::min(minus, plus), std::max(minus, plus));
}

double geodesic_distance(const Pose& a, const Pose& b, const MetricWeights& w) {
  const double dt = w.w_trans * (a.translation - b.translation).norm();
  const double dr = w.w_rot * rotation_distance(a.rotation, b.rotation);
  return std::hypot(dt, dr);
}

Pose geodesic_interpolate(const Pose& a, const Pose& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidArgument("interpolation parameter must lie in [0, 1], got " + std::to_string(t));
  }
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const Eigen::Vector3d delta = (a.rotation.inverse() * b.rotation).log();
  return {a.rotation * Rotation::exp(t * delta),
          (1.0 - t) * a.translation + t * b.translation};
}

double huber(double s) {
  if (!(s >= 0.0)) throw InvalidArgument("huber norm requires s >= 0");
  constexpr double knee = 1.0 / std::numbers::sqrt2;
  if (s < knee) return s * s;
  return std::numbers::sqrt2 * s - 0.5;
}

}  // namespace carotid
