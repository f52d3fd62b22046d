#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <span>
#include <vector>

#include "reloc/errors.hpp"

namespace reloc {

/// An element of SE(3): unit quaternion plus translation in meters.
///
/// The quaternion is renormalized and sign-canonicalized (w >= 0) by every
/// constructor and composition, so serialized transforms are bit-comparable.
struct RigidTransform {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : rotation(q), translation(t) {
    canonicalize();
  }

  static RigidTransform identity() { return {}; }

  /// Rotation about +z by `radians`, no translation.
  static RigidTransform yaw(double radians) {
    return {Eigen::Quaterniond(Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitZ())),
            Eigen::Vector3d::Zero()};
  }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    return {Eigen::Quaterniond(Eigen::Matrix3d(m.block<3, 3>(0, 0))),
            Eigen::Vector3d(m.block<3, 1>(0, 3))};
  }

  Eigen::Matrix4d to_matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation.toRotationMatrix();
    m.block<3, 1>(0, 3) = translation;
    return m;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  RigidTransform inverse() const {
    Eigen::Quaterniond qi = rotation.conjugate();
    return {qi, qi * (-translation)};
  }

  /// Geodesic rotation angle in radians, in [0, pi]. The atan2 form stays
  /// accurate near 0 where acos(w) loses ~8 digits.
  double rotation_angle() const {
    return 2.0 * std::atan2(rotation.vec().norm(), std::abs(rotation.w()));
  }

  void canonicalize() {
    // Renormalize only on real drift so that canonicalization is bitwise
    // idempotent and serialized transforms round-trip exactly.
    if (std::abs(rotation.squaredNorm() - 1.0) > 1e-12) rotation.normalize();
    // Fix the double-cover sign; break w == 0 ties on the vector part.
    const double* c = rotation.coeffs().data();  // x y z w
    double lead = c[3];
    if (lead == 0.0) lead = c[0] != 0.0 ? c[0] : (c[1] != 0.0 ? c[1] : c[2]);
    if (lead < 0.0) rotation.coeffs() = -rotation.coeffs();
  }
};

/// compose(a, b): the transform applying b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

/// Relative rotation angle between two transforms, radians.
inline double rotation_error(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation * b.rotation.conjugate(), Eigen::Vector3d::Zero())
      .rotation_angle();
}

/// Euclidean distance between the two translations, meters.
inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation - b.translation).norm();
}

/// A point cloud with an optional per-point feature matrix.
/// `features` is either 0x0 or has exactly one row per point.
struct PointCloud {
  std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>> points;
  Eigen::MatrixXf features;

  bool has_features() const { return features.rows() > 0; }
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Throws InvalidArgument on non-finite coordinates or a feature row
  /// count that disagrees with the point count.
  void validate() const;
};

/// Applies `t` to every point; features are carried through unchanged.
PointCloud apply(const RigidTransform& t, const PointCloud& cloud);

/// Integer voxel key of a coordinate at the given resolution. Points exactly
/// on a boundary belong to the higher-index voxel.
inline Eigen::Vector3i voxel_key(const Eigen::Vector3d& p, double resolution) {
  return {static_cast<int>(std::floor(p.x() / resolution)),
          static_cast<int>(std::floor(p.y() / resolution)),
          static_cast<int>(std::floor(p.z() / resolution))};
}

/// Replaces every occupied voxel by the centroid of its member points
/// (feature rows averaged the same way). Output ordered by voxel key.
PointCloud voxel_downsample(const PointCloud& cloud, double resolution);

/// Least-squares rigid fit mapping source points onto target points
/// (Kabsch/SVD, reflection excluded).
///
/// Throws DegenerateConfiguration on fewer than 3 pairs or a centered
/// covariance of rank < 2; InvalidArgument on length mismatch.
RigidTransform kabsch_fit(std::span<const Eigen::Vector3d> source,
                          std::span<const Eigen::Vector3d> target);

}  // namespace reloc
