#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>

#include "reloc/geometry.hpp"

namespace reloc {

/// Pinhole camera with the rigid transform from the lidar frame into the
/// camera frame. Images are assumed rectified.
struct CameraModel {
  double fx = 0.0, fy = 0.0;  // focal lengths, pixels
  double cx = 0.0, cy = 0.0;  // principal point, pixels
  int width = 0, height = 0;
  RigidTransform lidar_to_camera;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw InvalidArgument("camera: focal lengths must be positive");
    if (width < 1 || height < 1)
      throw InvalidArgument("camera: image dimensions must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
      throw InvalidArgument("camera: principal point outside the image");
  }

  /// Continuous pixel of a camera-frame point, or nothing when the point
  /// sits at depth <= min_depth or lands outside [0,W) x [0,H).
  std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& p_cam,
                                         double min_depth = 0.1) const {
    if (p_cam.z() <= min_depth) return std::nullopt;
    const double u = fx * p_cam.x() / p_cam.z() + cx;
    const double v = fy * p_cam.y() / p_cam.z() + cy;
    if (u < 0.0 || u >= width || v < 0.0 || v >= height) return std::nullopt;
    return Eigen::Vector2d(u, v);
  }
};

/// Plain-text `key = value` calibration file with keys fx, fy, cx, cy,
/// width, height, and lidar_to_camera (7 floats: quaternion w x y z,
/// translation x y z). '#' starts a comment.
CameraModel load_camera_calibration(const std::filesystem::path& path);
void save_camera_calibration(const std::filesystem::path& path,
                             const CameraModel& camera);

}  // namespace reloc
