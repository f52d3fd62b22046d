#pragma once

#include <Eigen/Core>
#include <vector>

#include "reloc/geometry.hpp"

namespace reloc {

/// Whole-submap retrieval descriptor, 256 floats, unit length.
struct GlobalDescriptor {
  Eigen::VectorXf v;

  bool valid() const { return v.size() == kDim; }
  static constexpr int kDim = 256;
};

/// One registration keypoint: position in the submap frame plus a unit-length
/// 128-float descriptor. Zero descriptors mark empty neighbourhoods and are
/// excluded from matching.
struct LocalKeypoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::VectorXf descriptor;
  float saliency = 1.0f;

  static constexpr int kDim = 128;
  EIGEN_MAKE_ALIGNED_OPERATOR_NEW
};

/// Polar height image: rings x sectors of maximum point height per bin,
/// 0 where the bin is unoccupied.
struct ScanContextDescriptor {
  Eigen::MatrixXd bins;

  Eigen::Index rings() const { return bins.rows(); }
  Eigen::Index sectors() const { return bins.cols(); }
};

/// Generalized-mean pooling of a K x D feature matrix into D values:
/// out_d = ((1/K) sum_k max(f_kd, 1e-6)^p)^(1/p). p = 1 is the column mean;
/// large p approaches the column max.
Eigen::VectorXd gem_pool(const Eigen::MatrixXd& features, double p);

/// Polar binning of max point height. Points beyond max_radius are ignored.
ScanContextDescriptor extract_scan_context(const PointCloud& cloud,
                                           double max_radius,
                                           int rings = 20, int sectors = 60);

/// Minimum over sector shifts of the mean column-wise cosine distance,
/// in [0, 1]; invariant to yaw rotation of either cloud.
double scan_context_distance(const ScanContextDescriptor& a,
                             const ScanContextDescriptor& b);

/// Centroids of the highest-point-count 1 m voxels, at most `budget` of
/// them; equal counts break toward the lower voxel key.
std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>>
detect_keypoints(const PointCloud& cloud, int budget);

/// Rotation-invariant histogram descriptor of the radius-neighbourhood of
/// `position`: 8 elevation x 8 radial occupancy bins plus 64 relative-height
/// bins, L2-normalized. An empty neighbourhood yields the zero vector.
Eigen::VectorXf baseline_local_descriptor(const PointCloud& cloud,
                                          const Eigen::Vector3d& position,
                                          double radius);

/// detect_keypoints + baseline_local_descriptor over one cloud.
std::vector<LocalKeypoint> extract_local_keypoints(const PointCloud& cloud,
                                                   int budget, double radius);

/// 256-float submap descriptor: GeM pooling of the keypoint descriptors
/// concatenated with a whole-cloud histogram around the centroid, then
/// L2-normalized.
GlobalDescriptor compute_global_descriptor(
    const PointCloud& cloud, const std::vector<LocalKeypoint>& keypoints,
    double gem_p = 3.0);

}  // namespace reloc
