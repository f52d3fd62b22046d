#pragma once

#include <cstdint>
#include <vector>

#include "reloc/descriptors.hpp"
#include "reloc/geometry.hpp"

namespace reloc {

/// One putative keypoint match: indices into the query and candidate
/// keypoint sequences plus their descriptor distance.
struct Correspondence {
  int query_index = -1;
  int candidate_index = -1;
  double distance = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }
};

/// Outcome of a pose estimation stage. `transform` maps query-frame
/// coordinates into candidate-frame coordinates.
struct RegistrationResult {
  RigidTransform transform;
  int inlier_count = 0;
  double inlier_rms = 0.0;  // meters
  bool converged = false;
  int icp_iterations = 0;
  std::vector<double> error_history;  // accepted mean-squared errors, m^2
};

/// Mutual nearest neighbours in descriptor space, filtered by the ratio of
/// best to second-best distance (<= ratio), sorted by ascending distance.
/// Zero-length descriptors never match.
CorrespondenceSet match_keypoints(const std::vector<LocalKeypoint>& query,
                                  const std::vector<LocalKeypoint>& candidate,
                                  double lowe_ratio = 0.95);

/// Random-sample consensus over 3-point rigid fits. The winning model is
/// refit on its inliers. Deterministic for a fixed seed; the iteration count
/// adapts to the observed inlier ratio at 99% confidence.
RegistrationResult ransac_register(
    const CorrespondenceSet& corr,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& query_pts,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& cand_pts,
    double inlier_threshold = 0.5, int max_iters = 10000,
    std::uint64_t seed = 42);

/// Point-to-point refinement on voxel-downsampled copies of both clouds.
/// Stops once the mean-squared correspondence error improves by less than
/// 1e-6 m^2 (reverting the step if the error grew) or at max_iters.
RegistrationResult icp_refine(const PointCloud& query,
                              const PointCloud& candidate,
                              const RigidTransform& initial,
                              double resolution = 0.4,
                              double max_corr_dist = 1.0, int max_iters = 50);

/// True iff the geodesic rotation error and the translation error against
/// the ground truth are inside the tolerances (boundaries inclusive).
bool registration_success(const RigidTransform& estimate,
                          const RigidTransform& truth, double rot_tol_deg = 5.0,
                          double trans_tol_m = 2.0);

}  // namespace reloc
