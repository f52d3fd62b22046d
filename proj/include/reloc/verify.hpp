#pragma once

#include <Eigen/Core>
#include <vector>

#include "reloc/camera.hpp"
#include "reloc/geometry.hpp"
#include "reloc/provider.hpp"
#include "reloc/slic.hpp"
#include "reloc/svc.hpp"

namespace reloc {

/// Group of cloud points landing in one superpixel after projection.
struct Superpoint {
  int label = -1;
  std::vector<int> member_indices;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();  // candidate frame
  Eigen::VectorXf feature;                             // unit or zero
};

struct SuperpointSet {
  std::vector<Superpoint> groups;  // ascending label
  int feature_dim = 0;
};

/// Cosine similarities between paired superpixel/superpoint features.
/// Axis i of both dimensions corresponds to labels[i]; the diagonal pairs
/// superpixel i with the superpoint built from region i. Entries whose
/// feature had zero norm are 0 and flagged.
struct SimilarityMatrix {
  Eigen::MatrixXd cs;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> flagged;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

struct VerificationFeatures {
  double mcs = 0.0;
  double alignment_ratio = 0.0;  // nu = 1 - n / L
  int pair_count = 0;            // L
  int mismatch_count = 0;        // n
};

/// Projects the cloud through camera.lidar_to_camera composed with pose and
/// groups surviving points by the superpixel label under their pixel.
/// Points at camera depth <= min_depth or outside the image are dropped.
/// Throws EmptyOverlap when nothing projects.
SuperpointSet build_superpoints(const PointCloud& cloud,
                                const RigidTransform& pose,
                                const CameraModel& camera,
                                const SuperpixelSet& superpixels,
                                double min_depth = 0.1);

SimilarityMatrix similarity_matrix(const SuperpixelSet& superpixels,
                                   const SuperpointSet& superpoints);

/// Mean of the diagonal; EmptyOverlap when the matrix is empty.
double mean_cosine_similarity(const SimilarityMatrix& m);

/// For every paired superpixel: take its top-5 superpoints by similarity
/// (ties to the lower label), project their centroids, keep the one whose
/// projection lands nearest the superpixel centroid, and count a match when
/// that projection falls inside the superpixel itself. nu = 1 - n/L.
VerificationFeatures alignment_ratio(const SuperpixelSet& superpixels,
                                     const SuperpointSet& superpoints,
                                     const SimilarityMatrix& sim,
                                     const RigidTransform& pose,
                                     const CameraModel& camera,
                                     double min_depth = 0.1, int top_k = 5);

struct VerifyParams {
  int target_superpixels = 250;
  double compactness = 10.0;
  double min_depth = 0.1;
  int top_k = 5;
};

struct VerifyResult {
  Verdict verdict = Verdict::unmatched;
  VerificationFeatures features;
};

/// Wall-clock seconds per verification stage, monotonic clock.
struct VerifyTimings {
  double superpixel = 0.0;           // segmentation
  double feature_description = 0.0;  // provider features + pooling + grouping
  double mcs = 0.0;                  // similarity matrix + diagonal mean
  double verification = 0.0;         // alignment ratio + classifier
};

/// Full cross-modal check of a candidate cloud against the query image
/// under the estimated pose. Empty overlap short-circuits to unmatched
/// with pair_count 0; otherwise the SVC decides. When `timings` is given
/// the per-stage durations are written into it.
VerifyResult verify(const Image& image, const PointCloud& cloud,
                    const RigidTransform& pose, const CameraModel& camera,
                    const FeatureProvider& provider, const SvcModel& model,
                    const VerifyParams& params = {},
                    VerifyTimings* timings = nullptr);

}  // namespace reloc
