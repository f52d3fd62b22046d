#include "reloc/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "reloc/errors.hpp"

namespace reloc {

SuperpointSet build_superpoints(const PointCloud& cloud,
                                const RigidTransform& pose,
                                const CameraModel& camera,
                                const SuperpixelSet& superpixels,
                                double min_depth) {
  camera.validate();
  if (!cloud.has_features())
    throw InvalidArgument("superpoints: cloud carries no per-point features");
  if (superpixels.width() != camera.width ||
      superpixels.height() != camera.height)
    throw InvalidArgument("superpoints: superpixels and camera disagree on "
                          "image size");

  const RigidTransform to_camera = compose(camera.lidar_to_camera, pose);
  const int dim = static_cast<int>(cloud.features.cols());

  std::map<int, std::vector<int>> members;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3d p_cam = to_camera.apply(cloud.points[i]);
    const auto pixel = camera.project(p_cam, min_depth);
    if (!pixel) continue;
    const int px = static_cast<int>(std::floor(pixel->x()));
    const int py = static_cast<int>(std::floor(pixel->y()));
    members[superpixels.labels(py, px)].push_back(static_cast<int>(i));
  }
  if (members.empty())
    throw EmptyOverlap("superpoints: no point projects into the image");

  SuperpointSet out;
  out.feature_dim = dim;
  for (auto& [label, indices] : members) {
    Superpoint group;
    group.label = label;
    Eigen::VectorXd feature_sum = Eigen::VectorXd::Zero(dim);
    for (int idx : indices) {
      group.centroid += cloud.points[idx];
      feature_sum += cloud.features.row(idx).cast<double>().transpose();
    }
    group.centroid /= static_cast<double>(indices.size());
    feature_sum /= static_cast<double>(indices.size());
    const double norm = feature_sum.norm();
    if (norm > 1e-30) feature_sum /= norm;
    group.feature = feature_sum.cast<float>();
    group.member_indices = std::move(indices);
    out.groups.push_back(std::move(group));
  }
  return out;
}

SimilarityMatrix similarity_matrix(const SuperpixelSet& superpixels,
                                   const SuperpointSet& superpoints) {
  if (superpixels.features.rows() != superpixels.count)
    throw InvalidArgument("similarity: superpixel features not pooled");
  if (superpixels.features.cols() != superpoints.feature_dim)
    throw InvalidArgument("similarity: feature dimensions disagree");

  const int n = static_cast<int>(superpoints.groups.size());
  SimilarityMatrix m;
  m.cs.resize(n, n);
  m.flagged.setZero(n, n);
  m.labels.reserve(n);
  for (const auto& group : superpoints.groups) {
    if (group.label < 0 || group.label >= superpixels.count)
      throw InvalidArgument("similarity: superpoint label outside the "
                            "superpixel set");
    m.labels.push_back(group.label);
  }

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd f =
        superpixels.features.row(m.labels[i]).cast<double>().transpose();
    const double f_norm = f.norm();
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd g = superpoints.groups[j].feature.cast<double>();
      const double g_norm = g.norm();
      if (f_norm <= 1e-30 || g_norm <= 1e-30) {
        m.cs(i, j) = 0.0;
        m.flagged(i, j) = 1;
        continue;
      }
      m.cs(i, j) = std::clamp(f.dot(g) / (f_norm * g_norm), -1.0, 1.0);
    }
  }
  return m;
}

double mean_cosine_similarity(const SimilarityMatrix& m) {
  if (m.size() == 0)
    throw EmptyOverlap("mean cosine similarity of an empty pairing");
  return m.cs.diagonal().mean();
}

VerificationFeatures alignment_ratio(const SuperpixelSet& superpixels,
                                     const SuperpointSet& superpoints,
                                     const SimilarityMatrix& sim,
                                     const RigidTransform& pose,
                                     const CameraModel& camera,
                                     double min_depth, int top_k) {
  const int n = sim.size();
  if (n == 0) throw EmptyOverlap("alignment ratio of an empty pairing");
  if (n != static_cast<int>(superpoints.groups.size()))
    throw InvalidArgument("alignment: similarity matrix does not cover the "
                          "superpoint set");
  if (top_k < 1) throw InvalidArgument("alignment: top_k must be positive");

  const RigidTransform to_camera = compose(camera.lidar_to_camera, pose);

  int mismatches = 0;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    const int label = sim.labels[i];
    for (int j = 0; j < n; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (sim.cs(i, a) != sim.cs(i, b)) return sim.cs(i, a) > sim.cs(i, b);
      return sim.labels[a] < sim.labels[b];
    });

    const Eigen::Vector2d target = superpixels.centroids[label];
    bool matched = false;
    bool found_candidate = false;
    double best_gap = std::numeric_limits<double>::infinity();
    const int limit = std::min(top_k, n);
    for (int rank = 0; rank < limit; ++rank) {
      const auto& group = superpoints.groups[order[rank]];
      const auto pixel =
          camera.project(to_camera.apply(group.centroid), min_depth);
      if (!pixel) continue;
      const double gap = (*pixel - target).norm();
      if (gap < best_gap) {
        best_gap = gap;
        found_candidate = true;
        const int px = static_cast<int>(std::floor(pixel->x()));
        const int py = static_cast<int>(std::floor(pixel->y()));
        matched = superpixels.labels(py, px) == label;
      }
    }
    if (!found_candidate || !matched) ++mismatches;
  }

  VerificationFeatures features;
  features.pair_count = n;
  features.mismatch_count = mismatches;
  features.alignment_ratio =
      1.0 - static_cast<double>(mismatches) / static_cast<double>(n);
  features.mcs = mean_cosine_similarity(sim);
  return features;
}

VerifyResult verify(const Image& image, const PointCloud& cloud,
                    const RigidTransform& pose, const CameraModel& camera,
                    const FeatureProvider& provider, const SvcModel& model,
                    const VerifyParams& params, VerifyTimings* timings) {
  if (image.width != camera.width || image.height != camera.height)
    throw InvalidArgument("verify: image size does not match the camera");

  using Clock = std::chrono::steady_clock;
  auto mark = Clock::now();
  const auto lap = [&mark] {
    const auto now = Clock::now();
    const double s = std::chrono::duration<double>(now - mark).count();
    mark = now;
    return s;
  };

  SuperpixelSet superpixels =
      slic_segment(image, params.target_superpixels, params.compactness);
  if (timings) timings->superpixel = lap();

  pool_superpixel_features(superpixels, provider.image_features(image));

  PointCloud featured = cloud;
  featured.features = provider.point_features(cloud);

  VerifyResult result;
  SuperpointSet superpoints;
  try {
    superpoints = build_superpoints(featured, pose, camera, superpixels,
                                    params.min_depth);
  } catch (const EmptyOverlap&) {
    if (timings) timings->feature_description = lap();
    result.verdict = Verdict::unmatched;
    return result;
  }
  if (timings) timings->feature_description = lap();

  const SimilarityMatrix sim = similarity_matrix(superpixels, superpoints);
  const double diag_mean = mean_cosine_similarity(sim);
  if (timings) timings->mcs = lap();

  result.features = alignment_ratio(superpixels, superpoints, sim, pose,
                                    camera, params.min_depth, params.top_k);
  result.features.mcs = diag_mean;
  result.verdict = svc_predict(
      model,
      Eigen::Vector2d(result.features.mcs, result.features.alignment_ratio));
  if (timings) timings->verification = lap();
  return result;
}

}  // namespace reloc
