#include "reloc/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <map>

namespace reloc {

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite())
      throw InvalidArgument("point " + std::to_string(i) + " is not finite");
  }
  if (has_features() && static_cast<std::size_t>(features.rows()) != points.size())
    throw InvalidArgument("feature matrix has " + std::to_string(features.rows()) +
                          " rows for " + std::to_string(points.size()) + " points");
}

PointCloud apply(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  out.features = cloud.features;
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double resolution) {
  if (!(resolution > 0.0))
    throw InvalidArgument("voxel resolution must be positive");

  struct Accum {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::VectorXf feat_sum;
    int count = 0;
  };
  // std::map keeps the output ordered by voxel key, which makes the
  // result independent of input point order up to centroid arithmetic.
  std::map<std::array<int, 3>, Accum> voxels;
  const bool with_features = cloud.has_features();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3i k = voxel_key(cloud.points[i], resolution);
    Accum& a = voxels[{k.x(), k.y(), k.z()}];
    a.sum += cloud.points[i];
    if (with_features) {
      if (a.count == 0)
        a.feat_sum = cloud.features.row(static_cast<Eigen::Index>(i)).transpose();
      else
        a.feat_sum += cloud.features.row(static_cast<Eigen::Index>(i)).transpose();
    }
    ++a.count;
  }

  PointCloud out;
  out.points.reserve(voxels.size());
  if (with_features)
    out.features.resize(static_cast<Eigen::Index>(voxels.size()), cloud.features.cols());
  Eigen::Index row = 0;
  for (const auto& [key, a] : voxels) {
    out.points.push_back(a.sum / a.count);
    if (with_features)
      out.features.row(row) = (a.feat_sum / static_cast<float>(a.count)).transpose();
    ++row;
  }
  return out;
}

RigidTransform kabsch_fit(std::span<const Eigen::Vector3d> source,
                          std::span<const Eigen::Vector3d> target) {
  if (source.size() != target.size())
    throw InvalidArgument("kabsch_fit: source and target lengths differ");
  const std::size_t n = source.size();
  if (n < 3)
    throw DegenerateConfiguration("kabsch_fit: need at least 3 pairs, got " +
                                  std::to_string(n));

  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), ct = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += source[i];
    ct += target[i];
  }
  cs /= static_cast<double>(n);
  ct /= static_cast<double>(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i)
    h += (source[i] - cs) * (target[i] - ct).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
    throw DegenerateConfiguration("kabsch_fit: centered covariance has rank < 2");

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  return {Eigen::Quaterniond(r), ct - r * cs};
}

}  // namespace reloc
