#include "reloc/descriptors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace reloc {

Eigen::VectorXd gem_pool(const Eigen::MatrixXd& features, double p) {
  if (features.rows() == 0 || features.cols() == 0)
    throw InvalidArgument("gem_pool: empty feature matrix");
  if (p < 1.0) throw InvalidArgument("gem_pool: exponent must be >= 1");
  const Eigen::MatrixXd clamped = features.cwiseMax(1e-6);
  Eigen::VectorXd out(features.cols());
  for (Eigen::Index d = 0; d < features.cols(); ++d) {
    const double mean_pow = clamped.col(d).array().pow(p).mean();
    out(d) = std::pow(mean_pow, 1.0 / p);
  }
  return out;
}

ScanContextDescriptor extract_scan_context(const PointCloud& cloud,
                                           double max_radius, int rings,
                                           int sectors) {
  if (cloud.empty())
    throw InvalidArgument("scan context: empty cloud");
  if (!(max_radius > 0.0))
    throw InvalidArgument("scan context: max_radius must be positive");
  if (rings < 1 || sectors < 1)
    throw InvalidArgument("scan context: need at least 1 ring and sector");

  ScanContextDescriptor sc;
  sc.bins = Eigen::MatrixXd::Zero(rings, sectors);
  Eigen::MatrixXd occupied = Eigen::MatrixXd::Zero(rings, sectors);
  const double ring_width = max_radius / rings;
  const double sector_width = 2.0 * M_PI / sectors;
  for (const auto& p : cloud.points) {
    const double rho = std::hypot(p.x(), p.y());
    const int r = static_cast<int>(std::floor(rho / ring_width));
    if (r >= rings) continue;
    double theta = std::atan2(p.y(), p.x());
    if (theta < 0.0) theta += 2.0 * M_PI;
    int s = static_cast<int>(std::floor(theta / sector_width));
    if (s >= sectors) s = 0;  // theta == 2*pi wraps
    if (occupied(r, s) == 0.0 || p.z() > sc.bins(r, s)) sc.bins(r, s) = p.z();
    occupied(r, s) = 1.0;
  }
  // Unoccupied bins keep the 0 sentinel; an occupied bin whose max height is
  // negative is still stored as-is.
  return sc;
}

double scan_context_distance(const ScanContextDescriptor& a,
                             const ScanContextDescriptor& b) {
  if (a.rings() != b.rings() || a.sectors() != b.sectors())
    throw InvalidArgument("scan context distance: dimension mismatch");
  const Eigen::Index sectors = a.sectors();
  double best = 1.0;
  for (Eigen::Index shift = 0; shift < sectors; ++shift) {
    double acc = 0.0;
    int counted = 0;
    for (Eigen::Index j = 0; j < sectors; ++j) {
      const auto ca = a.bins.col(j);
      const auto cb = b.bins.col((j + shift) % sectors);
      const double na = ca.norm(), nb = cb.norm();
      if (na == 0.0 || nb == 0.0) continue;
      const double cos = ca.dot(cb) / (na * nb);
      acc += 1.0 - std::clamp(cos, 0.0, 1.0);
      ++counted;
    }
    if (counted > 0) best = std::min(best, acc / counted);
  }
  return best;
}

namespace {

struct VoxelAccum {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  int count = 0;
};

}  // namespace

std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>>
detect_keypoints(const PointCloud& cloud, int budget) {
  if (budget < 1) throw InvalidArgument("detect_keypoints: budget must be >= 1");
  std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>> out;
  if (cloud.empty()) return out;

  std::map<std::array<int, 3>, VoxelAccum> voxels;
  for (const auto& p : cloud.points) {
    const Eigen::Vector3i k = voxel_key(p, 1.0);
    VoxelAccum& a = voxels[{k.x(), k.y(), k.z()}];
    a.sum += p;
    a.count += 1;
  }
  std::vector<std::pair<std::array<int, 3>, VoxelAccum>> ranked(voxels.begin(),
                                                                voxels.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& l, const auto& r) {
                     return l.second.count != r.second.count
                                ? l.second.count > r.second.count
                                : l.first < r.first;
                   });
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(budget), ranked.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back(ranked[i].second.sum / ranked[i].second.count);
  return out;
}

namespace {

// Shared binning core: deltas are neighbour positions minus the center.
Eigen::VectorXf bin_neighbourhood(
    const std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>>&
        deltas,
    double radius) {
  Eigen::VectorXf desc = Eigen::VectorXf::Zero(LocalKeypoint::kDim);
  if (deltas.empty()) return desc;
  for (const auto& d : deltas) {
    const double rho = d.norm();
    const int radial =
        std::min(7, static_cast<int>(std::floor(rho / radius * 8.0)));
    double elev = 0.0;
    if (rho > 1e-12) elev = std::asin(std::clamp(d.z() / rho, -1.0, 1.0));
    const int erow = std::min(
        7, static_cast<int>(std::floor((elev + M_PI / 2) / M_PI * 8.0)));
    desc(erow * 8 + radial) += 1.0f;
    const int hbin = std::clamp(
        static_cast<int>(std::floor((d.z() + radius) / (2.0 * radius) * 64.0)),
        0, 63);
    desc(64 + hbin) += 1.0f;
  }
  desc.normalize();
  return desc;
}

}  // namespace

Eigen::VectorXf baseline_local_descriptor(const PointCloud& cloud,
                                          const Eigen::Vector3d& position,
                                          double radius) {
  if (!(radius > 0.0))
    throw InvalidArgument("local descriptor: radius must be positive");
  std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>> deltas;
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d d = p - position;
    if (d.norm() <= radius) deltas.push_back(d);
  }
  return bin_neighbourhood(deltas, radius);
}

std::vector<LocalKeypoint> extract_local_keypoints(const PointCloud& cloud,
                                                   int budget, double radius) {
  const auto positions = detect_keypoints(cloud, budget);
  std::vector<LocalKeypoint> out;
  out.reserve(positions.size());
  for (const auto& pos : positions) {
    LocalKeypoint kp;
    kp.position = pos;
    kp.descriptor = baseline_local_descriptor(cloud, pos, radius);
    out.push_back(std::move(kp));
  }
  return out;
}

GlobalDescriptor compute_global_descriptor(
    const PointCloud& cloud, const std::vector<LocalKeypoint>& keypoints,
    double gem_p) {
  if (cloud.empty())
    throw InvalidArgument("global descriptor: empty cloud");

  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(LocalKeypoint::kDim);
  std::size_t valid = 0;
  for (const auto& kp : keypoints)
    if (kp.descriptor.size() == LocalKeypoint::kDim &&
        kp.descriptor.norm() > 0.0f)
      ++valid;
  if (valid > 0) {
    Eigen::MatrixXd mat(valid, LocalKeypoint::kDim);
    Eigen::Index row = 0;
    for (const auto& kp : keypoints)
      if (kp.descriptor.size() == LocalKeypoint::kDim &&
          kp.descriptor.norm() > 0.0f)
        mat.row(row++) = kp.descriptor.cast<double>().transpose();
    pooled = gem_pool(mat, gem_p);
  }

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());
  double bound = 0.0;
  for (const auto& p : cloud.points)
    bound = std::max(bound, (p - centroid).norm());
  if (bound <= 0.0) bound = 1.0;
  const Eigen::VectorXf whole =
      baseline_local_descriptor(cloud, centroid, bound);

  GlobalDescriptor g;
  g.v.resize(GlobalDescriptor::kDim);
  g.v.head(LocalKeypoint::kDim) = pooled.cast<float>();
  g.v.tail(LocalKeypoint::kDim) = whole;
  const float n = g.v.norm();
  if (n > 0.0f) g.v /= n;
  return g;
}

}  // namespace reloc
