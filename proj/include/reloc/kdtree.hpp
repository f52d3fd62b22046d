#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "reloc/errors.hpp"
#include "reloc/geometry.hpp"

namespace reloc {

/// Balanced k-d tree over a fixed point set of arbitrary dimension.
/// Splits on the widest-spread axis at the median; leaf size 16.
/// Immutable after construction; knn is safe to call concurrently.
class KdTree {
 public:
  KdTree() = default;

  /// Rows are points, columns are coordinates. Point id = row index.
  explicit KdTree(Eigen::MatrixXd points);

  static KdTree from_points(
      std::span<const Eigen::Vector3d, std::dynamic_extent> points);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  Eigen::Index dim() const { return points_.cols(); }
  bool empty() const { return points_.rows() == 0; }

  /// The min(k, size) nearest neighbours of `query`, sorted ascending by
  /// Euclidean distance, equal distances broken by lower point id.
  std::vector<std::pair<int, double>> knn(const Eigen::VectorXd& query,
                                          int k) const;

  std::pair<int, double> nearest(const Eigen::VectorXd& query) const;

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    bool is_leaf() const { return axis < 0; }
  };

  int build(std::uint32_t begin, std::uint32_t end);

  Eigen::MatrixXd points_;
  std::vector<int> ids_;
  std::vector<Node> nodes_;
  int root_ = -1;

  static constexpr std::uint32_t kLeafSize = 16;
};

}  // namespace reloc
