#include "reloc/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace reloc {

KdTree::KdTree(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() == 0) return;
  if (!points_.allFinite())
    throw InvalidArgument("kd-tree points must be finite");
  ids_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(ids_.begin(), ids_.end(), 0);
  nodes_.reserve(2 * ids_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::uint32_t>(ids_.size()));
}

KdTree KdTree::from_points(
    std::span<const Eigen::Vector3d, std::dynamic_extent> points) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return KdTree(std::move(m));
}

int KdTree::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  const std::uint32_t count = end - begin;
  if (count > kLeafSize) {
    // Widest-spread axis; ties go to the lower axis index.
    int axis = 0;
    double best_spread = -1.0;
    for (Eigen::Index a = 0; a < points_.cols(); ++a) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::uint32_t i = begin; i < end; ++i) {
        const double v = points_(ids_[i], a);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        axis = static_cast<int>(a);
      }
    }
    if (best_spread > 0.0) {
      const std::uint32_t mid = begin + count / 2;
      std::nth_element(ids_.begin() + begin, ids_.begin() + mid,
                       ids_.begin() + end, [&](int lhs, int rhs) {
                         const double a = points_(lhs, axis);
                         const double b = points_(rhs, axis);
                         return a != b ? a < b : lhs < rhs;
                       });
      node.axis = axis;
      node.split = points_(ids_[mid], axis);
      const int self = static_cast<int>(nodes_.size());
      nodes_.push_back(node);
      const int left = build(begin, mid);
      const int right = build(mid, end);
      nodes_[self].left = left;
      nodes_[self].right = right;
      return self;
    }
    // All points coincide: keep as one leaf regardless of size.
  }
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  return self;
}

namespace {

struct Hit {
  double dist2;
  int id;
  bool operator<(const Hit& o) const {
    return dist2 != o.dist2 ? dist2 < o.dist2 : id < o.id;
  }
};

}  // namespace

std::vector<std::pair<int, double>> KdTree::knn(const Eigen::VectorXd& query,
                                                int k) const {
  if (k < 1) throw InvalidArgument("knn: k must be >= 1");
  if (empty()) throw InvalidArgument("knn: index is empty");
  if (query.size() != points_.cols())
    throw InvalidArgument("knn: query dimension mismatch");

  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), size());
  // Max-heap on (dist2, id); the top is the current worst admitted hit.
  std::priority_queue<Hit> heap;
  const auto worst = [&]() -> Hit {
    return heap.size() < want
               ? Hit{std::numeric_limits<double>::infinity(),
                     std::numeric_limits<int>::max()}
               : heap.top();
  };

  // Iterative depth-first descent, near child first.
  std::vector<std::pair<int, double>> stack;  // (node, plane dist2 to reach it)
  stack.emplace_back(root_, 0.0);
  while (!stack.empty()) {
    const auto [ni, bound] = stack.back();
    stack.pop_back();
    const Hit w = worst();
    if (bound > w.dist2) continue;
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.is_leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const int id = ids_[i];
        const double d2 = (points_.row(id).transpose() - query).squaredNorm();
        const Hit h{d2, id};
        if (heap.size() < want) {
          heap.push(h);
        } else if (h < heap.top()) {
          heap.pop();
          heap.push(h);
        }
      }
      continue;
    }
    const double delta = query(node.axis) - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    stack.emplace_back(far, delta * delta);
    stack.emplace_back(near, bound);
  }

  std::vector<Hit> hits;
  hits.reserve(heap.size());
  while (!heap.empty()) {
    hits.push_back(heap.top());
    heap.pop();
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::pair<int, double>> out;
  out.reserve(hits.size());
  for (const Hit& h : hits) out.emplace_back(h.id, std::sqrt(h.dist2));
  return out;
}

std::pair<int, double> KdTree::nearest(const Eigen::VectorXd& query) const {
  return knn(query, 1).front();
}

}  // namespace reloc
