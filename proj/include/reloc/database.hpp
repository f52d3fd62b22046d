#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reloc/descriptors.hpp"
#include "reloc/geometry.hpp"
#include "reloc/kdtree.hpp"

namespace reloc {

/// One prior-map submap: the retrieval unit, anchored at a root node.
struct SubmapRecord {
  std::int64_t id = 0;
  std::string session;
  RigidTransform root_pose;  // world frame
  GlobalDescriptor global;
  std::vector<LocalKeypoint> keypoints;  // submap frame
  std::string cloud_ref;                 // path to the R3PC blob
};

/// Submap collection with a descriptor index for top-K retrieval.
/// Records are kept ordered by id; mutation rebuilds the index.
class SubmapDatabase {
 public:
  void insert(SubmapRecord rec);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<SubmapRecord>& records() const { return records_; }
  const SubmapRecord* find(std::int64_t id) const;

  /// Ranked (id, Euclidean distance) pairs, ascending distance, equal
  /// distances broken by lower id. Returns min(k, size) entries.
  std::vector<std::pair<std::int64_t, double>> retrieve_topk(
      const GlobalDescriptor& query, int k) const;

  /// Directory layout: `index.txt` plus one keypoint blob per record.
  void save(const std::filesystem::path& dir) const;
  static SubmapDatabase load(const std::filesystem::path& dir);

 private:
  void rebuild_index();

  std::vector<SubmapRecord> records_;
  KdTree index_;  // built once the database outgrows the linear scan
  static constexpr std::size_t kIndexThreshold = 1000;
};

/// Recall@k for k = 1..k_max: the fraction of queries whose top-k ranking
/// contains a submap within revisit_radius of the query's true position.
std::vector<double> recall_at_k(
    const std::vector<std::vector<std::int64_t>>& predictions,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& query_positions,
    const std::map<std::int64_t, Eigen::Vector3d>& submap_positions,
    int k_max, double revisit_radius = 3.0);

/// Keypoints as an R3PC of positions with a 129-column feature block
/// (128 descriptor values then saliency).
void save_keypoints(const std::filesystem::path& path,
                    const std::vector<LocalKeypoint>& keypoints);
std::vector<LocalKeypoint> load_keypoints(const std::filesystem::path& path);

}  // namespace reloc
