#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reloc/geometry.hpp"

namespace reloc {

enum class NodeKind { root, child };

/// Pose-graph node. Roots anchor a submap (submap_id >= 0); children hang
/// off a root through edges and carry no submap of their own.
struct GraphNode {
  std::int64_t id = 0;
  NodeKind kind = NodeKind::root;
  RigidTransform pose;            // node frame -> session frame
  std::int64_t submap_id = -1;    // roots only
};

struct GraphEdge {
  std::int64_t from = 0;
  std::int64_t to = 0;
  RigidTransform relative;  // to-frame -> from-frame
};

struct PoseGraph {
  std::string session;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  bool has_node(std::int64_t id) const;
  const GraphNode& node(std::int64_t id) const;
  std::int64_t max_node_id() const;
};

/// Value-style insertion; rejects duplicate ids, dangling or duplicate
/// ordered edges with StructuralError.
PoseGraph add_node(PoseGraph graph, GraphNode node);
PoseGraph add_edge(PoseGraph graph, GraphEdge edge);

/// Re-anchors `revisit` into the frame of `prior` through a verified edge
/// from a prior root t1 to a revisit root q: every revisit pose is
/// left-multiplied by pose(t1) * relative * pose(q)^-1, revisit ids are
/// offset by prior max id + 1, and the connecting edge is inserted. Prior
/// poses are untouched.
PoseGraph merge(const PoseGraph& prior, const PoseGraph& revisit,
                const GraphEdge& edge);

void save_graph(const std::filesystem::path& path, const PoseGraph& graph);
PoseGraph load_graph(const std::filesystem::path& path);

}  // namespace reloc
