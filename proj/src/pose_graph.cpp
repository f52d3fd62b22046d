#include "reloc/pose_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "reloc/errors.hpp"
#include "reloc/io.hpp"

namespace reloc {

namespace {

std::int64_t parse_id(const std::string& token, long line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw FormatError::at_line("graph: bad integer '" + token + "'", line);
  }
}

}  // namespace

bool PoseGraph::has_node(std::int64_t id) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [&](const GraphNode& n) { return n.id == id; });
}

const GraphNode& PoseGraph::node(std::int64_t id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  throw StructuralError("graph: no node with id " + std::to_string(id));
}

std::int64_t PoseGraph::max_node_id() const {
  std::int64_t best = -1;
  for (const auto& n : nodes) best = std::max(best, n.id);
  return best;
}

PoseGraph add_node(PoseGraph graph, GraphNode node) {
  if (graph.has_node(node.id))
    throw StructuralError("graph: duplicate node id " +
                          std::to_string(node.id));
  if (node.kind == NodeKind::root && node.submap_id < 0)
    throw StructuralError("graph: root node without a submap");
  if (node.kind == NodeKind::child && node.submap_id >= 0)
    throw StructuralError("graph: child node carrying a submap");
  graph.nodes.push_back(std::move(node));
  return graph;
}

PoseGraph add_edge(PoseGraph graph, GraphEdge edge) {
  if (!graph.has_node(edge.from))
    throw StructuralError("graph: edge from missing node " +
                          std::to_string(edge.from));
  if (!graph.has_node(edge.to))
    throw StructuralError("graph: edge to missing node " +
                          std::to_string(edge.to));
  for (const auto& e : graph.edges)
    if (e.from == edge.from && e.to == edge.to)
      throw StructuralError("graph: duplicate edge " +
                            std::to_string(edge.from) + " -> " +
                            std::to_string(edge.to));
  graph.edges.push_back(std::move(edge));
  return graph;
}

PoseGraph merge(const PoseGraph& prior, const PoseGraph& revisit,
                const GraphEdge& edge) {
  if (!prior.has_node(edge.from))
    throw StructuralError("merge: anchor node " + std::to_string(edge.from) +
                          " not in the prior graph");
  if (!revisit.has_node(edge.to))
    throw StructuralError("merge: revisit node " + std::to_string(edge.to) +
                          " not in the revisit graph");
  const GraphNode& anchor = prior.node(edge.from);
  const GraphNode& entry = revisit.node(edge.to);
  if (anchor.kind != NodeKind::root || entry.kind != NodeKind::root)
    throw StructuralError("merge: connecting edge must join two roots");

  const std::int64_t offset = prior.max_node_id() + 1;
  const RigidTransform realign =
      compose(compose(anchor.pose, edge.relative), entry.pose.inverse());

  PoseGraph out = prior;
  for (GraphNode node : revisit.nodes) {
    node.id += offset;
    node.pose = compose(realign, node.pose);
    out.nodes.push_back(std::move(node));
  }
  for (GraphEdge e : revisit.edges) {
    e.from += offset;
    e.to += offset;
    out.edges.push_back(std::move(e));
  }

  GraphEdge connector = edge;
  connector.to += offset;
  return add_edge(std::move(out), std::move(connector));
}

void save_graph(const std::filesystem::path& path, const PoseGraph& graph) {
  std::ostringstream out;
  if (!graph.session.empty()) out << "session " << graph.session << "\n";
  for (const auto& n : graph.nodes) {
    out << "node " << n.id << " ";
    if (n.kind == NodeKind::root) {
      if (n.submap_id == n.id)
        out << "root";
      else
        out << "root/" << n.submap_id;
    } else {
      out << "child";
    }
    out << " " << format_transform(n.pose) << "\n";
  }
  for (const auto& e : graph.edges)
    out << "edge " << e.from << " " << e.to << " "
        << format_transform(e.relative) << "\n";
  write_text_file(path, out.str());
}

PoseGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open graph file " + path.string(), 0);

  PoseGraph graph;
  std::vector<std::pair<GraphEdge, long>> pending_edges;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "session") {
      if (tokens.size() != 2)
        throw FormatError::at_line("graph: session line needs one tag",
                                   line_no);
      graph.session = tokens[1];
    } else if (tokens[0] == "node") {
      if (tokens.size() != 10)
        throw FormatError::at_line(
            "graph: node line needs id, kind and 7 pose values", line_no);
      GraphNode node;
      node.id = parse_id(tokens[1], line_no);
      const std::string& kind = tokens[2];
      if (kind == "root") {
        node.kind = NodeKind::root;
        node.submap_id = node.id;
      } else if (kind.rfind("root/", 0) == 0) {
        node.kind = NodeKind::root;
        node.submap_id = parse_id(kind.substr(5), line_no);
      } else if (kind == "child") {
        node.kind = NodeKind::child;
        node.submap_id = -1;
      } else {
        throw FormatError::at_line("graph: unknown node kind '" + kind + "'",
                                   line_no);
      }
      node.pose = parse_transform(tokens, 3, line_no);
      try {
        graph = add_node(std::move(graph), std::move(node));
      } catch (const StructuralError& e) {
        throw FormatError::at_line(e.what(), line_no);
      }
    } else if (tokens[0] == "edge") {
      if (tokens.size() != 10)
        throw FormatError::at_line(
            "graph: edge line needs endpoints and 7 pose values", line_no);
      GraphEdge edge;
      edge.from = parse_id(tokens[1], line_no);
      edge.to = parse_id(tokens[2], line_no);
      edge.relative = parse_transform(tokens, 3, line_no);
      pending_edges.emplace_back(std::move(edge), line_no);
    } else {
      throw FormatError::at_line("graph: unknown line type '" + tokens[0] + "'",
                                 line_no);
    }
  }

  for (auto& [edge, at_line] : pending_edges) {
    try {
      graph = add_edge(std::move(graph), std::move(edge));
    } catch (const StructuralError& e) {
      throw FormatError::at_line(e.what(), at_line);
    }
  }
  return graph;
}

}  // namespace reloc
