#pragma once

#include <optional>
#include <string>
#include <vector>

namespace causalign {

struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Role of a node relative to the sample's construction: for node-level samples
// `group` is the shortest-path distance to the target (0 = target) and `index`
// the position inside that ring; for graph-level samples `group` names the
// planted structure slot. Roles let activations be matched across graphs.
struct NodeRole {
  int group = 0;
  int index = 0;
  friend bool operator==(const NodeRole&, const NodeRole&) = default;
  friend auto operator<=>(const NodeRole&, const NodeRole&) = default;
};

// A node's payload: an index into the dataset vocabulary, or a raw vector.
struct NodeFeature {
  int entry = -1;
  std::vector<double> raw;
  friend bool operator==(const NodeFeature&, const NodeFeature&) = default;
};

// Annotation of a structure planted by the generator: which slot it fills,
// the tag the generator intended, and the participating node ids.
struct PlantedStructure {
  int slot = 0;
  int tag = 0;
  std::vector<int> nodes;
  friend bool operator==(const PlantedStructure&, const PlantedStructure&) = default;
};

struct AttributedGraph {
  std::string id;
  int num_nodes = 0;
  std::vector<Edge> edges;          // normalised u < v, sorted, unique
  std::vector<NodeFeature> features;
  std::vector<int> node_class;      // semantic class of each node
  std::vector<NodeRole> roles;      // empty when the sample has no role layout
  std::optional<int> target;
  int label = 0;
  std::vector<PlantedStructure> structures;

  friend bool operator==(const AttributedGraph&, const AttributedGraph&) = default;
};

// Adds an undirected edge, keeping `edges` normalised. Returns false when the
// edge already exists. Throws GraphStructureError on a self-loop or bad id.
bool add_edge(AttributedGraph& g, int u, int v);
void normalise_edges(AttributedGraph& g);

// Checks the structural invariants (ids in range, no self-loops, no duplicate
// edges, target valid, label in range, per-node vectors sized num_nodes).
void validate(const AttributedGraph& g, int num_classes);

std::vector<std::vector<int>> adjacency_lists(int num_nodes, const std::vector<Edge>& edges);
// BFS hop distance from `source`; -1 for unreachable nodes.
std::vector<int> bfs_distances(const AttributedGraph& g, int source);
bool is_connected(int num_nodes, const std::vector<Edge>& edges);
// Edges of the subgraph induced by `nodes`, relabelled to 0..nodes.size()-1
// in the order given.
std::vector<Edge> induced_edges(const AttributedGraph& g, const std::vector<int>& nodes);
std::optional<int> find_role(const AttributedGraph& g, NodeRole role);
std::vector<int> degrees(int num_nodes, const std::vector<Edge>& edges);

}  // namespace causalign
