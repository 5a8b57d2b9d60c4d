#include "causalign/graph.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "causalign/errors.hpp"

namespace causalign {

bool add_edge(AttributedGraph& g, int u, int v) {
  if (u == v) throw GraphStructureError("self-loop at node " + std::to_string(u));
  if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
    throw GraphStructureError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") references a node outside [0," + std::to_string(g.num_nodes) + ")");
  const Edge e{std::min(u, v), std::max(u, v)};
  auto it = std::lower_bound(g.edges.begin(), g.edges.end(), e);
  if (it != g.edges.end() && *it == e) return false;
  g.edges.insert(it, e);
  return true;
}

void normalise_edges(AttributedGraph& g) {
  for (Edge& e : g.edges)
    if (e.u > e.v) std::swap(e.u, e.v);
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
}

void validate(const AttributedGraph& g, int num_classes) {
  const auto fail = [&](const std::string& m) {
    throw GraphStructureError("graph '" + g.id + "': " + m);
  };
  if (g.num_nodes < 1) fail("no nodes");
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    if (e.u == e.v) fail("self-loop at node " + std::to_string(e.u));
    if (e.u < 0 || e.v >= g.num_nodes || e.u > e.v) fail("edge out of range or not normalised");
    if (i > 0 && !(g.edges[i - 1] < e)) fail("duplicate or unsorted edge");
  }
  if (static_cast<int>(g.features.size()) != g.num_nodes) fail("feature count != node count");
  if (static_cast<int>(g.node_class.size()) != g.num_nodes) fail("class count != node count");
  if (!g.roles.empty() && static_cast<int>(g.roles.size()) != g.num_nodes)
    fail("role count != node count");
  if (g.target && (*g.target < 0 || *g.target >= g.num_nodes)) fail("target is not a node id");
  if (g.label < 0 || g.label >= num_classes) fail("label outside [0, num_classes)");
  for (int c : g.node_class)
    if (c < 0 || c >= num_classes) fail("node class outside [0, num_classes)");
  for (const auto& s : g.structures)
    for (int n : s.nodes)
      if (n < 0 || n >= g.num_nodes) fail("planted structure references a missing node");
}

std::vector<std::vector<int>> adjacency_lists(int num_nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
  for (const Edge& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  return adj;
}

std::vector<int> bfs_distances(const AttributedGraph& g, int source) {
  const auto adj = adjacency_lists(g.num_nodes, g.edges);
  std::vector<int> dist(static_cast<std::size_t>(g.num_nodes), -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int w : adj[u])
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
  }
  return dist;
}

bool is_connected(int num_nodes, const std::vector<Edge>& edges) {
  if (num_nodes <= 1) return true;
  AttributedGraph g;
  g.num_nodes = num_nodes;
  g.edges = edges;
  const auto d = bfs_distances(g, 0);
  return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

std::vector<Edge> induced_edges(const AttributedGraph& g, const std::vector<int>& nodes) {
  std::unordered_map<int, int> local;
  for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<int>(i);
  std::vector<Edge> out;
  for (const Edge& e : g.edges) {
    auto a = local.find(e.u);
    auto b = local.find(e.v);
    if (a != local.end() && b != local.end())
      out.push_back({std::min(a->second, b->second), std::max(a->second, b->second)});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<int> find_role(const AttributedGraph& g, NodeRole role) {
  for (std::size_t i = 0; i < g.roles.size(); ++i)
    if (g.roles[i] == role) return static_cast<int>(i);
  return std::nullopt;
}

std::vector<int> degrees(int num_nodes, const std::vector<Edge>& edges) {
  std::vector<int> d(static_cast<std::size_t>(num_nodes), 0);
  for (const Edge& e : edges) {
    ++d[e.u];
    ++d[e.v];
  }
  return d;
}

}  // namespace causalign
