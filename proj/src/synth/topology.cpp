#include "causalign/topology.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "causalign/errors.hpp"
#include "causalign/rng.hpp"

namespace causalign::synth {
namespace {

constexpr int kMaxNodes = 10000;

struct KindInfo {
  TopologyKind kind;
  std::string_view name;
  std::vector<std::string> params;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table = {
      {TopologyKind::Grid, "grid", {"rows", "cols"}},
      {TopologyKind::Circle, "circle", {"n"}},
      {TopologyKind::Chain, "chain", {"n"}},
      {TopologyKind::Tree, "tree", {"branching", "height"}},
      {TopologyKind::Star, "star", {"n"}},
      {TopologyKind::Complete, "complete", {"n"}},
      {TopologyKind::ChordalCycle, "chordal_cycle", {"n", "chords"}},
      {TopologyKind::Bipartite, "bipartite", {"left", "right"}},
      {TopologyKind::Wheel, "wheel", {"outer"}},
      {TopologyKind::Fixed, "fixed", {}},
  };
  return table;
}

const KindInfo& info(TopologyKind k) {
  for (const auto& i : kind_table())
    if (i.kind == k) return i;
  throw InvalidParams("unknown topology kind");
}

int param(const TopologySpec& s, const std::string& key) {
  auto it = s.params.find(key);
  if (it == s.params.end())
    throw InvalidParams(std::string(to_string(s.kind)) + ": missing param '" + key + "'");
  return it->second;
}

[[noreturn]] void reject(const TopologySpec& s, const std::string& why) {
  throw InvalidParams(std::string(to_string(s.kind)) + ": " + why);
}

long long tree_size(int branching, int height) {
  long long total = 1, level = 1;
  for (int h = 0; h < height; ++h) {
    level *= branching;
    total += level;
    if (total > kMaxNodes) return total;
  }
  return total;
}

std::vector<Edge> cycle_edges(int n, int offset = 0) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) {
    const int a = offset + i, b = offset + (i + 1) % n;
    e.push_back({std::min(a, b), std::max(a, b)});
  }
  return e;
}

std::vector<Edge> path_edges(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return e;
}

std::vector<Edge> grid_edges(int rows, int cols) {
  std::vector<Edge> e;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int id = r * cols + c;
      if (c + 1 < cols) e.push_back({id, id + 1});
      if (r + 1 < rows) e.push_back({id, id + cols});
    }
  return e;
}

std::vector<Edge> star_edges(int n) {
  std::vector<Edge> e;
  for (int i = 1; i < n; ++i) e.push_back({0, i});
  return e;
}

bool hamiltonian_cycle(int n, const std::vector<Edge>& edges) {
  if (n < 3 || n > 20) return false;
  const auto adj = adjacency_lists(n, edges);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  used[0] = 1;
  std::function<bool(int, int)> dfs = [&](int u, int depth) {
    if (depth == n) return std::find(adj[u].begin(), adj[u].end(), 0) != adj[u].end();
    for (int w : adj[u])
      if (!used[w]) {
        used[w] = 1;
        if (dfs(w, depth + 1)) return true;
        used[w] = 0;
      }
    return false;
  };
  return dfs(0, 1);
}

std::optional<std::pair<int, int>> bipartition(int n, const std::vector<Edge>& edges) {
  const auto adj = adjacency_lists(n, edges);
  std::vector<int> colour(static_cast<std::size_t>(n), -1);
  int sizes[2] = {0, 0};
  for (int s = 0; s < n; ++s) {
    if (colour[s] >= 0) continue;
    colour[s] = 0;
    ++sizes[0];
    std::vector<int> stack{s};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int w : adj[u]) {
        if (colour[w] < 0) {
          colour[w] = 1 - colour[u];
          ++sizes[colour[w]];
          stack.push_back(w);
        } else if (colour[w] == colour[u]) {
          return std::nullopt;
        }
      }
    }
  }
  return std::pair{sizes[0], sizes[1]};
}

bool isomorphic(int n, const std::vector<Edge>& a, const std::vector<Edge>& b) {
  if (a.size() != b.size()) return false;
  auto da = degrees(n, a), db = degrees(n, b);
  auto sa = da, sb = db;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa != sb) return false;
  std::vector<std::vector<char>> mb(n, std::vector<char>(n, 0));
  for (const Edge& e : b) mb[e.u][e.v] = mb[e.v][e.u] = 1;
  const auto adj_a = adjacency_lists(n, a);
  std::vector<int> map(static_cast<std::size_t>(n), -1);
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::function<bool(int)> place = [&](int u) {
    if (u == n) return true;
    for (int v = 0; v < n; ++v) {
      if (taken[v] || da[u] != db[v]) continue;
      bool ok = true;
      for (int w : adj_a[u])
        if (w < u && !mb[map[w]][v]) {
          ok = false;
          break;
        }
      // Edge counts match, so preserving every edge of `a` is enough.
      if (!ok) continue;
      map[u] = v;
      taken[v] = 1;
      if (place(u + 1)) return true;
      taken[v] = 0;
    }
    return false;
  };
  return place(0);
}

}  // namespace

std::string_view to_string(TopologyKind k) { return info(k).name; }

TopologyKind topology_from_string(std::string_view s) {
  for (const auto& i : kind_table())
    if (i.name == s) return i.kind;
  throw InvalidParams("unknown topology kind '" + std::string(s) + "'");
}

int fixed_topology_nodes() { return 7; }

const std::vector<Edge>& fixed_topology_edges() {
  // Two triangles joined through a bridge node pair: not Hamiltonian, not
  // bipartite, no universal vertex.
  static const std::vector<Edge> e = {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3},
                                      {3, 4}, {4, 5}, {4, 6}, {5, 6}};
  return e;
}

void validate_topology(const TopologySpec& s) {
  const auto& expected = info(s.kind).params;
  for (const auto& [key, value] : s.params)
    if (std::find(expected.begin(), expected.end(), key) == expected.end())
      reject(s, "unexpected param '" + key + "'");
  for (const auto& key : expected) param(s, key);
  const auto at_least = [&](const char* key, int lo) {
    const int v = param(s, key);
    if (v < lo) reject(s, std::string(key) + " must be >= " + std::to_string(lo) + ", got " + std::to_string(v));
  };
  switch (s.kind) {
    case TopologyKind::Grid:
      at_least("rows", 1);
      at_least("cols", 1);
      if (param(s, "rows") * param(s, "cols") < 2) reject(s, "grid needs at least 2 nodes");
      break;
    case TopologyKind::Circle: at_least("n", 3); break;
    case TopologyKind::Chain:
    case TopologyKind::Star:
    case TopologyKind::Complete: at_least("n", 2); break;
    case TopologyKind::Tree:
      at_least("branching", 1);
      at_least("height", 1);
      break;
    case TopologyKind::ChordalCycle: {
      at_least("n", 4);
      const int n = param(s, "n");
      const long long max_chords = static_cast<long long>(n) * (n - 3) / 2;
      const int chords = param(s, "chords");
      if (chords < 1 || chords > max_chords)
        reject(s, "chords must lie in [1, " + std::to_string(max_chords) + "], got " + std::to_string(chords));
      break;
    }
    case TopologyKind::Bipartite:
      at_least("left", 1);
      at_least("right", 1);
      break;
    case TopologyKind::Wheel: at_least("outer", 3); break;
    case TopologyKind::Fixed: break;
  }
  if (topology_node_count(s) > kMaxNodes) reject(s, "more than " + std::to_string(kMaxNodes) + " nodes");
}

int topology_node_count(const TopologySpec& s) {
  switch (s.kind) {
    case TopologyKind::Grid: return param(s, "rows") * param(s, "cols");
    case TopologyKind::Tree:
      return static_cast<int>(std::min<long long>(tree_size(param(s, "branching"), param(s, "height")), kMaxNodes + 1));
    case TopologyKind::Bipartite: return param(s, "left") + param(s, "right");
    case TopologyKind::Wheel: return param(s, "outer") + 1;
    case TopologyKind::Fixed: return fixed_topology_nodes();
    default: return param(s, "n");
  }
}

AttributedGraph gen_topology(const TopologySpec& s, std::uint64_t seed) {
  validate_topology(s);
  AttributedGraph g;
  g.num_nodes = topology_node_count(s);
  switch (s.kind) {
    case TopologyKind::Grid: g.edges = grid_edges(param(s, "rows"), param(s, "cols")); break;
    case TopologyKind::Circle: g.edges = cycle_edges(g.num_nodes); break;
    case TopologyKind::Chain: g.edges = path_edges(g.num_nodes); break;
    case TopologyKind::Star: g.edges = star_edges(g.num_nodes); break;
    case TopologyKind::Tree: {
      const int b = param(s, "branching");
      for (int child = 1; child < g.num_nodes; ++child) g.edges.push_back({(child - 1) / b, child});
      break;
    }
    case TopologyKind::Complete:
      for (int u = 0; u < g.num_nodes; ++u)
        for (int v = u + 1; v < g.num_nodes; ++v) g.edges.push_back({u, v});
      break;
    case TopologyKind::ChordalCycle: {
      g.edges = cycle_edges(g.num_nodes);
      std::vector<Edge> candidates;
      for (int u = 0; u < g.num_nodes; ++u)
        for (int v = u + 2; v < g.num_nodes; ++v)
          if (!(u == 0 && v == g.num_nodes - 1)) candidates.push_back({u, v});
      Rng rng(seed);
      rng.shuffle(candidates);
      const int chords = param(s, "chords");
      g.edges.insert(g.edges.end(), candidates.begin(), candidates.begin() + chords);
      break;
    }
    case TopologyKind::Bipartite: {
      const int a = param(s, "left");
      for (int u = 0; u < a; ++u)
        for (int v = a; v < g.num_nodes; ++v) g.edges.push_back({u, v});
      break;
    }
    case TopologyKind::Wheel: {
      const int outer = param(s, "outer");
      g.edges = cycle_edges(outer, 1);
      for (int i = 1; i <= outer; ++i) g.edges.push_back({0, i});
      break;
    }
    case TopologyKind::Fixed: g.edges = fixed_topology_edges(); break;
  }
  normalise_edges(g);
  return g;
}

bool has_shape(TopologyKind kind, int n, const std::vector<Edge>& edges) {
  if (n < 2 || !is_connected(n, edges)) return false;
  const auto deg = degrees(n, edges);
  const int e = static_cast<int>(edges.size());
  const int maxdeg = *std::max_element(deg.begin(), deg.end());
  const auto count_deg = [&](int d) { return static_cast<int>(std::count(deg.begin(), deg.end(), d)); };
  switch (kind) {
    case TopologyKind::Chain: return e == n - 1 && maxdeg <= 2;
    case TopologyKind::Circle: return n >= 3 && e == n && count_deg(2) == n;
    case TopologyKind::Star: return e == n - 1 && maxdeg == n - 1;
    case TopologyKind::Tree: return e == n - 1;
    case TopologyKind::Grid:
      for (int r = 2; r * r <= n; ++r) {
        if (n % r != 0) continue;
        const int c = n / r;
        if (e == r * (c - 1) + c * (r - 1) && count_deg(2) == 4 &&
            count_deg(3) == 2 * (r - 2) + 2 * (c - 2) && count_deg(4) == (r - 2) * (c - 2))
          return true;
      }
      return false;
    case TopologyKind::Complete: return e == n * (n - 1) / 2;
    case TopologyKind::ChordalCycle: return n >= 4 && e > n && hamiltonian_cycle(n, edges);
    case TopologyKind::Bipartite: {
      const auto parts = bipartition(n, edges);
      return parts && e == parts->first * parts->second;
    }
    case TopologyKind::Wheel:
      return n >= 4 && e == 2 * (n - 1) && count_deg(n - 1) >= 1 &&
             (count_deg(3) == n - 1 || (n == 4 && count_deg(3) == 4));
    case TopologyKind::Fixed:
      return n == fixed_topology_nodes() && isomorphic(n, edges, fixed_topology_edges());
  }
  return false;
}

namespace {

std::optional<int> family_index(std::span<const TopologyKind> family, TopologyKind k) {
  for (std::size_t i = 0; i < family.size(); ++i)
    if (family[i] == k) return static_cast<int>(i);
  return std::nullopt;
}

}  // namespace

std::optional<int> recognise_motif(int n, const std::vector<Edge>& edges) {
  using K = TopologyKind;
  if (has_shape(K::Chain, n, edges)) return family_index(kMotifFamily, K::Chain);
  if (n >= 4 && has_shape(K::Star, n, edges)) return family_index(kMotifFamily, K::Star);
  if (has_shape(K::Circle, n, edges)) return family_index(kMotifFamily, K::Circle);
  if (n >= 6 && has_shape(K::Grid, n, edges)) return family_index(kMotifFamily, K::Grid);
  if (has_shape(K::Tree, n, edges)) return family_index(kMotifFamily, K::Tree);
  return std::nullopt;
}

std::optional<int> recognise_theory(int n, const std::vector<Edge>& edges) {
  using K = TopologyKind;
  if (has_shape(K::Fixed, n, edges)) return family_index(kTheoryFamily, K::Fixed);
  if (n >= 3 && has_shape(K::Complete, n, edges)) return family_index(kTheoryFamily, K::Complete);
  if (n >= 5 && has_shape(K::Wheel, n, edges)) return family_index(kTheoryFamily, K::Wheel);
  if (has_shape(K::Bipartite, n, edges)) {
    const auto parts = bipartition(n, edges);
    if (parts->first >= 2 && parts->second >= 2) return family_index(kTheoryFamily, K::Bipartite);
  }
  if (has_shape(K::ChordalCycle, n, edges)) return family_index(kTheoryFamily, K::ChordalCycle);
  return std::nullopt;
}

// ---- Γ substructures ---------------------------------------------------------

namespace {

constexpr GammaShape kSlot0[] = {GammaShape::Triangle, GammaShape::Path3};
constexpr GammaShape kSlot1[] = {GammaShape::Cycle6, GammaShape::Star6, GammaShape::Path6};
constexpr GammaShape kSlot2[] = {GammaShape::Grid3x3, GammaShape::Cycle9, GammaShape::Path9};

constexpr std::pair<GammaShape, std::string_view> kGammaNames[] = {
    {GammaShape::Triangle, "triangle"}, {GammaShape::Path3, "path3"},
    {GammaShape::Cycle6, "cycle6"},     {GammaShape::Star6, "star6"},
    {GammaShape::Path6, "path6"},       {GammaShape::Grid3x3, "grid3x3"},
    {GammaShape::Cycle9, "cycle9"},     {GammaShape::Path9, "path9"}};

void check_slot(int slot) {
  if (slot < 0 || slot >= kGammaSlots) throw InvalidParams("gamma slot " + std::to_string(slot) + " out of range");
}

bool gamma_matches(GammaShape s, int n, const std::vector<Edge>& edges) {
  using K = TopologyKind;
  switch (s) {
    case GammaShape::Triangle: return n == 3 && has_shape(K::Complete, n, edges);
    case GammaShape::Path3:
    case GammaShape::Path6:
    case GammaShape::Path9: return has_shape(K::Chain, n, edges);
    case GammaShape::Cycle6:
    case GammaShape::Cycle9: return has_shape(K::Circle, n, edges);
    case GammaShape::Star6: return has_shape(K::Star, n, edges);
    case GammaShape::Grid3x3: return n == 9 && has_shape(K::Grid, n, edges);
  }
  return false;
}

}  // namespace

std::span<const GammaShape> gamma_shapes(int slot) {
  check_slot(slot);
  if (slot == 0) return kSlot0;
  if (slot == 1) return kSlot1;
  return kSlot2;
}

std::string_view to_string(GammaShape s) {
  for (const auto& [shape, name] : kGammaNames)
    if (shape == s) return name;
  return "?";
}

GammaShape gamma_shape_from_string(std::string_view s) {
  for (const auto& [shape, name] : kGammaNames)
    if (name == s) return shape;
  throw InvalidParams("unknown gamma shape '" + std::string(s) + "'");
}

int gamma_domain(int slot) { return static_cast<int>(gamma_shapes(slot).size()) + 1; }

int gamma_tag(int slot, GammaShape s) {
  const auto shapes = gamma_shapes(slot);
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (shapes[i] == s) return static_cast<int>(i) + 1;
  throw InvalidParams("shape '" + std::string(to_string(s)) + "' does not belong to gamma slot " +
                      std::to_string(slot + 1));
}

std::vector<Edge> gamma_edges(GammaShape s) {
  switch (s) {
    case GammaShape::Triangle: return cycle_edges(3);
    case GammaShape::Path3: return path_edges(3);
    case GammaShape::Cycle6: return cycle_edges(6);
    case GammaShape::Star6: return star_edges(6);
    case GammaShape::Path6: return path_edges(6);
    case GammaShape::Grid3x3: return grid_edges(3, 3);
    case GammaShape::Cycle9: return cycle_edges(9);
    case GammaShape::Path9: return path_edges(9);
  }
  return {};
}

std::optional<int> recognise_gamma(int slot, int n, const std::vector<Edge>& edges) {
  check_slot(slot);
  if (n != kGammaSizes[slot]) return std::nullopt;
  const auto shapes = gamma_shapes(slot);
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (gamma_matches(shapes[i], n, edges)) return static_cast<int>(i) + 1;
  return std::nullopt;
}

}  // namespace causalign::synth
