#include <algorithm>
#include <numeric>

#include "causalign/errors.hpp"
#include "causalign/rng.hpp"
#include "causalign/synthgraph.hpp"

namespace causalign::synth {
namespace {

// Smallest majority count for a ring of `size`, or -1 if none is feasible.
int min_majority(int size, int margin, double share) {
  for (int c = std::max(1, margin); c <= size; ++c) {
    const int rest = size - c;
    const int cap = c - margin;
    if (rest <= (kNumClasses - 1) * cap && c >= share * size) return c;
  }
  return -1;
}

std::vector<int> ring_classes(Rng& rng, int size, int majority, const NodeTaskConfig& c) {
  const int lo = min_majority(size, c.majority_margin, c.majority_share);
  const int count = static_cast<int>(rng.uniform_int(lo, size));
  const int cap = count - c.majority_margin;
  std::vector<int> classes(static_cast<std::size_t>(count), majority);
  std::vector<int> other_count(kNumClasses, 0);
  for (int i = count; i < size; ++i) {
    std::vector<int> open;
    for (int k = 0; k < kNumClasses; ++k)
      if (k != majority && other_count[k] < cap) open.push_back(k);
    const int k = open[rng.index(open.size())];
    ++other_count[k];
    classes.push_back(k);
  }
  rng.shuffle(classes);
  return classes;
}

std::vector<std::vector<int>> entries_by_class(const std::vector<SyntheticEntry>& vocab) {
  std::vector<std::vector<int>> by(kNumClasses);
  for (std::size_t i = 0; i < vocab.size(); ++i) by[vocab[i].cls].push_back(static_cast<int>(i));
  return by;
}

int pick_entry(Rng& rng, const std::vector<SyntheticEntry>& vocab, const std::vector<std::vector<int>>& by_class,
               int cls, int parent_entry, double affinity) {
  if (by_class[cls].empty())
    throw InvalidParams("vocabulary has no entry of class " + std::to_string(cls));
  if (parent_entry >= 0 && rng.bernoulli(affinity)) {
    std::vector<int> linked;
    for (int r : vocab[parent_entry].related)
      if (vocab[r].cls == cls) linked.push_back(r);
    if (!linked.empty()) return linked[rng.index(linked.size())];
  }
  return by_class[cls][rng.index(by_class[cls].size())];
}

void fill_payload(AttributedGraph& g, const std::vector<SyntheticEntry>& vocab, const std::vector<int>& entries) {
  g.features.assign(static_cast<std::size_t>(g.num_nodes), {});
  g.node_class.assign(static_cast<std::size_t>(g.num_nodes), 0);
  for (int u = 0; u < g.num_nodes; ++u) {
    g.features[u].entry = entries[u];
    g.node_class[u] = vocab[entries[u]].cls;
  }
}

}  // namespace

void validate(const NodeTaskConfig& c) {
  if (c.max_distance != 3) throw InvalidParams("node task: max_distance must be 3");
  if (c.majority_margin < 1) throw InvalidParams("node task: majority_margin must be >= 1");
  if (!(c.majority_share >= 0.0 && c.majority_share <= 1.0))
    throw InvalidParams("node task: majority_share must lie in [0, 1]");
  if (!(c.homophily >= 0.0 && c.homophily <= 1.0)) throw InvalidParams("node task: homophily must lie in [0, 1]");
  if (!(c.extra_edge_rate >= 0.0 && c.extra_edge_rate <= 10.0))
    throw InvalidParams("node task: extra_edge_rate must lie in [0, 10]");
  if (!(c.link_affinity >= 0.0 && c.link_affinity <= 1.0))
    throw InvalidParams("node task: link_affinity must lie in [0, 1]");
  for (std::size_t k = 0; k < c.ring_sizes.size(); ++k) {
    const auto [lo, hi] = c.ring_sizes[k];
    if (lo < 1 || hi < lo || hi > 1000)
      throw InvalidParams("node task: ring " + std::to_string(k + 1) + " size range must satisfy 1 <= lo <= hi <= 1000");
    for (int s = lo; s <= hi; ++s)
      if (min_majority(s, c.majority_margin, c.majority_share) < 0)
        throw InvalidParams("node task: a ring of " + std::to_string(s) + " nodes cannot have a majority with margin " +
                            std::to_string(c.majority_margin) + " and share " + std::to_string(c.majority_share));
  }
}

AttributedGraph build_node_sample(const std::vector<SyntheticEntry>& vocab, const NodeTaskConfig& c,
                                  const causal::CausalModel& h_node, std::uint64_t seed) {
  if (vocab.empty()) throw InvalidParams("node sample: vocabulary is empty");
  validate(c);
  Rng rng(seed);
  const auto by_class = entries_by_class(vocab);

  const int target_class = static_cast<int>(rng.index(kNumClasses));
  std::vector<int> classes{target_class};
  std::vector<NodeRole> roles{{0, 0}};
  std::vector<std::vector<int>> ring_nodes{{0}};
  int previous = target_class;
  for (int k = 1; k <= c.max_distance; ++k) {
    const auto [lo, hi] = c.ring_sizes[k - 1];
    const int size = static_cast<int>(rng.uniform_int(lo, hi));
    const int majority = rng.bernoulli(c.homophily) ? previous : static_cast<int>(rng.index(kNumClasses));
    std::vector<int> members;
    for (int cls : ring_classes(rng, size, majority, c)) {
      members.push_back(static_cast<int>(classes.size()));
      roles.push_back({k, static_cast<int>(members.size()) - 1});
      classes.push_back(cls);
    }
    ring_nodes.push_back(std::move(members));
    previous = majority;
  }

  AttributedGraph g;
  g.num_nodes = static_cast<int>(classes.size());
  g.roles = roles;
  g.target = 0;
  std::vector<int> parent(static_cast<std::size_t>(g.num_nodes), -1);
  for (int k = 1; k <= c.max_distance; ++k)
    for (int u : ring_nodes[k]) {
      const auto& up = ring_nodes[k - 1];
      parent[u] = up[rng.index(up.size())];
      add_edge(g, parent[u], u);
    }
  const int extra = static_cast<int>(std::lround(c.extra_edge_rate * g.num_nodes));
  for (int i = 0; i < extra; ++i) {
    const int u = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(g.num_nodes - 1)));
    const int ring = roles[u].group;
    std::vector<int> targets;
    for (int k = std::max(1, ring - 1); k <= std::min(c.max_distance, ring + 1); ++k)
      for (int w : ring_nodes[k])
        if (w != u) targets.push_back(w);
    if (!targets.empty()) add_edge(g, u, targets[rng.index(targets.size())]);
  }

  std::vector<int> entries(static_cast<std::size_t>(g.num_nodes), -1);
  for (int u = 0; u < g.num_nodes; ++u)
    entries[u] = pick_entry(rng, vocab, by_class, classes[u], parent[u] >= 0 ? entries[parent[u]] : -1,
                            c.link_affinity);
  fill_payload(g, vocab, entries);
  g.label = causal::evaluate(h_node, g).output(h_node);
  validate(g, kNumClasses);
  return g;
}

// ---- graph-level ---------------------------------------------------------------

namespace {

std::vector<TopologySpec> host_candidates(TopologyKind kind, SizeRange r) {
  std::vector<TopologySpec> out;
  const auto in_range = [&](int n) { return n >= r.lo && n <= r.hi; };
  using K = TopologyKind;
  switch (kind) {
    case K::Grid:
      for (int rows = 2; rows <= 6; ++rows)
        for (int cols = rows; cols <= 6; ++cols)
          if (rows * cols >= 6 && in_range(rows * cols)) out.push_back({kind, {{"rows", rows}, {"cols", cols}}});
      break;
    case K::Tree:
      for (int b = 2; b <= 4; ++b)
        for (int h = 2; h <= 4; ++h) {
          TopologySpec s{kind, {{"branching", b}, {"height", h}}};
          if (in_range(topology_node_count(s))) out.push_back(s);
        }
      break;
    case K::Circle:
    case K::Chain:
      for (int n = std::max(3, r.lo); n <= r.hi; ++n) out.push_back({kind, {{"n", n}}});
      break;
    case K::Star:
      for (int n = std::max(4, r.lo); n <= r.hi; ++n) out.push_back({kind, {{"n", n}}});
      break;
    case K::Complete:
      for (int n = std::max(3, r.lo); n <= r.hi; ++n) out.push_back({kind, {{"n", n}}});
      break;
    case K::ChordalCycle:
      for (int n = std::max(5, r.lo); n <= r.hi; ++n)
        for (int chords = 1; chords <= std::min(3, n * (n - 3) / 2); ++chords)
          out.push_back({kind, {{"n", n}, {"chords", chords}}});
      break;
    case K::Bipartite:
      for (int a = 2; a <= r.hi; ++a)
        for (int b = a; a + b <= r.hi; ++b)
          if (in_range(a + b)) out.push_back({kind, {{"left", a}, {"right", b}}});
      break;
    case K::Wheel:
      for (int outer = std::max(4, r.lo - 1); outer + 1 <= r.hi; ++outer) out.push_back({kind, {{"outer", outer}}});
      break;
    case K::Fixed:
      if (in_range(fixed_topology_nodes())) out.push_back({kind, {}});
      break;
  }
  return out;
}

template <std::size_t N>
std::optional<int> family_tag(const TopologyKind (&family)[N], TopologyKind k) {
  for (std::size_t i = 0; i < N; ++i)
    if (family[i] == k) return static_cast<int>(i);
  return std::nullopt;
}

constexpr int kGraphAttempts = 200;

}  // namespace

void validate(const GraphTaskConfig& c) {
  if (c.motif_kinds.empty() || c.theory_kinds.empty())
    throw InvalidParams("graph task: both structure families need at least one kind");
  for (auto k : c.motif_kinds) {
    if (!family_tag(kMotifFamily, k))
      throw InvalidParams("graph task: '" + std::string(to_string(k)) + "' is not a motif-family structure");
    if (host_candidates(k, c.motif_nodes).empty())
      throw InvalidParams("graph task: no '" + std::string(to_string(k)) + "' fits the motif size range");
  }
  for (auto k : c.theory_kinds) {
    if (!family_tag(kTheoryFamily, k))
      throw InvalidParams("graph task: '" + std::string(to_string(k)) + "' is not a graph-theory-family structure");
    if (host_candidates(k, c.theory_nodes).empty())
      throw InvalidParams("graph task: no '" + std::string(to_string(k)) + "' fits the graph-theory size range");
  }
  for (int s = 0; s < kGammaSlots; ++s) {
    const double p = c.gamma_presence[s];
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidParams("graph task: gamma presence must lie in [0, 1]");
    if (p > 0.0 && c.gamma_shapes[s].empty())
      throw InvalidParams("graph task: gamma slot " + std::to_string(s + 1) + " is planted but lists no shapes");
    for (auto shape : c.gamma_shapes[s]) gamma_tag(s, shape);
  }
}

GraphTaskConfig full_scale_graph_config() {
  GraphTaskConfig c;
  c.gamma_presence = {0.5, 0.5, 0.5};
  return c;
}

AttributedGraph build_graph_sample(const std::vector<SyntheticEntry>& vocab, const GraphTaskConfig& c,
                                   const causal::CausalModel& h_graph, std::uint64_t seed) {
  if (vocab.empty()) throw InvalidParams("graph sample: vocabulary is empty");
  validate(c);
  Rng rng(seed);
  for (int attempt = 0; attempt < kGraphAttempts; ++attempt) {
    const TopologyKind motif = c.motif_kinds[rng.index(c.motif_kinds.size())];
    const TopologyKind theory = c.theory_kinds[rng.index(c.theory_kinds.size())];
    const auto motif_specs = host_candidates(motif, c.motif_nodes);
    const auto theory_specs = host_candidates(theory, c.theory_nodes);
    const TopologySpec ms = motif_specs[rng.index(motif_specs.size())];
    const TopologySpec ts = theory_specs[rng.index(theory_specs.size())];
    const AttributedGraph host1 = gen_topology(ms, rng.next());
    const AttributedGraph host2 = gen_topology(ts, rng.next());

    AttributedGraph g;
    std::vector<PlantedStructure> parts;
    const auto place = [&](int slot, int tag, int n, const std::vector<Edge>& edges) {
      PlantedStructure p{slot, tag, {}};
      for (int i = 0; i < n; ++i) p.nodes.push_back(g.num_nodes + i);
      const int base = g.num_nodes;
      g.num_nodes += n;
      for (const Edge& e : edges) add_edge(g, base + e.u, base + e.v);
      for (int i = 0; i < n; ++i) g.roles.push_back({slot, i});
      parts.push_back(std::move(p));
    };
    place(causal::kSlotOmega1, *family_tag(kMotifFamily, motif), host1.num_nodes, host1.edges);
    place(causal::kSlotOmega2, *family_tag(kTheoryFamily, theory), host2.num_nodes, host2.edges);
    const int host_nodes = g.num_nodes;
    add_edge(g, parts[0].nodes[rng.index(parts[0].nodes.size())], parts[1].nodes[rng.index(parts[1].nodes.size())]);
    for (int s = 0; s < kGammaSlots; ++s) {
      if (!rng.bernoulli(c.gamma_presence[s])) continue;
      const GammaShape shape = c.gamma_shapes[s][rng.index(c.gamma_shapes[s].size())];
      place(causal::kSlotGamma0 + s, gamma_tag(s, shape), kGammaSizes[s], gamma_edges(shape));
      const auto& planted = parts.back().nodes;
      add_edge(g, planted[rng.index(planted.size())], static_cast<int>(rng.index(host_nodes)));
    }
    g.structures = parts;

    std::vector<int> entries(static_cast<std::size_t>(g.num_nodes));
    for (int& e : entries) e = static_cast<int>(rng.index(vocab.size()));
    fill_payload(g, vocab, entries);

    // Keep the sample only if every planted structure is recognised as planned.
    const auto trace = causal::evaluate(h_graph, g);
    bool ok = true;
    for (const auto& p : parts) {
      const std::string var = p.slot == causal::kSlotOmega1   ? "Omega1"
                              : p.slot == causal::kSlotOmega2 ? "Omega2"
                                                              : "Gamma" + std::to_string(p.slot - causal::kSlotGamma0 + 1);
      if (trace.at(h_graph, var) != p.tag) ok = false;
    }
    if (!ok) continue;
    g.label = trace.output(h_graph);
    validate(g, kNumClasses);
    return g;
  }
  throw InvalidParams("graph sample: no recognisable structure combination after " +
                      std::to_string(kGraphAttempts) + " attempts");
}

}  // namespace causalign::synth
