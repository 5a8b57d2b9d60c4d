#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "causalign/causal.hpp"
#include "causalign/errors.hpp"
#include "causalign/rng.hpp"
#include "causalign/topology.hpp"

namespace causalign::causal {

// ---- lookup tables -----------------------------------------------------------

std::size_t LookupTable::index(std::span<const Value> key) const {
  if (key.size() != domains.size())
    throw InvalidParams("lookup key has " + std::to_string(key.size()) + " components, table expects " +
                        std::to_string(domains.size()));
  std::size_t idx = 0;
  for (std::size_t k = 0; k < key.size(); ++k) {
    if (key[k] < 0 || key[k] >= domains[k])
      throw InvalidParams("lookup key component " + std::to_string(k) + " = " + std::to_string(key[k]) +
                          " outside [0," + std::to_string(domains[k]) + ")");
    idx = idx * static_cast<std::size_t>(domains[k]) + static_cast<std::size_t>(key[k]);
  }
  return idx;
}

nlohmann::json LookupTable::to_json() const {
  return {{"domains", domains}, {"num_classes", num_classes}, {"entries", entries}};
}

LookupTable LookupTable::from_json(const nlohmann::json& j) {
  LookupTable t;
  t.domains = j.at("domains").get<std::vector<int>>();
  t.num_classes = j.at("num_classes").get<int>();
  t.entries = j.at("entries").get<std::vector<int>>();
  std::size_t expected = 1;
  for (int d : t.domains) {
    if (d < 1) throw InvalidParams("lookup table has an empty domain");
    expected *= static_cast<std::size_t>(d);
  }
  if (t.entries.size() != expected)
    throw InvalidParams("lookup table has " + std::to_string(t.entries.size()) + " entries, expected " +
                        std::to_string(expected));
  for (int e : t.entries)
    if (e < 0 || e >= t.num_classes) throw InvalidParams("lookup table entry outside [0, num_classes)");
  return t;
}

void check_table(const LookupTable& t) {
  std::vector<bool> seen(static_cast<std::size_t>(t.num_classes), false);
  for (int e : t.entries) seen[e] = true;
  for (int c = 0; c < t.num_classes; ++c)
    if (!seen[c]) throw InvalidParams("lookup table never produces class " + std::to_string(c));

  // Position k is influential if two keys differing only at k map apart.
  std::size_t stride = t.entries.size();
  for (std::size_t k = 0; k < t.domains.size(); ++k) {
    const auto d = static_cast<std::size_t>(t.domains[k]);
    stride /= d;
    bool influential = false;
    for (std::size_t i = 0; i < t.entries.size() && !influential; ++i) {
      const std::size_t digit = (i / stride) % d;
      if (digit + 1 < d && t.entries[i] != t.entries[i + stride]) influential = true;
    }
    if (d > 1 && !influential)
      throw InvalidParams("lookup table ignores input position " + std::to_string(k));
  }
}

namespace {

using Votes = std::vector<std::pair<int, double>>;  // (class, weight)

// Enumerates every key over `domains`, sums the votes and maps the winning
// class through `perm`. Returns false if some key has a near tie.
bool fill_votes(LookupTable& t, const std::function<Votes(std::span<const Value>)>& votes,
                const std::vector<int>& perm) {
  std::vector<Value> key(t.domains.size(), 0);
  std::vector<double> score(static_cast<std::size_t>(t.num_classes));
  t.entries.assign(std::accumulate(t.domains.begin(), t.domains.end(), std::size_t{1},
                                   [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); }),
                   0);
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    std::size_t rest = i;
    for (std::size_t k = t.domains.size(); k-- > 0;) {
      key[k] = static_cast<Value>(rest % static_cast<std::size_t>(t.domains[k]));
      rest /= static_cast<std::size_t>(t.domains[k]);
    }
    std::fill(score.begin(), score.end(), 0.0);
    for (const auto& [c, w] : votes(key)) score[c] += w;
    std::vector<int> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
    if (score[order[0]] - score[order[1]] < 1e-6) return false;
    t.entries[i] = perm[order[0]];
  }
  return true;
}

std::vector<int> class_permutation(int num_classes, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(num_classes));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  return perm;
}

constexpr int kTableAttempts = 1000;

}  // namespace

LookupTable make_node_table(int num_classes, const NodeTableWeights& w, std::uint64_t seed) {
  if (num_classes < 2) throw InvalidParams("node table needs at least 2 classes");
  if (w.jitter < 0.0 || w.jitter >= 1.0) throw InvalidParams("node table jitter must lie in [0, 1)");
  const int c = num_classes;
  Rng rng(seed);
  for (int attempt = 0; attempt < kTableAttempts; ++attempt) {
    const auto jit = [&](double base) { return base * rng.uniform(1.0 - w.jitter, 1.0 + w.jitter); };
    const std::array<double, 6> wt = {jit(w.phi1_self), jit(w.phi1_ring1), jit(w.phi2_self),
                                      jit(w.phi2_ring1), jit(w.phi2_ring2), jit(w.ring3)};
    const auto perm = class_permutation(c, rng);
    LookupTable t;
    t.domains = {c * c, c * c * c, c};
    t.num_classes = c;
    const auto votes = [&](std::span<const Value> k) {
      const int phi1 = k[0], phi2 = k[1], psi3 = k[2];
      return Votes{{phi1 / c, wt[0]},
                   {phi1 % c, wt[1]},
                   {phi2 / (c * c), wt[2]},
                   {(phi2 / c) % c, wt[3]},
                   {phi2 % c, wt[4]},
                   {psi3, wt[5]}};
    };
    if (!fill_votes(t, votes, perm)) continue;
    try {
      check_table(t);
    } catch (const InvalidParams&) {
      continue;
    }
    return t;
  }
  throw InvalidParams("node table weights admit no tie-free surjective table");
}

LookupTable make_graph_table(int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw InvalidParams("graph table needs at least 2 classes");
  Rng rng(seed);
  const std::vector<int> domains = {synth::gamma_domain(0), synth::gamma_domain(1), synth::gamma_domain(2),
                                    static_cast<int>(std::size(synth::kMotifFamily)),
                                    static_cast<int>(std::size(synth::kTheoryFamily))};
  for (int attempt = 0; attempt < kTableAttempts; ++attempt) {
    // Each variable value votes for a seeded class with a seeded weight.
    std::vector<std::vector<int>> vote_class(domains.size());
    std::vector<double> weight(domains.size());
    for (std::size_t k = 0; k < domains.size(); ++k) {
      weight[k] = rng.uniform(0.5, 1.5);
      for (int v = 0; v < domains[k]; ++v) vote_class[k].push_back(static_cast<int>(rng.index(num_classes)));
    }
    LookupTable t;
    t.domains = domains;
    t.num_classes = num_classes;
    const auto votes = [&](std::span<const Value> key) {
      Votes out;
      for (std::size_t k = 0; k < key.size(); ++k) out.push_back({vote_class[k][key[k]], weight[k]});
      return out;
    };
    if (!fill_votes(t, votes, class_permutation(num_classes, rng))) continue;
    try {
      check_table(t);
    } catch (const InvalidParams&) {
      continue;
    }
    return t;
  }
  throw InvalidParams("no tie-free surjective graph table found");
}

// ---- models -------------------------------------------------------------------

namespace {

int require_target(const AttributedGraph& g, const std::string& model) {
  if (!g.target) throw GraphStructureError(model + ": graph '" + g.id + "' has no target node");
  return *g.target;
}

}  // namespace

CausalModel make_h_majority(int num_neighbors, int num_classes) {
  if (num_neighbors < 1 || num_classes < 2) throw InvalidParams("h_majority needs >= 1 neighbour and >= 2 classes");
  std::vector<VariableSpec> vars;
  std::vector<std::string> inputs;
  for (int k = 0; k < num_neighbors; ++k) {
    const std::string name = "C_u" + std::to_string(k + 1);
    inputs.push_back(name);
    vars.push_back({name, num_classes, {}, [k, num_neighbors](std::span<const Value>, const AttributedGraph& g) {
                      const int v = require_target(g, "h_majority");
                      std::vector<int> nb;
                      for (const Edge& e : g.edges) {
                        if (e.u == v) nb.push_back(e.v);
                        if (e.v == v) nb.push_back(e.u);
                      }
                      if (static_cast<int>(nb.size()) != num_neighbors)
                        throw GraphStructureError("h_majority: target of '" + g.id + "' has " +
                                                  std::to_string(nb.size()) + " neighbours, expected " +
                                                  std::to_string(num_neighbors));
                      std::sort(nb.begin(), nb.end());
                      return g.node_class[nb[k]];
                    }});
  }
  vars.push_back({"C_v", num_classes, inputs, [num_classes](std::span<const Value> p, const AttributedGraph&) {
                    std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
                    for (Value c : p) ++count[c];
                    return static_cast<Value>(std::max_element(count.begin(), count.end()) - count.begin());
                  }});
  return CausalModel("h_majority", std::move(vars), "C_v");
}

Value ring_majority(const AttributedGraph& g, int ring) {
  const int v = require_target(g, "h_node");
  const auto dist = bfs_distances(g, v);
  int num_classes = 0;
  for (int c : g.node_class) num_classes = std::max(num_classes, c + 1);
  std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
  int members = 0;
  for (int u = 0; u < g.num_nodes; ++u)
    if (dist[u] == ring) {
      ++count[g.node_class[u]];
      ++members;
    }
  if (members == 0)
    throw GraphStructureError("h_node: graph '" + g.id + "' has no node at distance " + std::to_string(ring));
  const auto best = std::max_element(count.begin(), count.end());
  if (std::count(count.begin(), count.end(), *best) > 1)
    throw GraphStructureError("h_node: ring " + std::to_string(ring) + " of graph '" + g.id +
                              "' has no strict majority class");
  return static_cast<Value>(best - count.begin());
}

CausalModel make_h_node(const LookupTable& table) {
  const int c = table.num_classes;
  if (table.domains != std::vector<int>{c * c, c * c * c, c})
    throw InvalidParams("h_node: lookup table domains do not match (Phi1, Phi2, Psi3)");
  std::vector<VariableSpec> vars;
  vars.push_back({"C_v", c, {}, [](std::span<const Value>, const AttributedGraph& g) {
                    return g.node_class[require_target(g, "h_node")];
                  }});
  for (int k = 1; k <= kNodeRings; ++k)
    vars.push_back({"Psi" + std::to_string(k), c, {},
                    [k](std::span<const Value>, const AttributedGraph& g) { return ring_majority(g, k); }});
  vars.push_back({"Phi1", c * c, {"C_v", "Psi1"},
                  [c](std::span<const Value> p, const AttributedGraph&) { return p[0] * c + p[1]; }});
  vars.push_back({"Phi2", c * c * c, {"C_v", "Psi1", "Psi2"},
                  [c](std::span<const Value> p, const AttributedGraph&) { return (p[0] * c + p[1]) * c + p[2]; }});
  vars.push_back({"Y", c, {"Phi1", "Phi2", "Psi3"},
                  [table](std::span<const Value> p, const AttributedGraph&) { return table(p); }});
  CausalModel m("h_node", std::move(vars), "Y");
  m.tables["Y"] = table.to_json();
  return m;
}

namespace {

const PlantedStructure* find_slot(const AttributedGraph& g, int slot) {
  for (const auto& s : g.structures)
    if (s.slot == slot) return &s;
  return nullptr;
}

}  // namespace

CausalModel make_h_graph(const LookupTable& table) {
  const std::vector<int> expected = {synth::gamma_domain(0), synth::gamma_domain(1), synth::gamma_domain(2),
                                     static_cast<int>(std::size(synth::kMotifFamily)),
                                     static_cast<int>(std::size(synth::kTheoryFamily))};
  if (table.domains != expected) throw InvalidParams("h_graph: lookup table domains do not match the tag domains");
  std::vector<VariableSpec> vars;
  for (int s = 0; s < synth::kGammaSlots; ++s)
    vars.push_back({"Gamma" + std::to_string(s + 1), synth::gamma_domain(s), {},
                    [s](std::span<const Value>, const AttributedGraph& g) -> Value {
                      const PlantedStructure* p = find_slot(g, kSlotGamma0 + s);
                      if (p == nullptr) return 0;
                      const auto tag = synth::recognise_gamma(s, static_cast<int>(p->nodes.size()),
                                                              induced_edges(g, p->nodes));
                      if (!tag)
                        throw GraphStructureError("h_graph: gamma slot " + std::to_string(s + 1) + " of '" + g.id +
                                                  "' matches no known substructure");
                      return *tag;
                    }});
  const auto omega = [](int slot, bool motif) {
    return [slot, motif](std::span<const Value>, const AttributedGraph& g) -> Value {
      const PlantedStructure* p = find_slot(g, slot);
      if (p == nullptr)
        throw GraphStructureError("h_graph: graph '" + g.id + "' has no " + (motif ? "motif" : "graph-theory") +
                                  " structure");
      const auto edges = induced_edges(g, p->nodes);
      const int n = static_cast<int>(p->nodes.size());
      const auto tag = motif ? synth::recognise_motif(n, edges) : synth::recognise_theory(n, edges);
      if (!tag) throw GraphStructureError("h_graph: structure of '" + g.id + "' matches no family member");
      return *tag;
    };
  };
  vars.push_back({"Omega1", static_cast<int>(std::size(synth::kMotifFamily)), {}, omega(kSlotOmega1, true)});
  vars.push_back({"Omega2", static_cast<int>(std::size(synth::kTheoryFamily)), {}, omega(kSlotOmega2, false)});
  vars.push_back({"Y", table.num_classes, {"Gamma1", "Gamma2", "Gamma3", "Omega1", "Omega2"},
                  [table](std::span<const Value> p, const AttributedGraph&) { return table(p); }});
  CausalModel m("h_graph", std::move(vars), "Y");
  m.tables["Y"] = table.to_json();
  return m;
}

}  // namespace causalign::causal
