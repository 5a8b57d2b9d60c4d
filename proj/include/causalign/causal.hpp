#pragma once

// Structural-equation models over graph inputs, their traces, and
// interchange interventions on named variables.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalign/graph.hpp"

namespace causalign::causal {

using Value = int;
using Equation = std::function<Value(std::span<const Value> parents, const AttributedGraph& g)>;

struct VariableSpec {
  std::string name;
  int domain = 0;  // values lie in [0, domain)
  std::vector<std::string> parents;
  Equation equation;
};

class CausalModel {
 public:
  // Throws InvalidParams on unknown parents, duplicate names, a cycle, or an
  // unknown output name.
  CausalModel(std::string name, std::vector<VariableSpec> variables, const std::string& output);

  const std::string& name() const { return name_; }
  std::size_t size() const { return vars_.size(); }
  const std::string& variable_name(int v) const { return vars_[v].name; }
  int domain(int v) const { return vars_[v].domain; }
  const std::vector<int>& parents(int v) const { return parents_[v]; }
  int output() const { return output_; }
  const std::vector<int>& topo_order() const { return order_; }
  // Throws InvalidParams naming the model for an unknown variable.
  int index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  // Strict descendants of any root.
  std::vector<bool> descendants(std::span<const int> roots) const;
  Value compute(int v, std::span<const Value> parent_values, const AttributedGraph& g) const;

  nlohmann::json tables;  // lookup tables persisted alongside datasets

 private:
  std::string name_;
  std::vector<VariableSpec> vars_;
  std::vector<std::vector<int>> parents_;
  std::vector<int> order_;
  int output_ = 0;
};

struct CausalTrace {
  std::string input_id;
  std::vector<Value> values;  // indexed like the model's variables

  Value operator[](int v) const { return values[v]; }
  Value at(const CausalModel& m, std::string_view name) const { return values[m.index_of(name)]; }
  Value output(const CausalModel& m) const { return values[m.output()]; }
};

// The intervened variable set Z^h.
class HighVariableSet {
 public:
  // Throws InvalidParams when empty, unknown, or containing the output.
  HighVariableSet(const CausalModel& m, std::vector<std::string> names);
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& indices() const { return indices_; }
  std::string label() const;

 private:
  std::vector<std::string> names_;
  std::vector<int> indices_;
};

CausalTrace evaluate(const CausalModel& m, const AttributedGraph& g);

// Trace of `g_orig` with Zh pinned to the donor trace's values and only the
// descendants of Zh recomputed.
CausalTrace intervene_trace(const CausalModel& m, const AttributedGraph& g_orig,
                            const CausalTrace& orig, const CausalTrace& donor,
                            const HighVariableSet& zh);
Value intervene_high(const CausalModel& m, const AttributedGraph& g_orig,
                     const AttributedGraph& g_diff, const HighVariableSet& zh);

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

// Ordered pairs (orig, diff), orig != diff, whose intervened output differs
// from the original output. Sorted lexicographically.
PairList changed_pairs(const CausalModel& m, std::span<const AttributedGraph> dataset,
                       const HighVariableSet& zh);
PairList changed_pairs(const CausalModel& m, std::span<const AttributedGraph> dataset,
                       std::span<const CausalTrace> traces, const HighVariableSet& zh);

// ---- lookup tables -----------------------------------------------------------

struct LookupTable {
  std::vector<int> domains;
  int num_classes = 0;
  std::vector<int> entries;  // row-major over `domains`

  std::size_t index(std::span<const Value> key) const;
  Value operator()(std::span<const Value> key) const { return entries[index(key)]; }
  nlohmann::json to_json() const;
  static LookupTable from_json(const nlohmann::json& j);
};

// Throws InvalidParams unless every class is produced and every input
// position changes the output for at least one setting of the others.
void check_table(const LookupTable& t);

// Weights of the class votes cast by each component of (Φ₁, Φ₂, Ψ₃); every
// weight is jittered by a seeded factor in [1 - jitter, 1 + jitter].
struct NodeTableWeights {
  double phi1_self = 3.0;
  double phi1_ring1 = 2.0;
  double phi2_self = 1.0;
  double phi2_ring1 = 1.0;
  double phi2_ring2 = 1.6;
  double ring3 = 1.1;
  double jitter = 0.1;
};

LookupTable make_node_table(int num_classes, const NodeTableWeights& w, std::uint64_t seed);
LookupTable make_graph_table(int num_classes, std::uint64_t seed);

// ---- built-in models -----------------------------------------------------------

// Running example: variables C_u1..C_uK (class of the k-th neighbour of the
// target, neighbours ordered by id) and output C_v, their plurality class
// with ties going to the lowest class index.
CausalModel make_h_majority(int num_neighbors, int num_classes);

// Node-level model. Variables: C_v (target class), Psi1..Psi3 (strict
// majority class of ring 1..3), Phi1 = (C_v, Psi1), Phi2 = (C_v, Psi1, Psi2),
// Y = table(Phi1, Phi2, Psi3).
CausalModel make_h_node(const LookupTable& table);
inline constexpr int kNodeRings = 3;
Value ring_majority(const AttributedGraph& g, int ring);

// Graph-level model. Variables: Gamma1..Gamma3 (planted substructure tags,
// 0 = absent), Omega1 (motif family tag), Omega2 (graph-theory family tag),
// Y = table(Gamma1, Gamma2, Gamma3, Omega1, Omega2).
CausalModel make_h_graph(const LookupTable& table);
// Structure slots used by graph-level samples and roles.
inline constexpr int kSlotOmega1 = 0;
inline constexpr int kSlotOmega2 = 1;
inline constexpr int kSlotGamma0 = 2;

}  // namespace causalign::causal
