#pragma once

// Topology generators and recognisers for the ten host structures and the
// planted Γ substructures.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalign/graph.hpp"

namespace causalign::synth {

enum class TopologyKind { Grid, Circle, Chain, Tree, Star, Complete, ChordalCycle, Bipartite, Wheel, Fixed };

inline constexpr TopologyKind kAllTopologies[] = {
    TopologyKind::Grid,  TopologyKind::Circle,       TopologyKind::Chain,     TopologyKind::Tree,
    TopologyKind::Star,  TopologyKind::Complete,     TopologyKind::ChordalCycle,
    TopologyKind::Bipartite, TopologyKind::Wheel,    TopologyKind::Fixed};

// Motif family (Ω₁) and graph-theory family (Ω₂). A tag is the position in
// these lists.
inline constexpr TopologyKind kMotifFamily[] = {TopologyKind::Grid, TopologyKind::Circle,
                                                TopologyKind::Chain, TopologyKind::Tree,
                                                TopologyKind::Star};
inline constexpr TopologyKind kTheoryFamily[] = {TopologyKind::Complete, TopologyKind::ChordalCycle,
                                                 TopologyKind::Bipartite, TopologyKind::Wheel,
                                                 TopologyKind::Fixed};

std::string_view to_string(TopologyKind k);
TopologyKind topology_from_string(std::string_view s);

// Integer params per kind:
//   Grid{rows, cols}  Circle{n}  Chain{n}  Tree{branching, height}  Star{n}
//   Complete{n}  ChordalCycle{n, chords}  Bipartite{left, right}  Wheel{outer}  Fixed{}
struct TopologySpec {
  TopologyKind kind = TopologyKind::Chain;
  std::map<std::string, int> params;
};

void validate_topology(const TopologySpec& spec);
int topology_node_count(const TopologySpec& spec);

// Structure-only graph: num_nodes and edges are set, payload vectors empty.
// Only ChordalCycle consumes the seed (chord placement).
AttributedGraph gen_topology(const TopologySpec& spec, std::uint64_t seed);

// Per-kind structural predicate on a connected graph given as an edge list
// over nodes 0..n-1 (parameter-free: e.g. Tree accepts any tree).
bool has_shape(TopologyKind kind, int n, const std::vector<Edge>& edges);

// Classifies a structure inside one family, resolving overlaps (a 3-node
// star is a chain, K4 is complete rather than a wheel) by a fixed precedence.
std::optional<int> recognise_motif(int n, const std::vector<Edge>& edges);
std::optional<int> recognise_theory(int n, const std::vector<Edge>& edges);

// The fixed-topology member of the graph-theory family.
int fixed_topology_nodes();
const std::vector<Edge>& fixed_topology_edges();

// ---- planted substructures -------------------------------------------------

inline constexpr int kGammaSlots = 3;
inline constexpr int kGammaSizes[kGammaSlots] = {3, 6, 9};

// Shapes available per Γ slot. Tag 0 is always Absent; shape k has tag k+1.
enum class GammaShape { Triangle, Path3, Cycle6, Star6, Path6, Grid3x3, Cycle9, Path9 };
std::span<const GammaShape> gamma_shapes(int slot);
std::string_view to_string(GammaShape s);
GammaShape gamma_shape_from_string(std::string_view s);
int gamma_domain(int slot);  // shapes + 1 for Absent
int gamma_tag(int slot, GammaShape s);

std::vector<Edge> gamma_edges(GammaShape s);
// Returns the tag of the induced structure, or nullopt if it matches no
// shape of the slot.
std::optional<int> recognise_gamma(int slot, int n, const std::vector<Edge>& edges);

}  // namespace causalign::synth
