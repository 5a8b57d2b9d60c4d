#pragma once

// Synthetic vocabulary, node-level and graph-level sample construction, and
// dataset files (manifest JSON + one JSON sample per line).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalign/causal.hpp"
#include "causalign/graph.hpp"
#include "causalign/topology.hpp"

namespace causalign::synth {

inline constexpr int kNumClasses = 3;
inline constexpr int kSubclassesPerClass = 5;
inline constexpr int kNumSubclasses = kNumClasses * kSubclassesPerClass;

struct SyntheticEntry {
  std::string name;
  std::vector<std::string> content;
  int cls = 0;
  int subclass = 0;           // global index in [0, 15); cls == subclass / 5
  std::vector<int> related;   // indices into the vocabulary
  std::vector<int> similar;
  friend bool operator==(const SyntheticEntry&, const SyntheticEntry&) = default;
};

struct VocabConfig {
  int num_entries = 150;
  double noise = 0.05;  // chance a related link leaves the class
  std::array<double, kNumClasses> class_weights = {1.0, 1.0, 1.0};
  int related = 3;
  int similar = 2;
  int min_tokens = 6;
  int max_tokens = 12;
};

void validate(const VocabConfig& c);
std::vector<SyntheticEntry> gen_vocabulary(const VocabConfig& c, std::uint64_t seed);
std::vector<SyntheticEntry> gen_vocabulary(int num_entries, std::uint64_t seed);

// ---- node-level samples --------------------------------------------------------

struct NodeTaskConfig {
  int max_distance = 3;
  std::array<std::pair<int, int>, 3> ring_sizes = {{{3, 7}, {8, 12}, {11, 15}}};
  // Every ring's majority class outnumbers each other class by >= margin.
  int majority_margin = 1;
  // Lower bound on the majority's share of its ring.
  double majority_share = 0.0;
  // Probability that a ring's majority copies the previous ring's (the
  // target's class for ring 1).
  double homophily = 0.0;
  // Expected extra edges per node inside a ring or to an adjacent ring.
  double extra_edge_rate = 0.0;
  // Probability that a node's entry is drawn from its parent's related links.
  double link_affinity = 0.5;
};

void validate(const NodeTaskConfig& c);

// Node ids follow role order: target (role {0,0}), then ring 1, 2, 3 with
// role {k, i}. Each ring-k node has a parent in ring k-1; extra edges never
// skip a ring, so roles equal BFS distance.
AttributedGraph build_node_sample(const std::vector<SyntheticEntry>& vocab, const NodeTaskConfig& c,
                                  const causal::CausalModel& h_node, std::uint64_t seed);

// ---- graph-level samples --------------------------------------------------------

struct SizeRange {
  int lo = 0;
  int hi = 0;
};

struct GraphTaskConfig {
  std::vector<TopologyKind> motif_kinds = {kMotifFamily[0], kMotifFamily[1], kMotifFamily[2], kMotifFamily[3],
                                           kMotifFamily[4]};
  std::vector<TopologyKind> theory_kinds = {kTheoryFamily[0], kTheoryFamily[1], kTheoryFamily[2],
                                            kTheoryFamily[3], kTheoryFamily[4]};
  // Allowed shapes per Γ slot and the probability the slot is planted.
  std::array<std::vector<GammaShape>, kGammaSlots> gamma_shapes = {
      std::vector<GammaShape>{GammaShape::Triangle, GammaShape::Path3},
      std::vector<GammaShape>{GammaShape::Cycle6, GammaShape::Star6, GammaShape::Path6},
      std::vector<GammaShape>{GammaShape::Grid3x3, GammaShape::Cycle9, GammaShape::Path9}};
  std::array<double, kGammaSlots> gamma_presence = {1.0, 1.0, 1.0};
  // Host size ranges (node counts; Tree uses height 2 with branching 2).
  SizeRange motif_nodes = {4, 7};
  SizeRange theory_nodes = {4, 7};
};

void validate(const GraphTaskConfig& c);
// Preset whose mean sample size sits near 20.5 nodes.
GraphTaskConfig full_scale_graph_config();

// Node ids: Ω₁ host, then Ω₂ host, then Γ₁..Γ₃ in slot order. Hosts are
// joined by one bridge edge and each planted Γ hangs off a host node by one
// bridge edge. Roles are {slot, position in the structure}.
AttributedGraph build_graph_sample(const std::vector<SyntheticEntry>& vocab, const GraphTaskConfig& c,
                                   const causal::CausalModel& h_graph, std::uint64_t seed);

// ---- datasets ---------------------------------------------------------------------

enum class Task { NodeLevel, GraphLevel };
std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct DatasetConfig {
  Task task = Task::NodeLevel;
  int num_samples = 400;
  int num_test = 100;
  VocabConfig vocab;
  NodeTaskConfig node;
  GraphTaskConfig graph;
  causal::NodeTableWeights node_table;
  int threads = 1;
};

void validate(const DatasetConfig& c);
nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct DatasetManifest {
  Task task = Task::NodeLevel;
  int num_samples = 0;
  int num_classes = kNumClasses;
  std::vector<int> train;
  std::vector<int> test;
  std::uint64_t seed = 0;
  nlohmann::json generator;  // the DatasetConfig that produced the data
  nlohmann::json tables;     // high-level model lookup tables
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SyntheticEntry> vocab;
  std::vector<AttributedGraph> samples;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Samples use sub-seeds derived from (seed, index), so the thread count does
// not change the result.
Dataset generate_dataset(const DatasetConfig& c, std::uint64_t seed);

// The high-level model whose tables are stored in the manifest.
causal::CausalModel high_level_model(const Dataset& d);

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kSamplesFile = "samples.jsonl";

void emit_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

nlohmann::json sample_to_json(const AttributedGraph& g);
AttributedGraph sample_from_json(const nlohmann::json& j);

}  // namespace causalign::synth
