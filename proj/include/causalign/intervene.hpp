#pragma once

// Interchange interventions on layered models, the L_II alignment loss, layer
// sweeps producing alignment grids, and a hand-wired reference network for
// the node-level model.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalign/causal.hpp"
#include "causalign/gnn.hpp"

namespace causalign::intervene {

using gnn::ActivationSite;
using gnn::ForwardRecord;
using gnn::InputStage;
using gnn::LayeredModel;
using gnn::PatchRegion;

// Logits of f on `orig` with the donor's activations at `site` spliced in.
ad::Matrix intint_logits(const LayeredModel& f, const AttributedGraph& orig, const ForwardRecord& orig_record,
                         const AttributedGraph& donor, const ForwardRecord& donor_record,
                         const ActivationSite& site);
// Softmax class distribution (1 x C) of the intervened model.
ad::Matrix intint_low(const LayeredModel& f, const AttributedGraph& orig, const ad::Matrix& orig_input,
                      const AttributedGraph& donor, const ad::Matrix& donor_input, const ActivationSite& site);

// Changed pairs for one intervened variable set, with the high-level
// intervened output of each pair.
struct PairSet {
  std::vector<std::string> variables;
  causal::PairList pairs;
  std::vector<int> labels;
  std::size_t total_changed = 0;  // before subsampling
};

// At most `cap` of the changed pairs, drawn with a seeded sample and kept in
// lexicographic order. cap == 0 keeps all of them.
PairSet build_pairs(const causal::CausalModel& h, std::span<const AttributedGraph> graphs,
                    std::span<const causal::CausalTrace> traces, const causal::HighVariableSet& zh,
                    std::size_t cap, std::uint64_t seed);

// Mean cross-entropy of each row of logits against its label.
double mean_cross_entropy(std::span<const ad::Matrix> logits, std::span<const int> labels);

// Forward records of the graphs named by any pair, computed once.
class RecordCache {
 public:
  RecordCache(const LayeredModel& f, const InputStage& input, std::span<const AttributedGraph> graphs,
              std::span<const PairSet> pair_sets, int threads = 1);
  const ForwardRecord& at(std::size_t sample) const;

 private:
  std::vector<std::optional<ForwardRecord>> records_;
};

struct LiiResult {
  std::optional<double> value;  // empty when no pair could be matched
  std::size_t used = 0;
  std::size_t skipped = 0;  // pairs without node correspondence at the site
};

// Pairs whose nodes cannot be matched at `site` are skipped and counted.
// Per-pair terms are summed in pair order.
LiiResult compute_LII(const LayeredModel& f, std::span<const AttributedGraph> graphs, const RecordCache& records,
                      const PairSet& pairs, const ActivationSite& site, int threads = 1);

// ---- sweeps -----------------------------------------------------------------------

// Site probed for `variable` at `layer`.
using SiteTemplate = std::function<ActivationSite(const std::string& variable, int layer)>;

// Node-level: ring groups each variable depends on (C_v target, Psi_k ring k,
// Phi1 target + ring 1, Phi2 target + rings 1..2). Graph-level: the planted
// slot group of each Gamma/Omega variable. All dims.
SiteTemplate role_templates(const causal::CausalModel& h);

struct SweepConfig {
  std::vector<std::string> variables;  // empty: every non-output variable
  std::vector<int> layers;             // empty: 0..L
  std::size_t pair_cap = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string dataset_id;
};

nlohmann::json to_json(const SweepConfig& c);
SweepConfig sweep_config_from_json(const nlohmann::json& j);

struct AlignmentGrid {
  std::vector<std::string> variables;
  std::vector<int> layers;
  std::vector<std::vector<std::string>> sites;  // descriptor per cell
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::vector<std::size_t>> skipped;
  std::vector<std::size_t> pair_count;
  std::vector<std::size_t> changed_count;
  nlohmann::json metadata;

  // Column of the row minimum; empty for an undefined row.
  std::optional<std::size_t> argmin(std::size_t row) const;
  std::optional<int> argmin_layer(std::size_t row) const { return argmin(row) ? std::optional(layers[*argmin(row)]) : std::nullopt; }
  std::size_t row_of(const std::string& variable) const;
  friend bool operator==(const AlignmentGrid&, const AlignmentGrid&) = default;
};

// Samples are all of `graphs`. Deterministic for a given seed and independent
// of the thread count.
AlignmentGrid sweep(const causal::CausalModel& h, const LayeredModel& f, const InputStage& input,
                    std::span<const AttributedGraph> graphs, const SiteTemplate& templates, const SweepConfig& c);

nlohmann::json to_json(const AlignmentGrid& g);
AlignmentGrid alignment_grid_from_json(const nlohmann::json& j);
std::string to_csv(const AlignmentGrid& g);
// Heatmap with the per-row minimum outlined in green.
std::string to_svg(const AlignmentGrid& g);
void write_grid(const AlignmentGrid& g, const std::filesystem::path& dir, const std::string& stem);

// ---- reference network ------------------------------------------------------------

struct Encoding {
  int layer = 0;
  gnn::DimSlice dims;
};

// Three-layer network that reproduces h_node exactly. Every node's layer-0
// row is the one-hot of its class. Layer 1 keeps each node's class and adds,
// at the target, one-hot blocks for C_v, Psi1 and Psi2; layer 2 holds Phi1,
// Phi2 and Psi3 at the target; layer 3 is the logit row of Y. Blocks are read
// back by argmax with ties to the lowest class, and rings come from BFS
// distance to the target.
class GlassBox final : public LayeredModel {
 public:
  static constexpr double kLogitScale = 50.0;

  // Throws InvalidParams unless h is h_node-shaped or when the network's
  // label differs from h's on some graph.
  GlassBox(const causal::CausalModel& h, std::span<const AttributedGraph> graphs);

  int num_layers() const override { return 3; }
  int num_classes() const override { return classes_; }
  ad::Index layer_width(int layer) const override { return layer == 3 ? classes_ : width_; }
  ForwardRecord forward_patched(const AttributedGraph& g, const ad::Matrix& input,
                                std::span<const PatchRegion> patches) const override;

  const std::map<std::string, Encoding>& encodings() const { return encodings_; }
  ad::Matrix input(const AttributedGraph& g) const;
  gnn::FixedInput inputs(std::span<const AttributedGraph> graphs) const;
  // The target-node block of each variable, at any layer; the last layer
  // falls back to the whole target row.
  SiteTemplate templates() const;

 private:
  int classes_ = 0;
  ad::Index width_ = 0;
  causal::LookupTable table_;
  std::map<std::string, Encoding> encodings_;

  int decode(const ad::Matrix& h, ad::Index row, const std::string& var) const;
};

struct OracleRow {
  std::string variable;
  int constructed_layer = 0;
  std::optional<int> argmin_layer;
  std::optional<double> value;
  std::optional<double> margin;  // smallest gap to another layer
  bool pass = false;
};

struct OracleReport {
  AlignmentGrid grid;
  std::vector<OracleRow> rows;
  double max_lii = 0.0;
  bool pass = false;
};

inline constexpr double kOracleTolerance = 1e-9;
inline constexpr double kOracleMargin = 0.1;

// Sweeps the reference network over `variables` (default Psi1..3, Phi1, Phi2).
OracleReport run_oracle(const causal::CausalModel& h, std::span<const AttributedGraph> graphs, SweepConfig c);
nlohmann::json to_json(const OracleReport& r);

}  // namespace causalign::intervene
