#pragma once

// Message-passing node classifiers with per-layer activation taps, patched
// forward passes, and the training loop shared with the AT input stage.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalign/autodiff.hpp"
#include "causalign/checkpoint.hpp"
#include "causalign/enhancer.hpp"
#include "causalign/graph.hpp"
#include "causalign/synthgraph.hpp"

namespace causalign::gnn {

enum class Arch { GCN, GAT, SAGE };
enum class Readout { TargetNode, MeanPool, MaxPool };

std::string to_string(Arch a);
std::string to_string(Readout r);
Arch arch_from_string(const std::string& s);
Readout readout_from_string(const std::string& s);

struct GnnConfig {
  Arch arch = Arch::GCN;
  int num_layers = 4;
  int hidden_dim = 64;
  int num_classes = synth::kNumClasses;
  Readout readout = Readout::TargetNode;
  int input_dim = 32;
  double gat_slope = 0.2;
  friend bool operator==(const GnnConfig&, const GnnConfig&) = default;
};

void validate(const GnnConfig& c);
void validate(const GnnConfig& c, synth::Task task);
nlohmann::json to_json(const GnnConfig& c);
GnnConfig gnn_config_from_json(const nlohmann::json& j);

// ---- graph operators -----------------------------------------------------------

// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
ad::Matrix normalized_adjacency(int num_nodes, const std::vector<Edge>& edges);
// Row i averages the neighbours of i; isolated nodes get a zero row.
ad::Matrix mean_adjacency(int num_nodes, const std::vector<Edge>& edges);
// 1 where j is i or a neighbour of i.
ad::Matrix self_loop_mask(int num_nodes, const std::vector<Edge>& edges);

// ---- activations and patches -------------------------------------------------------

// layers[0] is the input embedding, layers[k] the output of layer k; the last
// layer has num_classes columns and `logits` is its readout (1 x C).
struct ForwardRecord {
  std::vector<ad::Matrix> layers;
  ad::Matrix logits;
};

// Overwrite rows x [col_begin, col_end) of one layer's activation before the
// next layer consumes it.
struct PatchRegion {
  int layer = 0;
  std::vector<ad::Index> rows;
  ad::Index col_begin = 0;
  ad::Index col_end = 0;
  ad::Matrix values;  // rows.size() x (col_end - col_begin)
};

class LayeredModel {
 public:
  virtual ~LayeredModel() = default;
  virtual int num_layers() const = 0;
  virtual int num_classes() const = 0;
  virtual ad::Index layer_width(int layer) const = 0;
  virtual ForwardRecord forward_patched(const AttributedGraph& g, const ad::Matrix& input,
                                        std::span<const PatchRegion> patches) const = 0;
  ForwardRecord forward(const AttributedGraph& g, const ad::Matrix& input) const {
    return forward_patched(g, input, {});
  }
  // Same result as forward_patched on base.layers[0], reusing the unpatched
  // layers below the lowest patched one.
  virtual ForwardRecord resume_patched(const AttributedGraph& g, const ForwardRecord& base,
                                       std::span<const PatchRegion> patches) const {
    return forward_patched(g, base.layers.at(0), patches);
  }

 protected:
  // Layer range, row range, column range, value shape, and pairwise
  // disjointness. Throws PatchError.
  void check_patches(std::span<const PatchRegion> patches, ad::Index num_nodes) const;
};

// ---- sites ------------------------------------------------------------------------

// How a site names nodes. Absolute and All need equal node counts in the two
// graphs; Role needs the role in both; Group matches members of a role group
// by index, keeping the indices present in both graphs.
struct NodeRef {
  enum class Kind { Absolute, Role, Group, All };
  Kind kind = Kind::Absolute;
  int id = 0;
  NodeRole role;
  int group = 0;

  static NodeRef absolute(int id) { return {Kind::Absolute, id, {}, 0}; }
  static NodeRef of_role(NodeRole r) { return {Kind::Role, 0, r, 0}; }
  static NodeRef of_group(int g) { return {Kind::Group, 0, {}, g}; }
  static NodeRef all() { return {Kind::All, 0, {}, 0}; }
  std::string str() const;
  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

struct DimSlice {
  ad::Index begin = 0;
  ad::Index end = 0;
  friend bool operator==(const DimSlice&, const DimSlice&) = default;
};

struct ActivationSite {
  int layer = 0;
  std::vector<NodeRef> nodes;
  std::optional<DimSlice> dims;  // all columns when empty
  std::string str() const;
  friend bool operator==(const ActivationSite&, const ActivationSite&) = default;
};

struct NodeMatch {
  std::vector<ad::Index> orig;
  std::vector<ad::Index> donor;
};

// Node rows addressed by `refs` in each graph, paired up, duplicates dropped.
// Throws NodeCorrespondenceError when a ref cannot be matched or nothing
// matches at all.
NodeMatch match_nodes(std::span<const NodeRef> refs, const AttributedGraph& orig, const AttributedGraph& donor);

// The patch that splices the donor's activations at `site` into the original.
PatchRegion make_patch(const LayeredModel& f, const ActivationSite& site, const NodeMatch& match,
                       const ForwardRecord& donor);

// ---- GNN --------------------------------------------------------------------------

// Supplies a Var for parameter `index` (in parameter order) on a tape.
using ParamBinder = std::function<ad::Var(ad::Tape&, std::size_t index)>;

struct TapeForward {
  std::vector<ad::Var> layers;
  ad::Var logits;
};

class GnnModel final : public LayeredModel {
 public:
  GnnModel(const GnnConfig& c, std::uint64_t seed);

  const GnnConfig& config() const { return config_; }
  int num_layers() const override { return config_.num_layers; }
  int num_classes() const override { return config_.num_classes; }
  ad::Index layer_width(int layer) const override;

  ForwardRecord forward_patched(const AttributedGraph& g, const ad::Matrix& input,
                                std::span<const PatchRegion> patches) const override;
  ForwardRecord resume_patched(const AttributedGraph& g, const ForwardRecord& base,
                               std::span<const PatchRegion> patches) const override;

  // Forward pass recorded on `tape` starting from the layer-0 var. Without a
  // binder the parameters enter as constants.
  TapeForward record(ad::Tape& tape, const AttributedGraph& g, ad::Var input,
                     std::span<const PatchRegion> patches = {}, const ParamBinder& bind = {}) const;

  std::vector<ad::Tensor>& params() { return params_; }
  const std::vector<ad::Tensor>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }

  Checkpoint to_checkpoint() const;
  static GnnModel from_checkpoint(const Checkpoint& ckpt);

 private:
  GnnConfig config_;
  std::vector<ad::Tensor> params_;
  std::vector<std::string> names_;
  // Index of each layer's first parameter.
  std::vector<std::size_t> layer_offset_;

  // Layers first+1..L on top of `h`, the (already patched) layer-`first` var.
  void run_layers(ad::Tape& tape, const AttributedGraph& g, int first, ad::Var h,
                  std::span<const PatchRegion> patches, const ParamBinder& bind, TapeForward& out) const;
};

// ---- training --------------------------------------------------------------------

// Produces the layer-0 activation of each sample, possibly from trainable
// parameters of its own.
class InputStage {
 public:
  virtual ~InputStage() = default;
  virtual std::vector<ad::Tensor*> params() { return {}; }
  // `bound` holds this stage's parameters already placed on the tape; when
  // empty the stage's current values enter as constants.
  virtual ad::Var record(ad::Tape& tape, std::size_t sample, std::span<const ad::Var> bound) const = 0;
  // Called before epoch `epoch` (0-based) with the training sample indices.
  virtual void begin_epoch(int /*epoch*/, std::span<const int> /*train*/) {}
  ad::Matrix layer0(std::size_t sample) const;
};

class FixedInput final : public InputStage {
 public:
  explicit FixedInput(std::vector<ad::Matrix> features) : features_(std::move(features)) {}
  ad::Var record(ad::Tape& tape, std::size_t sample, std::span<const ad::Var>) const override;
  const ad::Matrix& features(std::size_t sample) const { return features_.at(sample); }

 private:
  std::vector<ad::Matrix> features_;
};

struct TrainConfig {
  int epochs = 200;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;
  // Stop once training accuracy reaches 1 for this many epochs in a row (0 = never).
  int patience = 0;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  double train_accuracy() const { return curve.empty() ? 0.0 : curve.back().train_accuracy; }
  double test_accuracy() const { return curve.empty() ? 0.0 : curve.back().test_accuracy; }
};

// Mini-batch SGD with momentum on mean cross-entropy. Per-sample gradients are
// computed in parallel and summed in sample order, so the thread count does
// not change the result. Throws TrainingDiverged on a non-finite loss.
TrainResult train(GnnModel& model, InputStage& input, const std::vector<AttributedGraph>& graphs,
                  std::span<const int> train_idx, std::span<const int> test_idx, const TrainConfig& c);

int predict(const LayeredModel& model, const AttributedGraph& g, const ad::Matrix& input);
double accuracy(const LayeredModel& model, const InputStage& input, const std::vector<AttributedGraph>& graphs,
                std::span<const int> idx, int threads = 1);

// ---- enhancer features ---------------------------------------------------------------

inline constexpr const char* kDefaultPrompt = "summarize the following entry :";

enhancer::NodePayload entry_payload(const synth::SyntheticEntry& e);

// Per-entry feature at relative position p of the enhancer's token sequence.
class FeatureBank {
 public:
  FeatureBank(const std::vector<synth::SyntheticEntry>& vocab, enhancer::Enhancer& enc, const std::string& prompt,
              int position, int threads = 1);
  int dim() const { return dim_; }
  const ad::Matrix& entry_feature(int entry) const { return rows_.at(static_cast<std::size_t>(entry)); }
  // n x d; raw node vectors are used as given.
  ad::Matrix node_features(const AttributedGraph& g) const;

 private:
  int dim_ = 0;
  std::vector<ad::Matrix> rows_;
};

}  // namespace causalign::gnn
