#pragma once

// Attention-based transmission: several prompts per node, m token features
// kept per prompt, scored by a small attention encoder, jointly normalised
// and fused into one node feature. After delta epochs the prompt with the
// most attention mass is kept and the rest dropped.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalign/autodiff.hpp"
#include "causalign/checkpoint.hpp"
#include "causalign/enhancer.hpp"
#include "causalign/gnn.hpp"
#include "causalign/synthgraph.hpp"

namespace causalign::at {

// Corrected: clamp(floor(i n / m), 1, n). Literal: clamp(floor(min(i n / m, 1)), 1, n),
// which only ever selects the first token.
enum class IndexRule { Corrected, Literal };

// m 1-based token indices into a sequence of n.
std::vector<ad::Index> select_indices(ad::Index n, ad::Index m, IndexRule rule = IndexRule::Corrected);

struct EncoderConfig {
  int layers = 2;
  int width = 64;
  int heads = 1;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct PromptSource {
  enum class Kind { Mock, Remote };
  Kind kind = Kind::Mock;
  std::uint64_t seed = 0;
  // Remote: POST {"prompt": text, "count": q} -> {"prompts": [...]}
  std::string endpoint;
  std::string auth_env = "CAUSALIGN_API_KEY";
  double timeout_s = 30.0;
  int retries = 2;
  friend bool operator==(const PromptSource&, const PromptSource&) = default;
};

struct AtConfig {
  int q = 10;
  int m = 2;
  int delta = 10;
  EncoderConfig encoder;
  IndexRule index_rule = IndexRule::Corrected;
  std::string task_description = "entries of a synthetic knowledge vocabulary";
  std::vector<std::string> prompts;  // used as given when not empty
  PromptSource source;
  friend bool operator==(const AtConfig&, const AtConfig&) = default;
};

void validate(const AtConfig& c);
nlohmann::json to_json(const AtConfig& c);
AtConfig at_config_from_json(const nlohmann::json& j);

// Instruction sent to a text generator asking for q prompts.
std::string prompt_request(const std::string& task_description, int q);
// Mock: q distinct seeded phrasings. Remote: asks the endpoint; a reply
// with a different count raises RemoteError.
std::vector<std::string> gen_prompts(const PromptSource& source, const std::string& task_description, int q);
// c.prompts when given (count checked), otherwise gen_prompts.
std::vector<std::string> resolve_prompts(const AtConfig& c);

// ---- encoder ----------------------------------------------------------------------

// Single-head encoder over independent blocks of m rows. layers - 1 residual
// blocks (self-attention then a ReLU feed-forward), then the last layer's
// query and key projections; A = Q K^T per block.
class AttentionEncoder {
 public:
  AttentionEncoder(int input_dim, const EncoderConfig& c, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  int input_dim() const { return input_dim_; }
  // s: (B m) x d stacked blocks -> (B m) x m scores.
  ad::Var scores(ad::Tape& tape, ad::Var s, ad::Index m, std::span<const ad::Var> bound = {}) const;

  std::vector<ad::Tensor>& params() { return params_; }
  const std::vector<ad::Tensor>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }

 private:
  EncoderConfig config_;
  int input_dim_ = 0;
  std::vector<ad::Tensor> params_;
  std::vector<std::string> names_;
};

struct Scores {
  ad::Var attention;  // A, (B m) x m
  ad::Var alpha;      // row means, (B m) x 1
  ad::Var alpha_bar;  // joint softmax inside each node's group of `group` rows
};

// `group` is the number of rows sharing one joint softmax (q m, or m once fixed).
Scores score(ad::Tape& tape, const AttentionEncoder& enc, ad::Var s, ad::Index m, ad::Index group,
             std::span<const ad::Var> bound = {});
// z per node: (1 / (q m)) sum of alpha_bar-weighted rows of its group.
ad::Var fuse(ad::Var alpha_bar, ad::Var s, ad::Index q, ad::Index m);

// ---- per-entry features -------------------------------------------------------------

// For every vocabulary entry, the m selected token features of each prompt,
// stacked prompt-major: (q m) x d.
class PromptFeatures {
 public:
  PromptFeatures(const std::vector<synth::SyntheticEntry>& vocab, enhancer::Enhancer& enc,
                 const std::vector<std::string>& prompts, int m, IndexRule rule, int threads = 1);
  int q() const { return q_; }
  int m() const { return m_; }
  int dim() const { return dim_; }
  const ad::Matrix& entry(int e) const { return rows_.at(static_cast<std::size_t>(e)); }
  // Rows for every node of g, node-major; one prompt only when given. Raw
  // node vectors fill each of their slots.
  ad::Matrix stack(const AttributedGraph& g, std::optional<int> prompt = std::nullopt) const;

 private:
  int q_ = 0, m_ = 0, dim_ = 0;
  std::vector<ad::Matrix> rows_;
};

// ---- input stage ------------------------------------------------------------------

class AtInput final : public gnn::InputStage {
 public:
  AtInput(const PromptFeatures& features, const std::vector<AttributedGraph>& graphs, const AtConfig& c,
          std::uint64_t seed);

  std::vector<ad::Tensor*> params() override;
  ad::Var record(ad::Tape& tape, std::size_t sample, std::span<const ad::Var> bound) const override;
  // Fixes the prompt when epoch == delta.
  void begin_epoch(int epoch, std::span<const int> train) override;

  std::optional<int> fixed_prompt() const { return fixed_; }
  void fix(int prompt);
  // Mean over the samples' nodes of each prompt's summed alpha_bar.
  std::vector<double> prompt_mass(std::span<const int> samples) const;
  Scores scores(ad::Tape& tape, std::size_t sample) const;

  const AttentionEncoder& encoder() const { return encoder_; }
  AttentionEncoder& encoder() { return encoder_; }
  std::vector<NamedTensor> tensors() const;
  void load(const Checkpoint& ckpt);

 private:
  const PromptFeatures* features_;
  const std::vector<AttributedGraph>* graphs_;
  AtConfig config_;
  AttentionEncoder encoder_;
  std::vector<ad::Matrix> stacks_;
  std::optional<int> fixed_;
};

}  // namespace causalign::at
