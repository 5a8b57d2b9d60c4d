#pragma once

// Run configuration, the generate / train / align / oracle / study pipeline,
// and the JSON reports each command writes.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalign/at.hpp"
#include "causalign/enhancer.hpp"
#include "causalign/gnn.hpp"
#include "causalign/intervene.hpp"
#include "causalign/synthgraph.hpp"

namespace causalign::cli {

struct StudyConfig {
  int seeds = 1;
  std::vector<int> layers = {2, 4, 6, 8};
  std::vector<int> hidden = {32, 64, 128, 256};
  std::vector<int> positions = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  bool align = true;  // sweep every trained model of the layers / hidden axes
};

struct RunConfig {
  nlohmann::json document;  // the resolved config, echoed into every run directory
  std::uint64_t seed = 0;
  synth::DatasetConfig dataset;
  std::uint64_t dataset_seed = 0;
  gnn::GnnConfig model;
  std::uint64_t model_seed = 0;
  gnn::TrainConfig train;
  enhancer::EnhancerSpec enhancer;
  int position = 10;
  std::string prompt = gnn::kDefaultPrompt;
  bool at_enabled = false;
  at::AtConfig at;
  std::uint64_t at_seed = 0;
  intervene::SweepConfig sweep;
  StudyConfig study;
  std::string out = "runs";
};

// Desk defaults: a 4-layer GCN with 256 hidden units trained for 200 epochs
// at lr 0.001 on a 300/100 node-level split.
nlohmann::json default_config();
// `user` is merged over the defaults, then every block is parsed and the
// cross-block rules are checked. Throws ConfigError or InvalidParams.
RunConfig resolve_config(const nlohmann::json& user);
RunConfig load_config(const std::filesystem::path& path);
// SHA-256 of the resolved document without `out`.
std::string config_hash(const RunConfig& c);

// ---- pipeline ------------------------------------------------------------------

synth::Dataset make_dataset(const RunConfig& c, int threads);
// Loads a dataset directory and checks that it came from c's dataset block.
synth::Dataset load_matching_dataset(const RunConfig& c, const std::filesystem::path& dir);

// Layer-0 inputs for every sample: a fixed feature bank, or the AT stage.
struct Features {
  std::unique_ptr<enhancer::Enhancer> enhancer;
  std::vector<std::string> prompts;
  std::unique_ptr<at::PromptFeatures> prompt_features;
  std::unique_ptr<gnn::InputStage> input;
  at::AtInput* at_input = nullptr;
};

// `d` must outlive the result.
Features make_features(const RunConfig& c, const synth::Dataset& d, int threads);

struct Trained {
  gnn::GnnModel model;
  gnn::TrainResult result;
};

Trained train_model(const RunConfig& c, const synth::Dataset& d, Features& f, int threads);

Checkpoint make_checkpoint(const RunConfig& c, const gnn::GnnModel& model, const Features& f);
// Rebuilds the model (and AT parameters) from a checkpoint whose model block
// and AT setting match c.
gnn::GnnModel restore(const RunConfig& c, const Checkpoint& ckpt, Features& f);

intervene::AlignmentGrid align(const RunConfig& c, const synth::Dataset& d, const gnn::LayeredModel& model,
                               const Features& f, int threads);

// ---- reports -------------------------------------------------------------------

nlohmann::json dataset_summary(const synth::Dataset& d);
nlohmann::json training_summary(const Trained& t, const Features& f);
// Per variable: argmin layer and its L_II.
nlohmann::json grid_summary(const intervene::AlignmentGrid& g);

enum class StudyAxis { Layers, Hidden, Position };
StudyAxis study_axis_from_string(const std::string& s);
std::string to_string(StudyAxis a);

// One training run per axis value and seed; grids are written to
// `grid_dir` when given.
nlohmann::json run_study(const RunConfig& c, StudyAxis axis, int threads,
                         const std::optional<std::filesystem::path>& grid_dir);

}  // namespace causalign::cli
