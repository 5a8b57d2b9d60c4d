#include <fstream>

#include "causalign/errors.hpp"
#include "causalign/json_util.hpp"
#include "causalign/rng.hpp"
#include "cli/run.hpp"

namespace causalign::cli {

using nlohmann::json;

json default_config() {
  return {
      {"seed", 0},
      {"dataset",
       {{"task", "node_level"},
        {"num_samples", 400},
        {"num_test", 100},
        {"node", {{"homophily", 0.85}, {"majority_share", 0.75}}}}},
      {"model", {{"arch", "gcn"}, {"num_layers", 4}, {"hidden_dim", 256}}},
      {"train", {{"epochs", 200}, {"lr", 0.001}, {"momentum", 0.9}, {"batch_size", 16}}},
      {"enhancer", {{"kind", "mock"}, {"dim", 32}}},
      {"at", {{"enabled", false}, {"q", 10}, {"m", 2}, {"delta", 10}}},
      {"sweep", {{"pair_cap", 2000}}},
      {"study", json::object()},
      {"out", "runs"},
  };
}

namespace {

StudyConfig study_from(const json& j) {
  const std::string w = "study";
  check_keys(j, {"seeds", "layers", "hidden", "positions", "align"}, w);
  StudyConfig s;
  read_opt(j, "seeds", s.seeds, w);
  read_opt(j, "layers", s.layers, w);
  read_opt(j, "hidden", s.hidden, w);
  read_opt(j, "positions", s.positions, w);
  read_opt(j, "align", s.align, w);
  if (s.seeds < 1) throw ConfigError("study.seeds must be >= 1");
  for (int p : s.positions)
    if (p < 1 || p > 10) throw ConfigError("study.positions: every position must lie in [1, 10]");
  return s;
}

const json& block(const json& doc, const char* key) {
  const json& b = doc.at(key);
  if (!b.is_object()) throw ConfigError(std::string(key) + ": expected an object");
  return b;
}

}  // namespace

RunConfig resolve_config(const json& user) {
  if (!user.is_object()) throw ConfigError("config: expected a JSON object");
  check_keys(user, {"seed", "dataset", "model", "train", "enhancer", "at", "sweep", "study", "out"}, "config");
  json doc = default_config();
  doc.merge_patch(user);

  RunConfig c;
  read_opt(doc, "seed", c.seed, "config");
  read_opt(doc, "out", c.out, "config");

  const json& ds = block(doc, "dataset");
  c.dataset = synth::dataset_config_from_json(ds);
  c.dataset_seed = derive_seed(c.seed, "dataset");
  read_opt(ds, "seed", c.dataset_seed, "dataset");
  synth::validate(c.dataset);

  json en = block(doc, "enhancer");
  read_opt(en, "prompt", c.prompt, "enhancer");
  const bool position_given = en.contains("position");
  read_opt(en, "position", c.position, "enhancer");
  en.erase("prompt");
  c.enhancer = enhancer::enhancer_spec_from_json(en);
  if (!c.enhancer.seed) c.enhancer.seed = derive_seed(c.seed, "enhancer");
  enhancer::validate(c.enhancer);
  if (c.position < 1 || c.position > 10) throw ConfigError("enhancer.position must lie in [1, 10]");

  json md = block(doc, "model");
  if (md.contains("input_dim") && md.at("input_dim") != json(c.enhancer.dim))
    throw ConfigError("model.input_dim must equal enhancer.dim (" + std::to_string(c.enhancer.dim) + ")");
  md["input_dim"] = c.enhancer.dim;
  if (!md.contains("readout"))
    md["readout"] = c.dataset.task == synth::Task::NodeLevel ? "target_node" : "mean_pool";
  c.model = gnn::gnn_config_from_json(md);
  gnn::validate(c.model, c.dataset.task);
  c.model_seed = derive_seed(c.seed, "model");

  c.train = gnn::train_config_from_json(block(doc, "train"));
  c.train.seed = derive_seed(c.seed, "train");

  const json& atb = block(doc, "at");
  c.at = at::at_config_from_json(atb);
  read_opt(atb, "enabled", c.at_enabled, "at");
  if (!(atb.contains("prompt_source") && atb.at("prompt_source").contains("seed")))
    c.at.source.seed = derive_seed(c.seed, "prompts");
  c.at_seed = derive_seed(c.seed, "at");
  if (c.at_enabled) {
    at::validate(c.at);
    if (position_given) throw ConfigError("enhancer.position cannot be set when at.enabled is true");
  }

  const json& sw = block(doc, "sweep");
  c.sweep = intervene::sweep_config_from_json(sw);
  if (!sw.contains("seed")) c.sweep.seed = derive_seed(c.seed, "sweep");

  c.study = study_from(block(doc, "study"));
  c.document = std::move(doc);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return resolve_config(j);
}

std::string config_hash(const RunConfig& c) {
  json doc = c.document;
  doc.erase("out");
  return enhancer::sha256_hex(doc.dump());
}

}  // namespace causalign::cli
