#include <algorithm>
#include <map>

#include "causalign/errors.hpp"
#include "causalign/rng.hpp"
#include "cli/run.hpp"

namespace causalign::cli {

using nlohmann::json;

synth::Dataset make_dataset(const RunConfig& c, int threads) {
  synth::DatasetConfig dc = c.dataset;
  dc.threads = threads;
  return synth::generate_dataset(dc, c.dataset_seed);
}

synth::Dataset load_matching_dataset(const RunConfig& c, const std::filesystem::path& dir) {
  synth::Dataset d = synth::load_dataset(dir);
  if (d.manifest.seed != c.dataset_seed || d.manifest.generator != synth::to_json(c.dataset))
    throw ConfigError("dataset at " + dir.string() + " was generated from a different dataset block or seed");
  return d;
}

Features make_features(const RunConfig& c, const synth::Dataset& d, int threads) {
  Features f;
  f.enhancer = enhancer::make_enhancer(c.enhancer);
  if (c.at_enabled) {
    f.prompts = at::resolve_prompts(c.at);
    f.prompt_features =
        std::make_unique<at::PromptFeatures>(d.vocab, *f.enhancer, f.prompts, c.at.m, c.at.index_rule, threads);
    auto in = std::make_unique<at::AtInput>(*f.prompt_features, d.samples, c.at, c.at_seed);
    f.at_input = in.get();
    f.input = std::move(in);
    return f;
  }
  const gnn::FeatureBank bank(d.vocab, *f.enhancer, c.prompt, c.position, threads);
  std::vector<ad::Matrix> rows;
  rows.reserve(d.samples.size());
  for (const auto& g : d.samples) rows.push_back(bank.node_features(g));
  f.input = std::make_unique<gnn::FixedInput>(std::move(rows));
  return f;
}

Trained train_model(const RunConfig& c, const synth::Dataset& d, Features& f, int threads) {
  gnn::GnnModel model(c.model, c.model_seed);
  gnn::TrainConfig tc = c.train;
  tc.threads = threads;
  auto result = gnn::train(model, *f.input, d.samples, d.manifest.train, d.manifest.test, tc);
  return {std::move(model), std::move(result)};
}

Checkpoint make_checkpoint(const RunConfig& c, const gnn::GnnModel& model, const Features& f) {
  Checkpoint ckpt = model.to_checkpoint();
  if (f.at_input) {
    for (auto& t : f.at_input->tensors()) ckpt.tensors.push_back(std::move(t));
    ckpt.meta["at"] = at::to_json(c.at);
    ckpt.meta["prompts"] = f.prompts;
    const auto fixed = f.at_input->fixed_prompt();
    ckpt.meta["fixed_prompt"] = fixed ? json(*fixed) : json(nullptr);
  }
  return ckpt;
}

gnn::GnnModel restore(const RunConfig& c, const Checkpoint& ckpt, Features& f) {
  if (!ckpt.meta.contains("config")) throw IoError("checkpoint has no model config");
  if (ckpt.meta.at("config") != gnn::to_json(c.model))
    throw ConfigError("checkpoint model " + ckpt.meta.at("config").dump() + " does not match the model block " +
                      gnn::to_json(c.model).dump());
  const bool has_at = ckpt.meta.contains("at");
  if (has_at != c.at_enabled)
    throw ConfigError(has_at ? "checkpoint was trained with AT but at.enabled is false"
                             : "checkpoint was trained without AT but at.enabled is true");
  if (f.at_input) {
    if (ckpt.meta.at("prompts") != json(f.prompts))
      throw ConfigError("checkpoint prompts differ from the prompts this config resolves to");
    f.at_input->load(ckpt);
  }
  return gnn::GnnModel::from_checkpoint(ckpt);
}

intervene::AlignmentGrid align(const RunConfig& c, const synth::Dataset& d, const gnn::LayeredModel& model,
                               const Features& f, int threads) {
  const causal::CausalModel h = synth::high_level_model(d);
  intervene::SweepConfig s = c.sweep;
  s.threads = threads;
  s.dataset_id = synth::to_string(d.manifest.task) + ":" + std::to_string(d.manifest.seed);
  return intervene::sweep(h, model, *f.input, d.samples, intervene::role_templates(h), s);
}

// ---- reports -------------------------------------------------------------------

json dataset_summary(const synth::Dataset& d) {
  std::vector<int> labels(static_cast<std::size_t>(d.manifest.num_classes), 0);
  double nodes = 0, edges = 0;
  for (const auto& g : d.samples) {
    ++labels.at(static_cast<std::size_t>(g.label));
    nodes += g.num_nodes;
    edges += static_cast<double>(g.edges.size());
  }
  const double n = std::max<double>(1.0, static_cast<double>(d.samples.size()));
  return {{"task", synth::to_string(d.manifest.task)},
          {"seed", d.manifest.seed},
          {"num_samples", d.manifest.num_samples},
          {"train", d.manifest.train.size()},
          {"test", d.manifest.test.size()},
          {"label_counts", labels},
          {"mean_nodes", nodes / n},
          {"mean_edges", edges / n}};
}

json training_summary(const Trained& t, const Features& f) {
  json curve = json::array();
  for (const auto& e : t.result.curve) curve.push_back({e.epoch, e.loss, e.train_accuracy, e.test_accuracy});
  json j = {{"epochs_run", t.result.curve.size()},
            {"train_accuracy", t.result.train_accuracy()},
            {"test_accuracy", t.result.test_accuracy()},
            {"final_loss", t.result.curve.empty() ? 0.0 : t.result.curve.back().loss},
            {"curve_columns", {"epoch", "loss", "train_accuracy", "test_accuracy"}},
            {"curve", curve}};
  if (f.at_input) {
    j["prompts"] = f.prompts;
    const auto fixed = f.at_input->fixed_prompt();
    j["fixed_prompt"] = fixed ? json(*fixed) : json(nullptr);
  }
  return j;
}

json grid_summary(const intervene::AlignmentGrid& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.variables.size(); ++r) {
    const auto col = g.argmin(r);
    rows.push_back({{"variable", g.variables[r]},
                    {"argmin_layer", col ? json(g.layers[*col]) : json(nullptr)},
                    {"min_lii", col ? json(*g.cells[r][*col]) : json(nullptr)},
                    {"pairs", g.pair_count[r]},
                    {"changed_pairs", g.changed_count[r]}});
  }
  return rows;
}

StudyAxis study_axis_from_string(const std::string& s) {
  if (s == "layers") return StudyAxis::Layers;
  if (s == "hidden") return StudyAxis::Hidden;
  if (s == "position") return StudyAxis::Position;
  throw ConfigError("study axis: expected layers, hidden or position, got '" + s + "'");
}

std::string to_string(StudyAxis a) {
  switch (a) {
    case StudyAxis::Layers: return "layers";
    case StudyAxis::Hidden: return "hidden";
    case StudyAxis::Position: return "position";
  }
  return "?";
}

json run_study(const RunConfig& c, StudyAxis axis, int threads, const std::optional<std::filesystem::path>& grid_dir) {
  if (axis == StudyAxis::Position && c.at_enabled)
    throw ConfigError("study --axis position sweeps enhancer.position, which at.enabled excludes");
  const std::vector<int>& values =
      axis == StudyAxis::Layers ? c.study.layers : axis == StudyAxis::Hidden ? c.study.hidden : c.study.positions;
  if (values.empty()) throw ConfigError("study." + to_string(axis) + " lists no values");
  const bool with_grids = axis != StudyAxis::Position && c.study.align;

  json runs = json::array();
  std::map<int, std::pair<double, double>> sums;  // value -> (train, test)
  for (int rep = 0; rep < c.study.seeds; ++rep) {
    json doc = c.document;
    doc["seed"] = rep == 0 ? c.seed : derive_seed(c.seed, "study", static_cast<std::uint64_t>(rep));
    const RunConfig base = resolve_config(doc);
    const synth::Dataset d = make_dataset(base, threads);
    for (int v : values) {
      json vd = doc;
      if (axis == StudyAxis::Layers) vd["model"]["num_layers"] = v;
      else if (axis == StudyAxis::Hidden) vd["model"]["hidden_dim"] = v;
      else vd["enhancer"]["position"] = v;
      const RunConfig rc = resolve_config(vd);
      Features f = make_features(rc, d, threads);
      const Trained t = train_model(rc, d, f, threads);
      json row = {{"value", v},
                  {"seed", rc.seed},
                  {"train_accuracy", t.result.train_accuracy()},
                  {"test_accuracy", t.result.test_accuracy()}};
      if (with_grids) {
        const auto grid = align(rc, d, t.model, f, threads);
        row["alignment"] = grid_summary(grid);
        if (grid_dir) write_grid(grid, *grid_dir, to_string(axis) + "-" + std::to_string(v) + "-seed" + std::to_string(rep));
      }
      runs.push_back(std::move(row));
      sums[v].first += t.result.train_accuracy();
      sums[v].second += t.result.test_accuracy();
    }
  }

  json summary = json::array();
  double lo = 1.0, hi = 0.0;
  for (int v : values) {
    const double tr = sums[v].first / c.study.seeds, te = sums[v].second / c.study.seeds;
    summary.push_back({{"value", v}, {"mean_train_accuracy", tr}, {"mean_test_accuracy", te}});
    lo = std::min(lo, te);
    hi = std::max(hi, te);
  }
  return {{"axis", to_string(axis)},
          {"values", values},
          {"seeds", c.study.seeds},
          {"runs", runs},
          {"summary", summary},
          {"test_accuracy_spread", hi - lo}};
}

}  // namespace causalign::cli
