#include <algorithm>
#include <numeric>

#include "causalign/errors.hpp"
#include "causalign/intervene.hpp"
#include "causalign/parallel.hpp"
#include "causalign/rng.hpp"

namespace causalign::intervene {

ad::Matrix intint_logits(const LayeredModel& f, const AttributedGraph& orig, const ForwardRecord& orig_record,
                         const AttributedGraph& donor, const ForwardRecord& donor_record,
                         const ActivationSite& site) {
  const gnn::NodeMatch match = gnn::match_nodes(site.nodes, orig, donor);
  const PatchRegion p = gnn::make_patch(f, site, match, donor_record);
  return f.resume_patched(orig, orig_record, std::span(&p, 1)).logits;
}

ad::Matrix intint_low(const LayeredModel& f, const AttributedGraph& orig, const ad::Matrix& orig_input,
                      const AttributedGraph& donor, const ad::Matrix& donor_input, const ActivationSite& site) {
  return ad::softmax_rows(
      intint_logits(f, orig, f.forward(orig, orig_input), donor, f.forward(donor, donor_input), site));
}

PairSet build_pairs(const causal::CausalModel& h, std::span<const AttributedGraph> graphs,
                    std::span<const causal::CausalTrace> traces, const causal::HighVariableSet& zh,
                    std::size_t cap, std::uint64_t seed) {
  PairSet out;
  out.variables = zh.names();
  causal::PairList all = causal::changed_pairs(h, graphs, traces, zh);
  out.total_changed = all.size();
  if (cap > 0 && all.size() > cap) {
    std::vector<std::size_t> pick(all.size());
    std::iota(pick.begin(), pick.end(), 0);
    Rng rng(seed, "pairs:" + zh.label());
    // partial Fisher-Yates over the first `cap` slots
    for (std::size_t i = 0; i < cap; ++i) std::swap(pick[i], pick[i + rng.index(pick.size() - i)]);
    pick.resize(cap);
    std::sort(pick.begin(), pick.end());
    causal::PairList kept;
    kept.reserve(cap);
    for (std::size_t k : pick) kept.push_back(all[k]);
    all = std::move(kept);
  }
  out.pairs = std::move(all);
  out.labels.reserve(out.pairs.size());
  for (const auto& [o, d] : out.pairs)
    out.labels.push_back(causal::intervene_trace(h, graphs[o], traces[o], traces[d], zh).output(h));
  return out;
}

namespace {

ad::Matrix one_hot(int label, ad::Index classes) {
  if (label < 0 || label >= classes) throw InvalidParams("label " + std::to_string(label) + " outside the classes");
  ad::Matrix y = ad::Matrix::Zero(1, classes);
  y(0, label) = 1.0;
  return y;
}

}  // namespace

double mean_cross_entropy(std::span<const ad::Matrix> logits, std::span<const int> labels) {
  if (logits.size() != labels.size()) throw InvalidParams("mean_cross_entropy: one label per logit row");
  if (logits.empty()) throw InvalidParams("mean_cross_entropy: no rows");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    total += ad::cross_entropy_value(logits[i], one_hot(labels[i], logits[i].cols()));
  return total / static_cast<double>(logits.size());
}

RecordCache::RecordCache(const LayeredModel& f, const InputStage& input, std::span<const AttributedGraph> graphs,
                         std::span<const PairSet> pair_sets, int threads)
    : records_(graphs.size()) {
  std::vector<char> needed(graphs.size(), 0);
  for (const auto& ps : pair_sets)
    for (const auto& [o, d] : ps.pairs) needed.at(o) = needed.at(d) = 1;
  parallel_for(graphs.size(), threads, [&](std::size_t i) {
    if (needed[i]) records_[i] = f.forward(graphs[i], input.layer0(i));
  });
}

const ForwardRecord& RecordCache::at(std::size_t sample) const {
  if (sample >= records_.size() || !records_[sample])
    throw InvalidParams("record cache holds no forward pass for sample " + std::to_string(sample));
  return *records_[sample];
}

LiiResult compute_LII(const LayeredModel& f, std::span<const AttributedGraph> graphs, const RecordCache& records,
                      const PairSet& pairs, const ActivationSite& site, int threads) {
  if (pairs.pairs.empty()) throw InvalidParams("compute_LII: empty pair set");
  std::vector<std::optional<double>> terms(pairs.pairs.size());
  parallel_for(pairs.pairs.size(), threads, [&](std::size_t k) {
    const auto [o, d] = pairs.pairs[k];
    ad::Matrix logits;
    try {
      logits = intint_logits(f, graphs[o], records.at(o), graphs[d], records.at(d), site);
    } catch (const NodeCorrespondenceError&) {
      return;
    }
    terms[k] = ad::cross_entropy_value(logits, one_hot(pairs.labels[k], logits.cols()));
  });
  LiiResult r;
  double total = 0.0;
  for (const auto& t : terms) {
    if (!t) {
      ++r.skipped;
      continue;
    }
    total += *t;
    ++r.used;
  }
  if (r.used > 0) r.value = total / static_cast<double>(r.used);
  return r;
}

// ---- templates ------------------------------------------------------------------------

SiteTemplate role_templates(const causal::CausalModel& h) {
  using gnn::NodeRef;
  std::map<std::string, std::vector<NodeRef>> nodes;
  if (h.name() == "h_node") {
    nodes["C_v"] = {NodeRef::of_group(0)};
    for (int k = 1; k <= causal::kNodeRings; ++k) nodes["Psi" + std::to_string(k)] = {NodeRef::of_group(k)};
    nodes["Phi1"] = {NodeRef::of_group(0), NodeRef::of_group(1)};
    nodes["Phi2"] = {NodeRef::of_group(0), NodeRef::of_group(1), NodeRef::of_group(2)};
  } else if (h.name() == "h_graph") {
    nodes["Omega1"] = {NodeRef::of_group(causal::kSlotOmega1)};
    nodes["Omega2"] = {NodeRef::of_group(causal::kSlotOmega2)};
    for (int s = 0; s < 3; ++s) nodes["Gamma" + std::to_string(s + 1)] = {NodeRef::of_group(causal::kSlotGamma0 + s)};
  } else {
    throw InvalidParams("no role templates for model '" + h.name() + "'");
  }
  return [nodes = std::move(nodes), name = h.name()](const std::string& var, int layer) {
    const auto it = nodes.find(var);
    if (it == nodes.end()) throw InvalidParams(name + " has no site template for variable '" + var + "'");
    return ActivationSite{layer, it->second, std::nullopt};
  };
}

// ---- sweep ---------------------------------------------------------------------------

std::optional<std::size_t> AlignmentGrid::argmin(std::size_t row) const {
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells.at(row).size(); ++c)
    if (cells[row][c] && (!best || *cells[row][c] < *cells[row][*best])) best = c;
  return best;
}

std::size_t AlignmentGrid::row_of(const std::string& variable) const {
  const auto it = std::find(variables.begin(), variables.end(), variable);
  if (it == variables.end()) throw InvalidParams("alignment grid has no row '" + variable + "'");
  return static_cast<std::size_t>(it - variables.begin());
}

AlignmentGrid sweep(const causal::CausalModel& h, const LayeredModel& f, const InputStage& input,
                    std::span<const AttributedGraph> graphs, const SiteTemplate& templates, const SweepConfig& c) {
  if (graphs.size() < 2) throw InvalidParams("sweep: need at least two samples");
  AlignmentGrid grid;
  grid.variables = c.variables;
  if (grid.variables.empty())
    for (int v : h.topo_order())
      if (v != h.output()) grid.variables.push_back(h.variable_name(v));
  grid.layers = c.layers;
  if (grid.layers.empty())
    for (int l = 0; l <= f.num_layers(); ++l) grid.layers.push_back(l);
  for (int l : grid.layers)
    if (l < 0 || l > f.num_layers()) throw InvalidParams("sweep: layer " + std::to_string(l) + " outside the model");

  std::vector<causal::CausalTrace> traces(graphs.size());
  parallel_for(graphs.size(), c.threads, [&](std::size_t i) { traces[i] = causal::evaluate(h, graphs[i]); });

  std::vector<PairSet> pair_sets;
  for (const auto& var : grid.variables)
    pair_sets.push_back(build_pairs(h, graphs, traces, causal::HighVariableSet(h, {var}), c.pair_cap, c.seed));
  const RecordCache records(f, input, graphs, pair_sets, c.threads);

  for (std::size_t r = 0; r < grid.variables.size(); ++r) {
    const PairSet& ps = pair_sets[r];
    grid.pair_count.push_back(ps.pairs.size());
    grid.changed_count.push_back(ps.total_changed);
    auto& row = grid.cells.emplace_back();
    auto& sites = grid.sites.emplace_back();
    auto& skipped = grid.skipped.emplace_back();
    for (int layer : grid.layers) {
      const ActivationSite site = templates(grid.variables[r], layer);
      sites.push_back(site.str());
      if (ps.pairs.empty()) {
        row.emplace_back();
        skipped.push_back(0);
        continue;
      }
      const LiiResult res = compute_LII(f, graphs, records, ps, site, c.threads);
      row.push_back(res.value);
      skipped.push_back(res.skipped);
    }
  }
  grid.metadata = {{"dataset", c.dataset_id}, {"num_samples", graphs.size()}, {"pair_cap", c.pair_cap},
                   {"seed", c.seed},          {"high_model", h.name()}};
  return grid;
}

}  // namespace causalign::intervene
