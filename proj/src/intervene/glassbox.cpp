#include <algorithm>

#include "causalign/errors.hpp"
#include "causalign/intervene.hpp"

namespace causalign::intervene {

namespace {

int argmax_lowest(const ad::Matrix& h, ad::Index row, ad::Index begin, ad::Index end) {
  ad::Index best = begin;
  for (ad::Index c = begin + 1; c < end; ++c)
    if (h(row, c) > h(row, best)) best = c;
  return static_cast<int>(best - begin);
}

int majority_lowest(const std::vector<int>& classes, int num_classes) {
  std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
  for (int c : classes) ++count[static_cast<std::size_t>(c)];
  return static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
}

void set_one_hot(ad::Matrix& h, ad::Index row, const gnn::DimSlice& s, int value, double scale = 1.0) {
  h(row, s.begin + value) = scale;
}

void apply(ad::Matrix& h, int layer, std::span<const PatchRegion> patches) {
  for (const auto& p : patches)
    if (p.layer == layer)
      for (std::size_t i = 0; i < p.rows.size(); ++i)
        h.row(p.rows[i]).segment(p.col_begin, p.col_end - p.col_begin) = p.values.row(static_cast<ad::Index>(i));
}

}  // namespace

GlassBox::GlassBox(const causal::CausalModel& h, std::span<const AttributedGraph> graphs) {
  if (h.name() != "h_node" || !h.tables.contains("Y"))
    throw InvalidParams("the reference network needs the node-level model with its lookup table");
  table_ = causal::LookupTable::from_json(h.tables.at("Y"));
  const int c = classes_ = table_.num_classes;
  if (table_.domains != std::vector<int>{c * c, c * c * c, c})
    throw InvalidParams("reference network: lookup table domains do not match (Phi1, Phi2, Psi3)");

  ad::Index at = c;  // [0, c) carries each node's class
  const auto block = [&](const std::string& var, int layer, ad::Index size) {
    if (h.domain(h.index_of(var)) != size) throw InvalidParams("reference network: unexpected domain of " + var);
    encodings_[var] = {layer, {at, at + size}};
    at += size;
  };
  block("C_v", 1, c);
  block("Psi1", 1, c);
  block("Psi2", 1, c);
  block("Phi1", 2, c * c);
  block("Phi2", 2, c * c * c);
  block("Psi3", 2, c);
  width_ = at;

  for (const auto& g : graphs) {
    const int expected = causal::evaluate(h, g).output(h);
    if (gnn::predict(*this, g, input(g)) != expected)
      throw InvalidParams("reference network disagrees with h_node on " + g.id);
  }
}

int GlassBox::decode(const ad::Matrix& h, ad::Index row, const std::string& var) const {
  const gnn::DimSlice& s = encodings_.at(var).dims;
  return argmax_lowest(h, row, s.begin, s.end);
}

ad::Matrix GlassBox::input(const AttributedGraph& g) const {
  ad::Matrix x = ad::Matrix::Zero(g.num_nodes, width_);
  for (int u = 0; u < g.num_nodes; ++u) {
    const int cls = g.node_class.at(static_cast<std::size_t>(u));
    if (cls < 0 || cls >= classes_) throw InvalidParams(g.id + ": node class outside the model's classes");
    x(u, cls) = 1.0;
  }
  return x;
}

gnn::FixedInput GlassBox::inputs(std::span<const AttributedGraph> graphs) const {
  std::vector<ad::Matrix> xs;
  xs.reserve(graphs.size());
  for (const auto& g : graphs) xs.push_back(input(g));
  return gnn::FixedInput(std::move(xs));
}

ForwardRecord GlassBox::forward_patched(const AttributedGraph& g, const ad::Matrix& input,
                                        std::span<const PatchRegion> patches) const {
  const ad::Index n = g.num_nodes;
  if (input.rows() != n || input.cols() != width_)
    throw ShapeError("reference network input " + ad::shape_of(input).str() + " for " + g.id);
  if (!g.target) throw GraphStructureError("reference network needs a target node in " + g.id);
  check_patches(patches, n);
  const ad::Index t = *g.target;
  const std::vector<int> dist = bfs_distances(g, static_cast<int>(t));
  const auto ring_classes = [&](const ad::Matrix& h, int ring) {
    std::vector<int> out;
    for (ad::Index u = 0; u < n; ++u)
      if (dist[static_cast<std::size_t>(u)] == ring) out.push_back(argmax_lowest(h, u, 0, classes_));
    return out;
  };
  const auto& enc = encodings_;

  ForwardRecord r;
  ad::Matrix h0 = input;
  apply(h0, 0, patches);

  ad::Matrix h1 = ad::Matrix::Zero(n, width_);
  for (ad::Index u = 0; u < n; ++u) h1(u, argmax_lowest(h0, u, 0, classes_)) = 1.0;
  set_one_hot(h1, t, enc.at("C_v").dims, argmax_lowest(h0, t, 0, classes_));
  set_one_hot(h1, t, enc.at("Psi1").dims, majority_lowest(ring_classes(h0, 1), classes_));
  set_one_hot(h1, t, enc.at("Psi2").dims, majority_lowest(ring_classes(h0, 2), classes_));
  apply(h1, 1, patches);

  ad::Matrix h2 = ad::Matrix::Zero(n, width_);
  const int cv = decode(h1, t, "C_v");
  const int psi1 = decode(h1, t, "Psi1");
  const int psi2 = decode(h1, t, "Psi2");
  set_one_hot(h2, t, enc.at("Phi1").dims, cv * classes_ + psi1);
  set_one_hot(h2, t, enc.at("Phi2").dims, (cv * classes_ + psi1) * classes_ + psi2);
  set_one_hot(h2, t, enc.at("Psi3").dims, majority_lowest(ring_classes(h1, 3), classes_));
  apply(h2, 2, patches);

  ad::Matrix h3 = ad::Matrix::Zero(n, classes_);
  const int key[] = {decode(h2, t, "Phi1"), decode(h2, t, "Phi2"), decode(h2, t, "Psi3")};
  h3(t, table_(key)) = kLogitScale;
  apply(h3, 3, patches);

  r.logits = h3.row(t);
  r.layers = {std::move(h0), std::move(h1), std::move(h2), std::move(h3)};
  return r;
}

SiteTemplate GlassBox::templates() const {
  return [enc = encodings_, last = num_layers()](const std::string& var, int layer) {
    const auto it = enc.find(var);
    if (it == enc.end()) throw InvalidParams("reference network encodes no variable '" + var + "'");
    ActivationSite s{layer, {gnn::NodeRef::of_role({0, 0})}, std::nullopt};
    if (layer < last) s.dims = it->second.dims;
    return s;
  };
}

// ---- oracle ------------------------------------------------------------------------

OracleReport run_oracle(const causal::CausalModel& h, std::span<const AttributedGraph> graphs, SweepConfig c) {
  const GlassBox box(h, graphs);
  if (c.variables.empty()) c.variables = {"Psi1", "Psi2", "Psi3", "Phi1", "Phi2"};
  const gnn::FixedInput in = box.inputs(graphs);
  OracleReport rep;
  rep.grid = sweep(h, box, in, graphs, box.templates(), c);
  rep.grid.metadata["model"] = "reference";
  rep.pass = true;
  for (std::size_t r = 0; r < rep.grid.variables.size(); ++r) {
    OracleRow row;
    row.variable = rep.grid.variables[r];
    row.constructed_layer = box.encodings().at(row.variable).layer;
    row.argmin_layer = rep.grid.argmin_layer(r);
    const auto col = std::find(rep.grid.layers.begin(), rep.grid.layers.end(), row.constructed_layer);
    if (col != rep.grid.layers.end()) {
      const std::size_t k = static_cast<std::size_t>(col - rep.grid.layers.begin());
      row.value = rep.grid.cells[r][k];
      for (std::size_t j = 0; j < rep.grid.layers.size(); ++j)
        if (j != k && rep.grid.cells[r][j] && row.value) {
          const double gap = *rep.grid.cells[r][j] - *row.value;
          row.margin = row.margin ? std::min(*row.margin, gap) : gap;
        }
    }
    row.pass = row.value && row.argmin_layer == row.constructed_layer && *row.value < kOracleTolerance &&
               (!row.margin || *row.margin >= kOracleMargin);
    if (row.value) rep.max_lii = std::max(rep.max_lii, *row.value);
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

nlohmann::json to_json(const OracleReport& r) {
  using nlohmann::json;
  json rows = json::array();
  const auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& row : r.rows)
    rows.push_back({{"variable", row.variable},
                    {"constructed_layer", row.constructed_layer},
                    {"argmin_layer", opt(row.argmin_layer)},
                    {"lii", opt(row.value)},
                    {"margin", opt(row.margin)},
                    {"pass", row.pass}});
  return {{"pass", r.pass}, {"max_lii", r.max_lii}, {"rows", rows}, {"grid", to_json(r.grid)}};
}

}  // namespace causalign::intervene
