#include <algorithm>
#include <cmath>

#include "causalign/errors.hpp"
#include "causalign/gnn.hpp"
#include "causalign/json_util.hpp"
#include "causalign/rng.hpp"

namespace causalign::gnn {

using nlohmann::json;

std::string to_string(Arch a) {
  switch (a) {
    case Arch::GCN: return "gcn";
    case Arch::GAT: return "gat";
    case Arch::SAGE: return "sage";
  }
  return "?";
}

std::string to_string(Readout r) {
  switch (r) {
    case Readout::TargetNode: return "target_node";
    case Readout::MeanPool: return "mean_pool";
    case Readout::MaxPool: return "max_pool";
  }
  return "?";
}

Arch arch_from_string(const std::string& s) {
  if (s == "gcn") return Arch::GCN;
  if (s == "gat") return Arch::GAT;
  if (s == "sage") return Arch::SAGE;
  throw ConfigError("model.arch: expected gcn, gat or sage, got '" + s + "'");
}

Readout readout_from_string(const std::string& s) {
  if (s == "target_node") return Readout::TargetNode;
  if (s == "mean_pool") return Readout::MeanPool;
  if (s == "max_pool") return Readout::MaxPool;
  throw ConfigError("model.readout: expected target_node, mean_pool or max_pool, got '" + s + "'");
}

void validate(const GnnConfig& c) {
  if (c.num_layers < 1 || c.num_layers > 12) throw InvalidParams("model: num_layers must lie in [1, 12]");
  if (c.hidden_dim < 1) throw InvalidParams("model: hidden_dim must be >= 1");
  if (c.num_classes < 2) throw InvalidParams("model: num_classes must be >= 2");
  if (c.input_dim < 1) throw InvalidParams("model: input_dim must be >= 1");
  if (!(c.gat_slope >= 0.0 && c.gat_slope < 1.0)) throw InvalidParams("model: gat_slope must lie in [0, 1)");
}

void validate(const GnnConfig& c, synth::Task task) {
  validate(c);
  if (c.readout == Readout::TargetNode && task != synth::Task::NodeLevel)
    throw InvalidParams("model: target_node readout needs a node-level task");
}

json to_json(const GnnConfig& c) {
  return {{"arch", to_string(c.arch)},         {"num_layers", c.num_layers}, {"hidden_dim", c.hidden_dim},
          {"num_classes", c.num_classes},      {"readout", to_string(c.readout)}, {"input_dim", c.input_dim},
          {"gat_slope", c.gat_slope}};
}

GnnConfig gnn_config_from_json(const json& j) {
  const std::string w = "model";
  check_keys(j, {"arch", "num_layers", "hidden_dim", "num_classes", "readout", "input_dim", "gat_slope"}, w);
  GnnConfig c;
  std::string s;
  if (j.contains("arch")) {
    read_opt(j, "arch", s, w);
    c.arch = arch_from_string(s);
  }
  if (j.contains("readout")) {
    read_opt(j, "readout", s, w);
    c.readout = readout_from_string(s);
  }
  read_opt(j, "num_layers", c.num_layers, w);
  read_opt(j, "hidden_dim", c.hidden_dim, w);
  read_opt(j, "num_classes", c.num_classes, w);
  read_opt(j, "input_dim", c.input_dim, w);
  read_opt(j, "gat_slope", c.gat_slope, w);
  return c;
}

// ---- operators ---------------------------------------------------------------------

ad::Matrix self_loop_mask(int n, const std::vector<Edge>& edges) {
  ad::Matrix m = ad::Matrix::Identity(n, n);
  for (const auto& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) throw GraphStructureError("edge outside the graph");
    m(e.u, e.v) = m(e.v, e.u) = 1.0;
  }
  return m;
}

ad::Matrix normalized_adjacency(int n, const std::vector<Edge>& edges) {
  ad::Matrix a = self_loop_mask(n, edges);
  Eigen::VectorXd inv_sqrt = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

ad::Matrix mean_adjacency(int n, const std::vector<Edge>& edges) {
  ad::Matrix a = self_loop_mask(n, edges) - ad::Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    const double d = a.row(i).sum();
    if (d > 0) a.row(i) /= d;
  }
  return a;
}

// ---- model --------------------------------------------------------------------------

namespace {

ad::Matrix glorot(Rng& rng, ad::Index rows, ad::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  ad::Matrix w(rows, cols);
  for (ad::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

GnnModel::GnnModel(const GnnConfig& c, std::uint64_t seed) : config_(c) {
  validate(c);
  for (int k = 1; k <= c.num_layers; ++k) {
    const ad::Index in = layer_width(k - 1);
    const ad::Index out = layer_width(k);
    Rng rng(seed, "gnn_init", static_cast<std::uint64_t>(k));
    const std::string p = "layer" + std::to_string(k) + ".";
    layer_offset_.push_back(params_.size());
    const auto add = [&](std::string name, ad::Matrix m) {
      params_.emplace_back(std::move(m), true);
      names_.push_back(p + std::move(name));
    };
    add("weight", glorot(rng, c.arch == Arch::SAGE ? 2 * in : in, out));
    if (c.arch == Arch::GAT) {
      add("att_src", glorot(rng, out, 1));
      add("att_dst", glorot(rng, out, 1));
    }
    add("bias", ad::Matrix::Zero(1, out));
  }
}

ad::Index GnnModel::layer_width(int layer) const {
  if (layer == 0) return config_.input_dim;
  return layer == config_.num_layers ? config_.num_classes : config_.hidden_dim;
}

TapeForward GnnModel::record(ad::Tape& tape, const AttributedGraph& g, ad::Var input,
                             std::span<const PatchRegion> patches, const ParamBinder& bind) const {
  const int n = g.num_nodes;
  if (input.shape() != ad::Shape{n, config_.input_dim})
    throw ShapeError("gnn input " + input.shape().str() + " does not match [" + std::to_string(n) + "x" +
                     std::to_string(config_.input_dim) + "] expected for " + g.id);
  if (config_.readout == Readout::TargetNode && !g.target)
    throw GraphStructureError("target-node readout on " + g.id + ", which has no target");

  TapeForward out;
  ad::Var h = input;
  for (const auto& p : patches)
    if (p.layer == 0) h = ad::patch(h, p.rows, p.col_begin, p.col_end, p.values);
  out.layers.push_back(h);
  run_layers(tape, g, 0, h, patches, bind, out);
  return out;
}

void GnnModel::run_layers(ad::Tape& tape, const AttributedGraph& g, int first, ad::Var h,
                          std::span<const PatchRegion> patches, const ParamBinder& bind, TapeForward& out) const {
  const int n = g.num_nodes;
  const auto param = [&](std::size_t i) { return bind ? bind(tape, i) : tape.constant(params_[i].data()); };
  const auto apply_patches = [&](int layer, ad::Var v) {
    for (const auto& p : patches)
      if (p.layer == layer) v = ad::patch(v, p.rows, p.col_begin, p.col_end, p.values);
    return v;
  };

  ad::Var op;
  switch (config_.arch) {
    case Arch::GCN: op = tape.constant(normalized_adjacency(n, g.edges)); break;
    case Arch::SAGE: op = tape.constant(mean_adjacency(n, g.edges)); break;
    case Arch::GAT: break;
  }
  const ad::Matrix mask = config_.arch == Arch::GAT ? self_loop_mask(n, g.edges) : ad::Matrix();

  for (int k = first + 1; k <= config_.num_layers; ++k) {
    const std::size_t base = layer_offset_[static_cast<std::size_t>(k - 1)];
    ad::Var z;
    switch (config_.arch) {
      case Arch::GCN:
        z = ad::add_row(ad::matmul(op, ad::matmul(h, param(base))), param(base + 1));
        break;
      case Arch::SAGE:
        z = ad::add_row(ad::matmul(ad::concat_cols(h, ad::matmul(op, h)), param(base)), param(base + 1));
        break;
      case Arch::GAT: {
        const ad::Var xw = ad::matmul(h, param(base));
        const ad::Var src = ad::matmul(xw, param(base + 1));
        const ad::Var dst = ad::matmul(xw, param(base + 2));
        const ad::Var scores = ad::leaky_relu(ad::outer_sum(src, ad::transpose(dst)), config_.gat_slope);
        z = ad::add_row(ad::matmul(ad::masked_row_softmax(scores, mask), xw), param(base + 3));
        break;
      }
    }
    h = k < config_.num_layers ? ad::relu(z) : z;
    h = apply_patches(k, h);
    out.layers.push_back(h);
  }
  if (config_.readout == Readout::TargetNode) {
    const ad::Index t = *g.target;
    out.logits = ad::index_select(h, std::span<const ad::Index>(&t, 1));
  } else if (config_.readout == Readout::MeanPool) {
    out.logits = ad::col_mean(h);
  } else {
    out.logits = ad::col_max(h);
  }
}

ForwardRecord GnnModel::forward_patched(const AttributedGraph& g, const ad::Matrix& input,
                                        std::span<const PatchRegion> patches) const {
  check_patches(patches, g.num_nodes);
  ad::Tape tape;
  const TapeForward tf = record(tape, g, tape.constant(input), patches);
  ForwardRecord r;
  for (const auto& v : tf.layers) r.layers.push_back(v.value());
  r.logits = tf.logits.value();
  return r;
}

ForwardRecord GnnModel::resume_patched(const AttributedGraph& g, const ForwardRecord& base,
                                       std::span<const PatchRegion> patches) const {
  check_patches(patches, g.num_nodes);
  if (base.layers.size() != static_cast<std::size_t>(config_.num_layers) + 1)
    throw ShapeError("resume_patched: base record has the wrong number of layers");
  int first = config_.num_layers;
  for (const auto& p : patches) first = std::min(first, p.layer);
  if (patches.empty()) return base;
  if (config_.readout == Readout::TargetNode && !g.target)
    throw GraphStructureError("target-node readout on " + g.id + ", which has no target");
  ad::Tape tape;
  TapeForward tf;
  ad::Var h = tape.constant(base.layers[static_cast<std::size_t>(first)]);
  for (const auto& p : patches)
    if (p.layer == first) h = ad::patch(h, p.rows, p.col_begin, p.col_end, p.values);
  tf.layers.push_back(h);
  run_layers(tape, g, first, h, patches, {}, tf);
  ForwardRecord r;
  r.layers.assign(base.layers.begin(), base.layers.begin() + first);
  for (const auto& v : tf.layers) r.layers.push_back(v.value());
  r.logits = tf.logits.value();
  return r;
}

Checkpoint GnnModel::to_checkpoint() const {
  Checkpoint c;
  c.meta = {{"model", "gnn"}, {"config", to_json(config_)}};
  for (std::size_t i = 0; i < params_.size(); ++i) c.tensors.push_back({names_[i], params_[i].data()});
  return c;
}

GnnModel GnnModel::from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("config")) throw IoError("checkpoint has no model config");
  GnnModel m(gnn_config_from_json(ckpt.meta.at("config")), 0);
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    const ad::Matrix& v = ckpt.at(m.names_[i]);
    if (ad::shape_of(v) != m.params_[i].shape())
      throw IoError("checkpoint tensor " + m.names_[i] + " has shape " + ad::shape_of(v).str() + ", expected " +
                    m.params_[i].shape().str());
    m.params_[i].data() = v;
  }
  return m;
}

}  // namespace causalign::gnn
