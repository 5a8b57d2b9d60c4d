#include <cmath>

#include "causalign/at.hpp"
#include "causalign/errors.hpp"
#include "causalign/parallel.hpp"
#include "causalign/rng.hpp"

namespace causalign::at {

namespace {

ad::Matrix glorot(Rng& rng, ad::Index rows, ad::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  ad::Matrix w(rows, cols);
  for (ad::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

AttentionEncoder::AttentionEncoder(int input_dim, const EncoderConfig& c, std::uint64_t seed)
    : config_(c), input_dim_(input_dim) {
  if (input_dim < 1) throw InvalidParams("attention encoder: input_dim must be >= 1");
  if (c.layers < 1 || c.width < 1 || c.heads != 1)
    throw InvalidParams("attention encoder: needs layers >= 1, width >= 1 and one head");
  const ad::Index w = c.width;
  const auto add = [&](Rng& rng, std::string name, ad::Index rows, ad::Index cols) {
    params_.emplace_back(glorot(rng, rows, cols), true);
    names_.push_back(std::move(name));
  };
  Rng rin(seed, "at_init", 0);
  add(rin, "at.input", input_dim, w);
  for (int l = 1; l <= c.layers; ++l) {
    Rng rng(seed, "at_init", static_cast<std::uint64_t>(l));
    const std::string p = "at.layer" + std::to_string(l) + ".";
    add(rng, p + "query", w, w);
    add(rng, p + "key", w, w);
    if (l < c.layers) {
      add(rng, p + "value", w, w);
      add(rng, p + "out", w, w);
      add(rng, p + "ff1", w, w);
      add(rng, p + "ff2", w, w);
    }
  }
}

ad::Var AttentionEncoder::scores(ad::Tape& tape, ad::Var s, ad::Index m, std::span<const ad::Var> bound) const {
  if (s.shape().cols != input_dim_)
    throw ShapeError("attention encoder input " + s.shape().str() + " does not have " + std::to_string(input_dim_) +
                     " columns");
  if (m < 1 || s.shape().rows % m != 0)
    throw ShapeError("attention encoder input " + s.shape().str() + " is not a stack of " + std::to_string(m) +
                     "-row blocks");
  if (!bound.empty() && bound.size() != params_.size()) throw InvalidParams("attention encoder: wrong bound count");
  std::size_t next = 0;
  const auto param = [&] {
    const std::size_t i = next++;
    return bound.empty() ? tape.constant(params_[i].data()) : bound[i];
  };
  const double inv_sqrt_w = 1.0 / std::sqrt(static_cast<double>(config_.width));

  ad::Var h = ad::matmul(s, param());
  for (int l = 1; l < config_.layers; ++l) {
    const ad::Var q = ad::matmul(h, param());
    const ad::Var k = ad::matmul(h, param());
    const ad::Var v = ad::matmul(h, param());
    const ad::Var p = ad::row_softmax(ad::scale(ad::block_qk(q, k, m), inv_sqrt_w));
    h = ad::add(h, ad::matmul(ad::block_apply(p, v, m), param()));
    const ad::Var w1 = param();
    h = ad::add(h, ad::matmul(ad::relu(ad::matmul(h, w1)), param()));
  }
  const ad::Var q = ad::matmul(h, param());
  const ad::Var k = ad::matmul(h, param());
  return ad::block_qk(q, k, m);
}

Scores score(ad::Tape& tape, const AttentionEncoder& enc, ad::Var s, ad::Index m, ad::Index group,
             std::span<const ad::Var> bound) {
  Scores out;
  out.attention = enc.scores(tape, s, m, bound);
  out.alpha = ad::row_mean(out.attention);
  out.alpha_bar = ad::group_softmax(out.alpha, group);
  return out;
}

ad::Var fuse(ad::Var alpha_bar, ad::Var s, ad::Index q, ad::Index m) {
  return ad::scale(ad::segment_sum(ad::mul_col(s, alpha_bar), q * m), 1.0 / static_cast<double>(q * m));
}

// ---- features -------------------------------------------------------------------------

PromptFeatures::PromptFeatures(const std::vector<synth::SyntheticEntry>& vocab, enhancer::Enhancer& enc,
                               const std::vector<std::string>& prompts, int m, IndexRule rule, int threads)
    : q_(static_cast<int>(prompts.size())), m_(m), dim_(enc.dim()), rows_(vocab.size()) {
  if (prompts.empty()) throw InvalidParams("prompt features: no prompts");
  if (m < 1) throw InvalidParams("prompt features: m must be >= 1");
  parallel_for(vocab.size(), threads, [&](std::size_t e) {
    ad::Matrix rows(static_cast<ad::Index>(q_) * m_, dim_);
    for (int i = 0; i < q_; ++i) {
      const auto seq = enc.encode(gnn::entry_payload(vocab[e]), prompts[static_cast<std::size_t>(i)], i);
      const auto idx = select_indices(seq.size(), m_, rule);
      for (int j = 0; j < m_; ++j) rows.row(i * m_ + j) = seq.tokens.row(idx[static_cast<std::size_t>(j)] - 1);
    }
    rows_[e] = std::move(rows);
  });
}

ad::Matrix PromptFeatures::stack(const AttributedGraph& g, std::optional<int> prompt) const {
  if (prompt && (*prompt < 0 || *prompt >= q_)) throw InvalidParams("prompt index outside [0, q)");
  const ad::Index per = prompt ? m_ : static_cast<ad::Index>(q_) * m_;
  const ad::Index first = prompt ? static_cast<ad::Index>(*prompt) * m_ : 0;
  ad::Matrix out(g.num_nodes * per, dim_);
  for (int u = 0; u < g.num_nodes; ++u) {
    const NodeFeature& f = g.features.at(static_cast<std::size_t>(u));
    if (f.entry >= 0) {
      if (f.entry >= static_cast<int>(rows_.size()))
        throw InvalidParams(g.id + ": node " + std::to_string(u) + " names an entry outside the vocabulary");
      out.middleRows(u * per, per) = rows_[static_cast<std::size_t>(f.entry)].middleRows(first, per);
    } else {
      if (static_cast<int>(f.raw.size()) != dim_)
        throw ShapeError(g.id + ": node " + std::to_string(u) + " raw vector has the wrong dimension");
      for (ad::Index r = 0; r < per; ++r)
        for (int c = 0; c < dim_; ++c) out(u * per + r, c) = f.raw[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

// ---- input stage ----------------------------------------------------------------------

AtInput::AtInput(const PromptFeatures& features, const std::vector<AttributedGraph>& graphs, const AtConfig& c,
                 std::uint64_t seed)
    : features_(&features), graphs_(&graphs), config_(c), encoder_(features.dim(), c.encoder, seed) {
  validate(c);
  if (features.q() != c.q || features.m() != c.m)
    throw InvalidParams("AT input: prompt features were built for a different q or m");
  stacks_.reserve(graphs.size());
  for (const auto& g : graphs) stacks_.push_back(features.stack(g));
}

std::vector<ad::Tensor*> AtInput::params() {
  std::vector<ad::Tensor*> out;
  for (auto& p : encoder_.params()) out.push_back(&p);
  return out;
}

Scores AtInput::scores(ad::Tape& tape, std::size_t sample) const {
  const ad::Index m = config_.m;
  const ad::Index group = fixed_ ? m : static_cast<ad::Index>(config_.q) * m;
  return score(tape, encoder_, tape.constant(stacks_.at(sample)), m, group);
}

ad::Var AtInput::record(ad::Tape& tape, std::size_t sample, std::span<const ad::Var> bound) const {
  const ad::Index m = config_.m;
  const ad::Index q = fixed_ ? 1 : config_.q;
  const ad::Var s = tape.constant(stacks_.at(sample));
  const Scores sc = score(tape, encoder_, s, m, q * m, bound);
  return fuse(sc.alpha_bar, s, q, m);
}

void AtInput::fix(int prompt) {
  if (fixed_) throw InvalidParams("AT input: the prompt is already fixed");
  stacks_.clear();
  for (const auto& g : *graphs_) stacks_.push_back(features_->stack(g, prompt));
  fixed_ = prompt;
}

std::vector<double> AtInput::prompt_mass(std::span<const int> samples) const {
  std::vector<double> mass(static_cast<std::size_t>(config_.q), 0.0);
  if (fixed_) {
    mass[static_cast<std::size_t>(*fixed_)] = 1.0;
    return mass;
  }
  const ad::Index qm = static_cast<ad::Index>(config_.q) * config_.m;
  double nodes = 0;
  for (int i : samples) {
    ad::Tape tape;
    const ad::Matrix a = scores(tape, static_cast<std::size_t>(i)).alpha_bar.value();
    for (ad::Index r = 0; r < a.rows(); ++r) mass[static_cast<std::size_t>((r % qm) / config_.m)] += a(r, 0);
    nodes += static_cast<double>(a.rows() / qm);
  }
  if (nodes > 0)
    for (double& v : mass) v /= nodes;
  return mass;
}

void AtInput::begin_epoch(int epoch, std::span<const int> train) {
  if (fixed_ || epoch != config_.delta) return;
  const std::vector<double> mass = prompt_mass(train);
  std::size_t best = 0;
  for (std::size_t i = 1; i < mass.size(); ++i)
    if (mass[i] > mass[best]) best = i;
  fix(static_cast<int>(best));
}

std::vector<NamedTensor> AtInput::tensors() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < encoder_.params().size(); ++i)
    out.push_back({encoder_.param_names()[i], encoder_.params()[i].data()});
  return out;
}

void AtInput::load(const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < encoder_.params().size(); ++i) {
    const ad::Matrix& v = ckpt.at(encoder_.param_names()[i]);
    if (ad::shape_of(v) != encoder_.params()[i].shape())
      throw IoError("checkpoint tensor " + encoder_.param_names()[i] + " has the wrong shape");
    encoder_.params()[i].data() = v;
  }
  if (ckpt.meta.contains("fixed_prompt") && !ckpt.meta.at("fixed_prompt").is_null()) {
    const int p = ckpt.meta.at("fixed_prompt").get<int>();
    if (fixed_ != p) {
      if (fixed_) throw IoError("checkpoint fixes a different prompt");
      fix(p);
    }
  }
}

}  // namespace causalign::at
