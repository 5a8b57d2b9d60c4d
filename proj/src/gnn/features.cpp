#include "causalign/errors.hpp"
#include "causalign/gnn.hpp"
#include "causalign/parallel.hpp"

namespace causalign::gnn {

enhancer::NodePayload entry_payload(const synth::SyntheticEntry& e) { return {e.content, e.cls}; }

FeatureBank::FeatureBank(const std::vector<synth::SyntheticEntry>& vocab, enhancer::Enhancer& enc,
                         const std::string& prompt, int position, int threads)
    : dim_(enc.dim()), rows_(vocab.size()) {
  if (position < 1 || position > 10) throw InvalidParams("feature position must lie in [1, 10]");
  parallel_for(vocab.size(), threads, [&](std::size_t i) {
    rows_[i] = enhancer::select_relative_position(enc.encode(entry_payload(vocab[i]), prompt), position);
  });
}

ad::Matrix FeatureBank::node_features(const AttributedGraph& g) const {
  ad::Matrix x(g.num_nodes, dim_);
  for (int u = 0; u < g.num_nodes; ++u) {
    const NodeFeature& f = g.features.at(static_cast<std::size_t>(u));
    if (f.entry >= 0) {
      if (f.entry >= static_cast<int>(rows_.size()))
        throw InvalidParams(g.id + ": node " + std::to_string(u) + " names entry " + std::to_string(f.entry) +
                            " outside the vocabulary");
      x.row(u) = rows_[static_cast<std::size_t>(f.entry)];
    } else {
      if (static_cast<int>(f.raw.size()) != dim_)
        throw ShapeError(g.id + ": node " + std::to_string(u) + " raw vector has " + std::to_string(f.raw.size()) +
                         " values, expected " + std::to_string(dim_));
      for (int c = 0; c < dim_; ++c) x(u, c) = f.raw[static_cast<std::size_t>(c)];
    }
  }
  return x;
}

}  // namespace causalign::gnn
