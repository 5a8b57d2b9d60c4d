#include <cmath>

#include "causalign/errors.hpp"
#include "causalign/gnn.hpp"
#include "causalign/json_util.hpp"
#include "causalign/parallel.hpp"
#include "causalign/rng.hpp"

namespace causalign::gnn {

using nlohmann::json;

ad::Matrix InputStage::layer0(std::size_t sample) const {
  ad::Tape tape;
  return record(tape, sample, {}).value();
}

ad::Var FixedInput::record(ad::Tape& tape, std::size_t sample, std::span<const ad::Var>) const {
  return tape.constant(features_.at(sample));
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"lr", c.lr},     {"momentum", c.momentum},
          {"batch_size", c.batch_size}, {"weight_decay", c.weight_decay}, {"patience", c.patience}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string w = "train";
  check_keys(j, {"epochs", "lr", "momentum", "batch_size", "weight_decay", "patience"}, w);
  TrainConfig c;
  read_opt(j, "epochs", c.epochs, w);
  read_opt(j, "lr", c.lr, w);
  read_opt(j, "momentum", c.momentum, w);
  read_opt(j, "batch_size", c.batch_size, w);
  read_opt(j, "weight_decay", c.weight_decay, w);
  read_opt(j, "patience", c.patience, w);
  return c;
}

namespace {

void validate(const TrainConfig& c) {
  if (c.epochs < 0) throw InvalidParams("train: epochs must be >= 0");
  if (!(c.lr >= 0.0)) throw InvalidParams("train: lr must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw InvalidParams("train: momentum must lie in [0, 1)");
  if (c.batch_size < 1) throw InvalidParams("train: batch_size must be >= 1");
  if (!(c.weight_decay >= 0.0)) throw InvalidParams("train: weight_decay must be >= 0");
  if (c.patience < 0) throw InvalidParams("train: patience must be >= 0");
}

ad::Matrix one_hot(int label, int classes) {
  ad::Matrix y = ad::Matrix::Zero(1, classes);
  y(0, label) = 1.0;
  return y;
}

struct SampleGrad {
  double loss = 0.0;
  std::vector<ad::Matrix> grads;
};

}  // namespace

int predict(const LayeredModel& model, const AttributedGraph& g, const ad::Matrix& input) {
  const ForwardRecord r = model.forward(g, input);
  ad::Index best = 0;
  r.logits.row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

double accuracy(const LayeredModel& model, const InputStage& input, const std::vector<AttributedGraph>& graphs,
                std::span<const int> idx, int threads) {
  if (idx.empty()) return 0.0;
  std::vector<char> hit(idx.size(), 0);
  parallel_for(idx.size(), threads, [&](std::size_t k) {
    const auto i = static_cast<std::size_t>(idx[k]);
    hit[k] = predict(model, graphs.at(i), input.layer0(i)) == graphs[i].label;
  });
  double n = 0;
  for (char h : hit) n += h;
  return n / static_cast<double>(idx.size());
}

TrainResult train(GnnModel& model, InputStage& input, const std::vector<AttributedGraph>& graphs,
                  std::span<const int> train_idx, std::span<const int> test_idx, const TrainConfig& c) {
  validate(c);
  if (train_idx.empty()) throw InvalidParams("train: no training samples");

  std::vector<ad::Tensor*> stage_params = input.params();
  std::vector<ad::Tensor*> all = stage_params;
  for (auto& p : model.params()) all.push_back(&p);
  for (ad::Tensor* p : all) p->set_requires_grad(true);
  const std::size_t num_stage = stage_params.size();

  ad::SgdMomentum opt(c.lr, c.momentum);
  TrainResult result;
  int perfect_streak = 0;
  const std::vector<int> train_list(train_idx.begin(), train_idx.end());

  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    input.begin_epoch(epoch, train_list);
    std::vector<int> order = train_list;
    Rng rng(c.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(c.batch_size)) {
      const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(c.batch_size));
      std::vector<SampleGrad> slots(count);
      parallel_for(count, c.threads, [&](std::size_t k) {
        const auto i = static_cast<std::size_t>(order[start + k]);
        const AttributedGraph& g = graphs.at(i);
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (ad::Tensor* p : all) leaves.push_back(tape.leaf(p->data(), true));
        const std::span<const ad::Var> stage_vars(leaves.data(), num_stage);
        const ad::Var x = input.record(tape, i, stage_vars);
        const TapeForward tf =
            model.record(tape, g, x, {}, [&](ad::Tape&, std::size_t j) { return leaves[num_stage + j]; });
        const ad::Var loss = ad::cross_entropy(tf.logits, one_hot(g.label, model.num_classes()));
        SampleGrad& s = slots[k];
        s.loss = loss.item();
        if (!std::isfinite(s.loss)) return;
        tape.backward(loss);
        for (std::size_t j = 0; j < all.size(); ++j) {
          const ad::Matrix& gr = tape.grad(leaves[j].id());
          s.grads.push_back(gr.size() ? gr : ad::Matrix::Zero(all[j]->data().rows(), all[j]->data().cols()));
        }
      });

      for (std::size_t j = 0; j < all.size(); ++j) all[j]->zero_grad();
      for (const SampleGrad& s : slots) {
        if (!std::isfinite(s.loss))
          throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch));
        epoch_loss += s.loss;
        for (std::size_t j = 0; j < all.size(); ++j) all[j]->grad() += s.grads[j];
      }
      for (ad::Tensor* p : all) {
        p->grad() /= static_cast<double>(count);
        if (c.weight_decay > 0) p->grad() += c.weight_decay * p->data();
      }
      opt.step(all);
      for (ad::Tensor* p : all)
        if (!p->data().allFinite()) throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch));
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.loss = epoch_loss / static_cast<double>(order.size());
    st.train_accuracy = accuracy(model, input, graphs, train_idx, c.threads);
    st.test_accuracy = test_idx.empty() ? 0.0 : accuracy(model, input, graphs, test_idx, c.threads);
    result.curve.push_back(st);
    perfect_streak = st.train_accuracy == 1.0 ? perfect_streak + 1 : 0;
    if (c.patience > 0 && perfect_streak >= c.patience) break;
  }
  return result;
}

}  // namespace causalign::gnn
