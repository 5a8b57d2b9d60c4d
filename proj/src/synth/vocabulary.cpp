#include <algorithm>
#include <set>

#include "causalign/errors.hpp"
#include "causalign/rng.hpp"
#include "causalign/synthgraph.hpp"

namespace causalign::synth {
namespace {

constexpr std::string_view kOnsets = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string pseudo_word(Rng& rng, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kOnsets[rng.index(kOnsets.size())];
    w += kVowels[rng.index(kVowels.size())];
  }
  return w;
}

std::vector<std::string> word_pool(Rng& rng, std::set<std::string>& used, int count) {
  std::vector<std::string> pool;
  while (static_cast<int>(pool.size()) < count) {
    std::string w = pseudo_word(rng, 2 + static_cast<int>(rng.index(2)));
    if (used.insert(w).second) pool.push_back(std::move(w));
  }
  return pool;
}

// Up to `count` distinct picks from `candidates`.
std::vector<int> pick_distinct(Rng& rng, std::vector<int> candidates, int count) {
  rng.shuffle(candidates);
  if (static_cast<int>(candidates.size()) > count) candidates.resize(static_cast<std::size_t>(count));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

void validate(const VocabConfig& c) {
  if (c.num_entries < kNumSubclasses)
    throw InvalidParams("vocabulary needs at least " + std::to_string(kNumSubclasses) + " entries, got " +
                        std::to_string(c.num_entries));
  if (!(c.noise >= 0.0 && c.noise <= 1.0)) throw InvalidParams("vocabulary noise must lie in [0, 1]");
  double total = 0.0;
  for (double w : c.class_weights) {
    if (!(w >= 0.0)) throw InvalidParams("class weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidParams("class weights must not all be zero");
  if (c.related < 0 || c.similar < 0) throw InvalidParams("link counts must be non-negative");
  if (c.min_tokens < 1 || c.max_tokens < c.min_tokens)
    throw InvalidParams("content length range must satisfy 1 <= min_tokens <= max_tokens");
}

std::vector<SyntheticEntry> gen_vocabulary(const VocabConfig& c, std::uint64_t seed) {
  validate(c);
  Rng rng(seed, "vocabulary");
  std::set<std::string> used;
  const auto generic = word_pool(rng, used, 40);
  std::vector<std::vector<std::string>> class_words, subclass_words;
  for (int k = 0; k < kNumClasses; ++k) class_words.push_back(word_pool(rng, used, 10));
  for (int s = 0; s < kNumSubclasses; ++s) subclass_words.push_back(word_pool(rng, used, 8));

  const std::vector<double> weights(c.class_weights.begin(), c.class_weights.end());
  std::vector<SyntheticEntry> vocab(static_cast<std::size_t>(c.num_entries));
  std::set<std::string> names;
  for (int i = 0; i < c.num_entries; ++i) {
    SyntheticEntry& e = vocab[i];
    if (i < kNumSubclasses) {
      e.subclass = i;
    } else {
      const int cls = static_cast<int>(rng.weighted(weights));
      e.subclass = cls * kSubclassesPerClass + static_cast<int>(rng.index(kSubclassesPerClass));
    }
    e.cls = e.subclass / kSubclassesPerClass;
    do {
      e.name = pseudo_word(rng, 3) + "_" + std::to_string(i);
    } while (!names.insert(e.name).second);
    const int len = static_cast<int>(rng.uniform_int(c.min_tokens, c.max_tokens));
    for (int t = 0; t < len; ++t) {
      const double u = rng.uniform();
      const auto& pool = u < 0.45 ? subclass_words[e.subclass] : u < 0.7 ? class_words[e.cls] : generic;
      e.content.push_back(pool[rng.index(pool.size())]);
    }
  }

  for (int i = 0; i < c.num_entries; ++i) {
    SyntheticEntry& e = vocab[i];
    std::vector<int> same_sub, same_class, other_class;
    for (int j = 0; j < c.num_entries; ++j) {
      if (j == i) continue;
      if (vocab[j].subclass == e.subclass) same_sub.push_back(j);
      if (vocab[j].cls == e.cls) same_class.push_back(j);
      else other_class.push_back(j);
    }
    const auto& affine = same_sub.empty() ? same_class : same_sub;
    std::set<int> related;
    for (int r = 0; r < c.related; ++r) {
      const bool leave = rng.bernoulli(c.noise) && !other_class.empty();
      const auto& pool = leave ? other_class : affine;
      if (!pool.empty()) related.insert(pool[rng.index(pool.size())]);
    }
    e.related.assign(related.begin(), related.end());
    e.similar = pick_distinct(rng, affine, c.similar);
  }
  return vocab;
}

std::vector<SyntheticEntry> gen_vocabulary(int num_entries, std::uint64_t seed) {
  VocabConfig c;
  c.num_entries = num_entries;
  return gen_vocabulary(c, seed);
}

}  // namespace causalign::synth
