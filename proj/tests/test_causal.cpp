#include <doctest.h>

#include <thread>

#include "causalign/causal.hpp"
#include "causalign/errors.hpp"
#include "causalign/synthgraph.hpp"

using namespace causalign;
using namespace causalign::causal;

namespace {

constexpr int A = 0, B = 1, C = 2;

// Target 0 with neighbours 1..k carrying the given classes.
AttributedGraph star_sample(std::vector<int> neighbour_classes, std::string id = "toy") {
  AttributedGraph g;
  g.id = std::move(id);
  g.num_nodes = static_cast<int>(neighbour_classes.size()) + 1;
  g.node_class = {A};
  for (int c : neighbour_classes) g.node_class.push_back(c);
  g.features.assign(static_cast<std::size_t>(g.num_nodes), {});
  for (int u = 1; u < g.num_nodes; ++u) g.edges.push_back({0, u});
  g.target = 0;
  return g;
}

// Independent majority oracle: count by hand, lowest class on ties.
int majority_oracle(const std::vector<int>& classes) {
  int best = 0, best_count = -1;
  for (int c = 0; c < 3; ++c) {
    const int n = static_cast<int>(std::count(classes.begin(), classes.end(), c));
    if (n > best_count) best = c, best_count = n;
  }
  return best;
}

synth::Dataset node_dataset(int n, std::uint64_t seed) {
  synth::DatasetConfig c;
  c.num_samples = n;
  c.num_test = 1;
  return synth::generate_dataset(c, seed);
}

}  // namespace

TEST_CASE("h_majority picks the strict majority") {
  const auto h = make_h_majority(3, 3);
  CHECK(evaluate(h, star_sample({A, A, B})).output(h) == A);
  CHECK(evaluate(h, star_sample({C, B, C})).output(h) == C);
}

TEST_CASE("recount after swapping one neighbour's class") {
  const auto h = make_h_majority(3, 3);
  const auto orig = star_sample({A, B, A}, "orig");
  const auto diff = star_sample({C, C, B}, "diff");
  const HighVariableSet zh(h, {"C_u3"});
  CHECK(evaluate(h, orig).output(h) == A);
  CHECK(intervene_high(h, orig, diff, zh) == B);
  const auto pairs = changed_pairs(h, std::vector<AttributedGraph>{orig, diff}, zh);
  CHECK(std::find(pairs.begin(), pairs.end(), std::pair<std::size_t, std::size_t>{0, 1}) != pairs.end());
}

TEST_CASE("changed pairs match a brute-force oracle and are not symmetric") {
  const std::vector<std::vector<int>> classes = {{A, A, B}, {B, B, A}, {A, C, C}, {C, A, A}, {B, A, B}};
  std::vector<AttributedGraph> data;
  for (std::size_t i = 0; i < classes.size(); ++i) data.push_back(star_sample(classes[i], "s" + std::to_string(i)));
  const auto h = make_h_majority(3, 3);
  bool asymmetric = false;
  for (int pinned = 0; pinned < 3; ++pinned) {
    const HighVariableSet zh(h, {"C_u" + std::to_string(pinned + 1)});
    PairList expect;
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t j = 0; j < data.size(); ++j) {
        if (i == j) continue;
        auto spliced = classes[i];
        spliced[pinned] = classes[j][pinned];
        if (majority_oracle(spliced) != majority_oracle(classes[i])) expect.emplace_back(i, j);
      }
    const auto got = changed_pairs(h, data, zh);
    CHECK(got == expect);
    for (auto [i, j] : got)
      if (std::find(got.begin(), got.end(), std::pair{j, i}) == got.end()) asymmetric = true;
  }
  CHECK(asymmetric);
}

TEST_CASE("identical dataset has no changed pairs") {
  const std::vector<AttributedGraph> same(4, star_sample({A, B, B}));
  const auto h = make_h_majority(3, 3);
  CHECK(changed_pairs(h, same, HighVariableSet(h, {"C_u1", "C_u2"})).empty());
}

TEST_CASE("self-intervention, locality and composition on h_node") {
  const auto d = node_dataset(30, 4);
  const auto h = synth::high_level_model(d);
  const std::vector<std::vector<std::string>> sets = {
      {"Psi1"}, {"Psi2"}, {"Psi3"}, {"Phi1"}, {"Phi2"}, {"C_v"}, {"Psi1", "Psi3"}, {"Phi1", "Phi2", "Psi3"}};
  for (const auto& names : sets) {
    const HighVariableSet zh(h, names);
    const auto below = h.descendants(zh.indices());
    for (const auto& g : d.samples) {
      const auto t = evaluate(h, g);
      CHECK(intervene_high(h, g, g, zh) == t.output(h));
      for (const auto& donor : {d.samples[0], d.samples[7]}) {
        const auto td = evaluate(h, donor);
        const auto spliced = intervene_trace(h, g, t, td, zh);
        for (std::size_t v = 0; v < h.size(); ++v) {
          const bool pinned = std::find(zh.indices().begin(), zh.indices().end(), static_cast<int>(v)) !=
                              zh.indices().end();
          if (pinned) CHECK(spliced[static_cast<int>(v)] == td[static_cast<int>(v)]);
          else if (!below[v]) CHECK(spliced[static_cast<int>(v)] == t[static_cast<int>(v)]);
        }
      }
    }
  }
  const HighVariableSet frontier(h, {"Phi1", "Phi2", "Psi3"});
  for (const auto& g : d.samples)
    for (const auto& donor : d.samples) CHECK(intervene_high(h, g, donor, frontier) == donor.label);
}

TEST_CASE("every h_node variable has changed pairs on a generated dataset") {
  const auto d = node_dataset(60, 12);
  const auto h = synth::high_level_model(d);
  for (const char* v : {"Psi1", "Psi2", "Psi3", "Phi1", "Phi2"}) {
    CAPTURE(v);
    CHECK_FALSE(changed_pairs(h, d.samples, HighVariableSet(h, {v})).empty());
  }
}

TEST_CASE("evaluation errors and set validation") {
  const auto h = synth::high_level_model(node_dataset(3, 1));
  auto g = star_sample({A, B, B});
  g.target.reset();
  CHECK_THROWS_AS(evaluate(h, g), GraphStructureError);
  CHECK_THROWS_AS(evaluate(make_h_majority(4, 3), star_sample({A, B, B})), GraphStructureError);
  // Two rings only: the third is missing.
  CHECK_THROWS_AS(evaluate(h, star_sample({A, B, B})), GraphStructureError);
  // Tie in ring 1.
  auto tie = star_sample({A, B});
  CHECK_THROWS_AS(ring_majority(tie, 1), GraphStructureError);
  CHECK_THROWS_AS(HighVariableSet(h, {}), InvalidParams);
  CHECK_THROWS_AS(HighVariableSet(h, {"Y"}), InvalidParams);
  CHECK_THROWS_AS(HighVariableSet(h, {"Psi9"}), InvalidParams);
  CHECK_THROWS_AS(HighVariableSet(h, {"Psi1", "Psi1"}), InvalidParams);
}

TEST_CASE("model construction rejects cycles and unknown names") {
  const Equation zero = [](std::span<const Value>, const AttributedGraph&) { return 0; };
  CHECK_THROWS_AS(CausalModel("m", {{"a", 2, {"b"}, zero}, {"b", 2, {"a"}, zero}}, "a"), InvalidParams);
  CHECK_THROWS_AS(CausalModel("m", {{"a", 2, {"z"}, zero}}, "a"), InvalidParams);
  CHECK_THROWS_AS(CausalModel("m", {{"a", 2, {}, zero}}, "q"), InvalidParams);
  CHECK_THROWS_AS(CausalModel("m", {{"a", 2, {}, zero}, {"a", 2, {}, zero}}, "a"), InvalidParams);
  const CausalModel ok("m", {{"out", 2, {"in"}, zero}, {"in", 2, {}, zero}}, "out");
  CHECK(ok.topo_order() == std::vector<int>{1, 0});
}

TEST_CASE("lookup tables are surjective, influential and serialisable") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t = make_node_table(3, {}, seed);
    CHECK_NOTHROW(check_table(t));
    CHECK(LookupTable::from_json(t.to_json()).entries == t.entries);
    CHECK_NOTHROW(check_table(make_graph_table(3, seed)));
  }
  LookupTable constant{{2, 2}, 2, {0, 1, 0, 1}};
  CHECK_THROWS_AS(check_table(constant), InvalidParams);  // first position ignored
  LookupTable one_class{{2}, 2, {1, 1}};
  CHECK_THROWS_AS(check_table(one_class), InvalidParams);
  CHECK_THROWS_AS(LookupTable::from_json({{"domains", {2}}, {"num_classes", 2}, {"entries", {0}}}), InvalidParams);
  NodeTableWeights flat;
  flat.jitter = 0.0;
  flat.phi1_self = flat.phi1_ring1 = flat.phi2_self = flat.phi2_ring1 = flat.phi2_ring2 = flat.ring3 = 1.0;
  CHECK_THROWS_AS(make_node_table(3, flat, 1), InvalidParams);
}

TEST_CASE("evaluation is deterministic and safe to run concurrently") {
  const auto d = node_dataset(40, 6);
  const auto h = synth::high_level_model(d);
  std::vector<CausalTrace> serial;
  for (const auto& g : d.samples) serial.push_back(evaluate(h, g));
  std::vector<std::vector<CausalTrace>> results(4);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t)
      pool.emplace_back([&, t] {
        for (const auto& g : d.samples) results[t].push_back(evaluate(h, g));
      });
  }
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i].values == serial[i].values);
}
