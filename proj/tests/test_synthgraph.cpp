#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "causalign/errors.hpp"
#include "causalign/rng.hpp"
#include "causalign/synthgraph.hpp"

using namespace causalign;
using namespace causalign::synth;

namespace {

TopologySpec spec(TopologyKind k, std::map<std::string, int> p) { return {k, std::move(p)}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("causalign_" + name);
  std::filesystem::remove_all(d);
  return d;
}

DatasetConfig small_node_config(int n) {
  DatasetConfig c;
  c.num_samples = n;
  c.num_test = n / 4;
  return c;
}

}  // namespace

TEST_CASE("topology edge counts") {
  CHECK(gen_topology(spec(TopologyKind::Chain, {{"n", 3}}), 0).edges.size() == 2);
  CHECK(gen_topology(spec(TopologyKind::Chain, {{"n", 3}}), 0).num_nodes == 3);
  CHECK(gen_topology(spec(TopologyKind::Complete, {{"n", 4}}), 0).edges.size() == 6);
  const auto star = gen_topology(spec(TopologyKind::Star, {{"n", 5}}), 0);
  CHECK(star.edges.size() == 4);
  CHECK(degrees(star.num_nodes, star.edges)[0] == 4);
  // Hand count for a 5-spoke wheel: 5 rim edges plus 5 spokes.
  CHECK(gen_topology(spec(TopologyKind::Wheel, {{"outer", 5}}), 0).edges.size() == 10);
  CHECK(gen_topology(spec(TopologyKind::Grid, {{"rows", 2}, {"cols", 3}}), 0).edges.size() == 7);
  CHECK(gen_topology(spec(TopologyKind::Tree, {{"branching", 2}, {"height", 2}}), 0).num_nodes == 7);
  CHECK(gen_topology(spec(TopologyKind::Bipartite, {{"left", 2}, {"right", 3}}), 0).edges.size() == 6);
  CHECK(gen_topology(spec(TopologyKind::ChordalCycle, {{"n", 6}, {"chords", 2}}), 4).edges.size() == 8);
}

TEST_CASE("invalid topology params are rejected") {
  CHECK_THROWS_AS(gen_topology(spec(TopologyKind::Tree, {{"branching", 0}, {"height", 2}}), 0), InvalidParams);
  CHECK_THROWS_AS(gen_topology(spec(TopologyKind::Chain, {{"n", 1}}), 0), InvalidParams);
  CHECK_THROWS_AS(gen_topology(spec(TopologyKind::Circle, {{"n", 2}}), 0), InvalidParams);
  CHECK_THROWS_AS(gen_topology(spec(TopologyKind::ChordalCycle, {{"n", 5}, {"chords", 6}}), 0), InvalidParams);
  CHECK_THROWS_AS(gen_topology(spec(TopologyKind::Star, {}), 0), InvalidParams);
  CHECK_THROWS_AS(gen_topology(spec(TopologyKind::Star, {{"n", 4}, {"m", 1}}), 0), InvalidParams);
  try {
    gen_topology(spec(TopologyKind::Tree, {{"branching", 0}, {"height", 2}}), 0);
  } catch (const InvalidParams& e) {
    CHECK(std::string(e.what()).find("branching") != std::string::npos);
  }
}

TEST_CASE("every generator output is connected and passes its own predicate") {
  const std::vector<TopologySpec> specs = {
      spec(TopologyKind::Grid, {{"rows", 3}, {"cols", 4}}), spec(TopologyKind::Circle, {{"n", 7}}),
      spec(TopologyKind::Chain, {{"n", 9}}),                 spec(TopologyKind::Tree, {{"branching", 3}, {"height", 3}}),
      spec(TopologyKind::Star, {{"n", 8}}),                  spec(TopologyKind::Complete, {{"n", 6}}),
      spec(TopologyKind::ChordalCycle, {{"n", 8}, {"chords", 3}}),
      spec(TopologyKind::Bipartite, {{"left", 3}, {"right", 4}}), spec(TopologyKind::Wheel, {{"outer", 6}}),
      spec(TopologyKind::Fixed, {})};
  for (const auto& s : specs)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CAPTURE(to_string(s.kind));
      const auto g = gen_topology(s, seed);
      CHECK(g.num_nodes >= 2);
      CHECK(is_connected(g.num_nodes, g.edges));
      CHECK(has_shape(s.kind, g.num_nodes, g.edges));
      CHECK(gen_topology(s, seed) == g);
    }
}

TEST_CASE("family recognition resolves overlapping shapes") {
  const auto motif = [](TopologySpec s) {
    const auto g = gen_topology(s, 0);
    return recognise_motif(g.num_nodes, g.edges);
  };
  const auto theory = [](TopologySpec s) {
    const auto g = gen_topology(s, 0);
    return recognise_theory(g.num_nodes, g.edges);
  };
  CHECK(motif(spec(TopologyKind::Star, {{"n", 3}})) == 2);  // a 3-node star is a chain
  CHECK(motif(spec(TopologyKind::Grid, {{"rows", 2}, {"cols", 3}})) == 0);
  CHECK(motif(spec(TopologyKind::Tree, {{"branching", 2}, {"height", 2}})) == 3);
  CHECK(theory(spec(TopologyKind::Wheel, {{"outer", 3}})) == 0);  // K4
  CHECK(theory(spec(TopologyKind::Wheel, {{"outer", 5}})) == 3);
  CHECK(theory(spec(TopologyKind::Bipartite, {{"left", 2}, {"right", 3}})) == 2);
  CHECK(theory(spec(TopologyKind::Fixed, {})) == 4);
  CHECK_FALSE(recognise_motif(4, {{0, 1}, {1, 2}, {2, 0}, {2, 3}}).has_value());
}

TEST_CASE("gamma shapes are recognised in their own slot only") {
  for (int slot = 0; slot < kGammaSlots; ++slot)
    for (auto s : gamma_shapes(slot)) {
      auto edges = gamma_edges(s);
      for (auto& e : edges)
        if (e.u > e.v) std::swap(e.u, e.v);
      CHECK(recognise_gamma(slot, kGammaSizes[slot], edges) == gamma_tag(slot, s));
    }
  CHECK_THROWS_AS(gamma_tag(0, GammaShape::Cycle6), InvalidParams);
}

TEST_CASE("vocabulary at the minimum size has one entry per subclass") {
  const auto v = gen_vocabulary(15, 1);
  std::vector<int> count(kNumSubclasses, 0);
  for (const auto& e : v) {
    ++count[e.subclass];
    CHECK(e.subclass / kSubclassesPerClass == e.cls);
  }
  for (int c : count) CHECK(c == 1);
  CHECK_THROWS_AS(gen_vocabulary(14, 1), InvalidParams);
}

TEST_CASE("vocabulary is deterministic and links are valid") {
  CHECK(gen_vocabulary(150, 7) == gen_vocabulary(150, 7));
  CHECK_FALSE(gen_vocabulary(150, 7) == gen_vocabulary(150, 8));
  const auto v = gen_vocabulary(150, 7);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int r : v[i].related) {
      CHECK(r >= 0);
      CHECK(r < static_cast<int>(v.size()));
      CHECK(r != static_cast<int>(i));
    }
}

TEST_CASE("noise-free vocabulary keeps related links inside the class") {
  VocabConfig c;
  c.num_entries = 150;
  c.noise = 0.0;
  const auto v = gen_vocabulary(c, 3);
  for (const auto& e : v)
    for (int r : e.related) CHECK(v[r].cls == e.cls);
  c.noise = 1.0;
  const auto noisy = gen_vocabulary(c, 3);
  int crossing = 0;
  for (const auto& e : noisy)
    for (int r : e.related) crossing += noisy[r].cls != e.cls;
  CHECK(crossing > 0);
}

TEST_CASE("class weights shape the vocabulary") {
  VocabConfig c;
  c.num_entries = 300;
  c.class_weights = {1.0, 0.0, 0.0};
  const auto v = gen_vocabulary(c, 2);
  int first = 0;
  for (const auto& e : v) first += e.cls == 0;
  CHECK(first == 300 - 10);  // the 10 seed entries of classes 1 and 2
}

TEST_CASE("node samples have three tie-free rings and a consistent label") {
  const auto vocab = gen_vocabulary(150, 5);
  const auto h = causal::make_h_node(causal::make_node_table(3, {}, 11));
  NodeTaskConfig c;
  c.ring_sizes = {{{3, 3}, {3, 3}, {3, 3}}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = build_node_sample(vocab, c, h, seed);
    CHECK(g.num_nodes >= 10);
    const auto dist = bfs_distances(g, *g.target);
    CHECK(*std::max_element(dist.begin(), dist.end()) >= 3);
    CHECK(g.label == causal::evaluate(h, g).output(h));
    for (int u = 0; u < g.num_nodes; ++u) CHECK(g.roles[u].group == dist[u]);
  }
  NodeTaskConfig busy;
  busy.extra_edge_rate = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = build_node_sample(vocab, busy, h, seed);
    const auto dist = bfs_distances(g, *g.target);
    for (int ring = 1; ring <= 3; ++ring) {
      std::vector<int> count(kNumClasses, 0);
      for (int u = 0; u < g.num_nodes; ++u)
        if (dist[u] == ring) ++count[g.node_class[u]];
      auto sorted = count;
      std::sort(sorted.rbegin(), sorted.rend());
      CHECK(sorted[0] > sorted[1]);
    }
    for (int u = 0; u < g.num_nodes; ++u) CHECK(g.roles[u].group == dist[u]);
  }
}

TEST_CASE("tie-free construction that cannot exist is rejected") {
  NodeTaskConfig c;
  c.majority_margin = 3;
  c.ring_sizes = {{{2, 4}, {8, 12}, {11, 15}}};
  CHECK_THROWS_AS(validate(c), InvalidParams);
  c.majority_margin = 1;
  c.majority_share = 0.9;
  c.ring_sizes = {{{3, 3}, {8, 12}, {11, 15}}};
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("desk-scale node samples average close to 28.9 nodes") {
  const auto d = generate_dataset(small_node_config(400), 21);
  double total = 0.0;
  for (const auto& g : d.samples) total += g.num_nodes;
  const double mean = total / static_cast<double>(d.samples.size());
  CHECK(mean > 28.9 * 0.85);
  CHECK(mean < 28.9 * 1.15);
}

TEST_CASE("graph samples contain their planted structures") {
  const auto vocab = gen_vocabulary(150, 5);
  const auto h = causal::make_h_graph(causal::make_graph_table(3, 4));
  GraphTaskConfig c;
  c.motif_kinds = {TopologyKind::Star};
  c.gamma_shapes[0] = {GammaShape::Triangle};
  const auto g = build_graph_sample(vocab, c, h, 3);
  const auto tri = std::find_if(g.structures.begin(), g.structures.end(),
                                [](const PlantedStructure& s) { return s.slot == causal::kSlotGamma0; });
  REQUIRE(tri != g.structures.end());
  CHECK(induced_edges(g, tri->nodes).size() == 3);
  CHECK(causal::evaluate(h, g).at(h, "Gamma1") == gamma_tag(0, GammaShape::Triangle));
  CHECK(causal::evaluate(h, g).at(h, "Omega1") == 4);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = build_graph_sample(vocab, GraphTaskConfig{}, h, seed);
    CHECK(is_connected(s.num_nodes, s.edges));
    CHECK(s.label == causal::evaluate(h, s).output(h));
    CHECK(s.structures.size() == 5);
  }
}

TEST_CASE("incompatible graph configs are rejected") {
  GraphTaskConfig c;
  c.motif_kinds = {TopologyKind::Wheel};
  CHECK_THROWS_AS(validate(c), InvalidParams);
  c = {};
  c.gamma_shapes[0] = {GammaShape::Cycle6};
  CHECK_THROWS_AS(validate(c), InvalidParams);
  c = {};
  c.gamma_shapes[2].clear();
  CHECK_THROWS_AS(validate(c), InvalidParams);
  c = {};
  c.theory_kinds = {TopologyKind::Fixed};
  c.theory_nodes = {3, 5};
  CHECK_THROWS_AS(validate(c), InvalidParams);
}

TEST_CASE("full-scale graph samples average close to 20.5 nodes") {
  DatasetConfig c;
  c.task = Task::GraphLevel;
  c.graph = full_scale_graph_config();
  c.num_samples = 1500;
  c.num_test = 300;
  const auto d = generate_dataset(c, 8);
  double total = 0.0;
  std::set<std::pair<int, int>> hosts;
  for (const auto& g : d.samples) {
    total += g.num_nodes;
    for (const auto& s : g.structures)
      if (s.slot < causal::kSlotGamma0) hosts.insert({s.slot, s.tag});
  }
  const double mean = total / 1500.0;
  CHECK(mean > 20.5 * 0.85);
  CHECK(mean < 20.5 * 1.15);
  CHECK(hosts.size() == 10);
}

TEST_CASE("parallel and serial generation agree") {
  auto c = small_node_config(40);
  const auto serial = generate_dataset(c, 3);
  c.threads = 4;
  CHECK(generate_dataset(c, 3) == serial);
  c.task = Task::GraphLevel;
  c.threads = 1;
  const auto gs = generate_dataset(c, 3);
  c.threads = 3;
  CHECK(generate_dataset(c, 3) == gs);
}

TEST_CASE("split indices are disjoint and cover the dataset") {
  const auto d = generate_dataset(small_node_config(40), 9);
  std::vector<int> all = d.manifest.train;
  all.insert(all.end(), d.manifest.test.begin(), d.manifest.test.end());
  std::sort(all.begin(), all.end());
  std::vector<int> expect(40);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  CHECK(d.manifest.test.size() == 10);
}

TEST_CASE("emit then load round-trips and is byte-deterministic") {
  for (Task task : {Task::NodeLevel, Task::GraphLevel}) {
    auto c = small_node_config(30);
    c.task = task;
    const auto d = generate_dataset(c, 17);
    const auto a = temp_dir("emit_a"), b = temp_dir("emit_b");
    emit_dataset(d, a);
    emit_dataset(generate_dataset(c, 17), b);
    CHECK(slurp(a / kManifestFile) == slurp(b / kManifestFile));
    CHECK(slurp(a / kSamplesFile) == slurp(b / kSamplesFile));
    const auto back = load_dataset(a);
    CHECK(back == d);
    const auto h = high_level_model(back);
    for (const auto& g : back.samples) CHECK(g.label == causal::evaluate(h, g).output(h));
  }
}

TEST_CASE("raw feature vectors survive a round trip exactly") {
  AttributedGraph g;
  g.id = "raw";
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  g.features = {{-1, {0.1, 1.0 / 3.0, -2.5e-300}}, {-1, {std::nextafter(1.0, 2.0)}}};
  g.node_class = {0, 1};
  g.target = 1;
  const auto back = sample_from_json(nlohmann::json::parse(sample_to_json(g).dump()));
  CHECK(back == g);
}

TEST_CASE("a corrupted line is reported with its line number") {
  const auto d = generate_dataset(small_node_config(12), 2);
  const auto dir = temp_dir("corrupt");
  emit_dataset(d, dir);
  std::vector<std::string> lines;
  {
    std::ifstream in(dir / kSamplesFile);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  lines[6] = lines[6].substr(0, lines[6].size() / 2);
  {
    std::ofstream out(dir / kSamplesFile, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
  }
  try {
    load_dataset(dir);
    FAIL("expected CorruptRecord");
  } catch (const CorruptRecord& e) {
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find(":7:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset(temp_dir("nothing_here")), IoError);
}

TEST_CASE("config json round trips") {
  DatasetConfig c;
  c.task = Task::GraphLevel;
  c.node.homophily = 0.25;
  c.graph.gamma_presence = {0.5, 0.25, 1.0};
  c.graph.motif_kinds = {TopologyKind::Chain};
  const auto back = dataset_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(dataset_config_from_json({{"num_sampels", 3}}), ConfigError);
  CHECK_THROWS_AS(dataset_config_from_json({{"task", "edge_level"}}), ConfigError);
  const auto full = dataset_config_from_json({{"task", "graph_level"}, {"scale", "full"}});
  CHECK(full.graph.gamma_presence[0] == 0.5);
}
