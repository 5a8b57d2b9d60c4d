#include <fstream>
#include <numeric>
#include <sstream>

#include "causalign/errors.hpp"
#include "causalign/json_util.hpp"
#include "causalign/parallel.hpp"
#include "causalign/rng.hpp"
#include "causalign/synthgraph.hpp"

namespace causalign::synth {

using nlohmann::json;

std::string to_string(Task t) { return t == Task::NodeLevel ? "node_level" : "graph_level"; }

Task task_from_string(const std::string& s) {
  if (s == "node_level") return Task::NodeLevel;
  if (s == "graph_level") return Task::GraphLevel;
  throw ConfigError("unknown task '" + s + "' (expected node_level or graph_level)");
}

// ---- config JSON ----------------------------------------------------------------

namespace {

json vocab_json(const VocabConfig& c) {
  return {{"num_entries", c.num_entries}, {"noise", c.noise},       {"class_weights", c.class_weights},
          {"related", c.related},         {"similar", c.similar},   {"min_tokens", c.min_tokens},
          {"max_tokens", c.max_tokens}};
}

VocabConfig vocab_from(const json& j) {
  const std::string w = "dataset.vocab";
  check_keys(j, {"num_entries", "noise", "class_weights", "related", "similar", "min_tokens", "max_tokens"}, w);
  VocabConfig c;
  read_opt(j, "num_entries", c.num_entries, w);
  read_opt(j, "noise", c.noise, w);
  read_opt(j, "class_weights", c.class_weights, w);
  read_opt(j, "related", c.related, w);
  read_opt(j, "similar", c.similar, w);
  read_opt(j, "min_tokens", c.min_tokens, w);
  read_opt(j, "max_tokens", c.max_tokens, w);
  return c;
}

json node_json(const NodeTaskConfig& c) {
  json rings = json::array();
  for (auto [lo, hi] : c.ring_sizes) rings.push_back({lo, hi});
  return {{"max_distance", c.max_distance},       {"ring_sizes", rings},
          {"majority_margin", c.majority_margin}, {"majority_share", c.majority_share},
          {"homophily", c.homophily},             {"extra_edge_rate", c.extra_edge_rate},
          {"link_affinity", c.link_affinity}};
}

NodeTaskConfig node_from(const json& j) {
  const std::string w = "dataset.node";
  check_keys(j,
             {"max_distance", "ring_sizes", "majority_margin", "majority_share", "homophily", "extra_edge_rate",
              "link_affinity"},
             w);
  NodeTaskConfig c;
  read_opt(j, "max_distance", c.max_distance, w);
  if (j.contains("ring_sizes")) {
    const auto& r = j.at("ring_sizes");
    if (!r.is_array() || r.size() != c.ring_sizes.size())
      throw ConfigError(w + ".ring_sizes: expected 3 [lo, hi] pairs");
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (!r[k].is_array() || r[k].size() != 2) throw ConfigError(w + ".ring_sizes: expected [lo, hi] pairs");
      c.ring_sizes[k] = {r[k][0].get<int>(), r[k][1].get<int>()};
    }
  }
  read_opt(j, "majority_margin", c.majority_margin, w);
  read_opt(j, "majority_share", c.majority_share, w);
  read_opt(j, "homophily", c.homophily, w);
  read_opt(j, "extra_edge_rate", c.extra_edge_rate, w);
  read_opt(j, "link_affinity", c.link_affinity, w);
  return c;
}

json graph_json(const GraphTaskConfig& c) {
  json motif = json::array(), theory = json::array(), shapes = json::array();
  for (auto k : c.motif_kinds) motif.push_back(std::string(to_string(k)));
  for (auto k : c.theory_kinds) theory.push_back(std::string(to_string(k)));
  for (const auto& slot : c.gamma_shapes) {
    json s = json::array();
    for (auto g : slot) s.push_back(std::string(to_string(g)));
    shapes.push_back(s);
  }
  return {{"motif_kinds", motif},
          {"theory_kinds", theory},
          {"gamma_shapes", shapes},
          {"gamma_presence", c.gamma_presence},
          {"motif_nodes", {c.motif_nodes.lo, c.motif_nodes.hi}},
          {"theory_nodes", {c.theory_nodes.lo, c.theory_nodes.hi}}};
}

GraphTaskConfig graph_from(const json& j) {
  const std::string w = "dataset.graph";
  check_keys(j, {"motif_kinds", "theory_kinds", "gamma_shapes", "gamma_presence", "motif_nodes", "theory_nodes"},
             w);
  GraphTaskConfig c;
  try {
    if (j.contains("motif_kinds")) {
      c.motif_kinds.clear();
      for (const auto& k : j.at("motif_kinds")) c.motif_kinds.push_back(topology_from_string(k.get<std::string>()));
    }
    if (j.contains("theory_kinds")) {
      c.theory_kinds.clear();
      for (const auto& k : j.at("theory_kinds")) c.theory_kinds.push_back(topology_from_string(k.get<std::string>()));
    }
    if (j.contains("gamma_shapes")) {
      const auto& s = j.at("gamma_shapes");
      if (!s.is_array() || s.size() != kGammaSlots) throw ConfigError(w + ".gamma_shapes: expected 3 lists");
      for (int slot = 0; slot < kGammaSlots; ++slot) {
        c.gamma_shapes[slot].clear();
        for (const auto& g : s[slot]) c.gamma_shapes[slot].push_back(gamma_shape_from_string(g.get<std::string>()));
      }
    }
  } catch (const InvalidParams& e) {
    throw ConfigError(w + ": " + e.what());
  }
  read_opt(j, "gamma_presence", c.gamma_presence, w);
  const auto range = [&](const char* key, SizeRange& r) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<int>>();
    if (v.size() != 2) throw ConfigError(w + "." + key + ": expected [lo, hi]");
    r = {v[0], v[1]};
  };
  range("motif_nodes", c.motif_nodes);
  range("theory_nodes", c.theory_nodes);
  return c;
}

json table_json(const causal::NodeTableWeights& t) {
  return {{"phi1_self", t.phi1_self},   {"phi1_ring1", t.phi1_ring1}, {"phi2_self", t.phi2_self},
          {"phi2_ring1", t.phi2_ring1}, {"phi2_ring2", t.phi2_ring2}, {"ring3", t.ring3},
          {"jitter", t.jitter}};
}

causal::NodeTableWeights table_from(const json& j) {
  const std::string w = "dataset.node_table";
  check_keys(j, {"phi1_self", "phi1_ring1", "phi2_self", "phi2_ring1", "phi2_ring2", "ring3", "jitter"}, w);
  causal::NodeTableWeights t;
  read_opt(j, "phi1_self", t.phi1_self, w);
  read_opt(j, "phi1_ring1", t.phi1_ring1, w);
  read_opt(j, "phi2_self", t.phi2_self, w);
  read_opt(j, "phi2_ring1", t.phi2_ring1, w);
  read_opt(j, "phi2_ring2", t.phi2_ring2, w);
  read_opt(j, "ring3", t.ring3, w);
  read_opt(j, "jitter", t.jitter, w);
  return t;
}

}  // namespace

void validate(const DatasetConfig& c) {
  if (c.num_samples < 2) throw InvalidParams("dataset: num_samples must be >= 2");
  if (c.num_test < 0 || c.num_test >= c.num_samples)
    throw InvalidParams("dataset: num_test must lie in [0, num_samples)");
  validate(c.vocab);
  if (c.task == Task::NodeLevel) validate(c.node);
  else validate(c.graph);
}

json to_json(const DatasetConfig& c) {
  return {{"task", to_string(c.task)},   {"num_samples", c.num_samples},  {"num_test", c.num_test},
          {"vocab", vocab_json(c.vocab)}, {"node", node_json(c.node)},      {"graph", graph_json(c.graph)},
          {"node_table", table_json(c.node_table)}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  const std::string w = "dataset";
  check_keys(j, {"task", "num_samples", "num_test", "vocab", "node", "graph", "node_table", "seed", "scale"}, w);
  DatasetConfig c;
  std::string task = to_string(c.task);
  read_opt(j, "task", task, w);
  c.task = task_from_string(task);
  if (j.contains("scale")) {
    const auto scale = j.at("scale").get<std::string>();
    if (scale == "full") {
      c.graph = full_scale_graph_config();
    } else if (scale != "desk") {
      throw ConfigError(w + ".scale: expected 'desk' or 'full', got '" + scale + "'");
    }
  }
  read_opt(j, "num_samples", c.num_samples, w);
  read_opt(j, "num_test", c.num_test, w);
  if (j.contains("vocab")) c.vocab = vocab_from(j.at("vocab"));
  if (j.contains("node")) c.node = node_from(j.at("node"));
  if (j.contains("graph")) {
    // Explicit graph settings refine the preset chosen by `scale`.
    json merged = graph_json(c.graph);
    merged.update(j.at("graph"));
    c.graph = graph_from(merged);
  }
  if (j.contains("node_table")) c.node_table = table_from(j.at("node_table"));
  return c;
}

// ---- generation -----------------------------------------------------------------

namespace {

causal::CausalModel model_for(Task task, const json& tables) {
  if (!tables.contains("Y")) throw InvalidParams("dataset manifest has no output lookup table");
  const auto table = causal::LookupTable::from_json(tables.at("Y"));
  return task == Task::NodeLevel ? causal::make_h_node(table) : causal::make_h_graph(table);
}

std::string sample_id(Task task, int i) {
  std::ostringstream s;
  s << (task == Task::NodeLevel ? "node-" : "graph-");
  s.width(5);
  s.fill('0');
  s << i;
  return s.str();
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& c, std::uint64_t seed) {
  validate(c);
  Dataset d;
  d.vocab = gen_vocabulary(c.vocab, derive_seed(seed, "vocab"));
  const auto table = c.task == Task::NodeLevel
                         ? causal::make_node_table(kNumClasses, c.node_table, derive_seed(seed, "table"))
                         : causal::make_graph_table(kNumClasses, derive_seed(seed, "table"));
  const auto h = c.task == Task::NodeLevel ? causal::make_h_node(table) : causal::make_h_graph(table);

  d.samples.resize(static_cast<std::size_t>(c.num_samples));
  parallel_for(d.samples.size(), c.threads, [&](std::size_t i) {
    const auto s = derive_seed(seed, "sample", i);
    AttributedGraph g = c.task == Task::NodeLevel ? build_node_sample(d.vocab, c.node, h, s)
                                                  : build_graph_sample(d.vocab, c.graph, h, s);
    g.id = sample_id(c.task, static_cast<int>(i));
    d.samples[i] = std::move(g);
  });

  std::vector<int> order(static_cast<std::size_t>(c.num_samples));
  std::iota(order.begin(), order.end(), 0);
  Rng split(seed, "split");
  split.shuffle(order);
  d.manifest.test.assign(order.begin(), order.begin() + c.num_test);
  d.manifest.train.assign(order.begin() + c.num_test, order.end());
  std::sort(d.manifest.test.begin(), d.manifest.test.end());
  std::sort(d.manifest.train.begin(), d.manifest.train.end());

  d.manifest.task = c.task;
  d.manifest.num_samples = c.num_samples;
  d.manifest.num_classes = kNumClasses;
  d.manifest.seed = seed;
  d.manifest.generator = to_json(c);
  d.manifest.tables = h.tables;
  return d;
}

causal::CausalModel high_level_model(const Dataset& d) { return model_for(d.manifest.task, d.manifest.tables); }

// ---- files ----------------------------------------------------------------------

json sample_to_json(const AttributedGraph& g) {
  json nodes = json::array();
  for (int u = 0; u < g.num_nodes; ++u) {
    json n = {{"id", u}, {"class", g.node_class[u]}};
    if (g.features[u].entry >= 0) n["entry"] = g.features[u].entry;
    if (!g.features[u].raw.empty()) n["raw"] = g.features[u].raw;
    if (!g.roles.empty()) n["role"] = {g.roles[u].group, g.roles[u].index};
    nodes.push_back(std::move(n));
  }
  json edges = json::array();
  for (const Edge& e : g.edges) edges.push_back({e.u, e.v});
  json structures = json::array();
  for (const auto& s : g.structures) structures.push_back({{"slot", s.slot}, {"tag", s.tag}, {"nodes", s.nodes}});
  json j = {{"id", g.id}, {"nodes", nodes}, {"edges", edges}, {"label", g.label}};
  j["target"] = g.target ? json(*g.target) : json(nullptr);
  j["structures"] = structures;
  return j;
}

AttributedGraph sample_from_json(const json& j) {
  AttributedGraph g;
  g.id = j.at("id").get<std::string>();
  const auto& nodes = j.at("nodes");
  g.num_nodes = static_cast<int>(nodes.size());
  g.features.resize(nodes.size());
  g.node_class.resize(nodes.size());
  std::vector<char> seen(nodes.size(), 0);
  bool has_roles = false;
  std::vector<NodeRole> roles(nodes.size());
  for (const auto& n : nodes) {
    const int id = n.at("id").get<int>();
    if (id < 0 || id >= g.num_nodes || seen[id]) throw GraphStructureError("node ids must be a permutation of 0..n-1");
    seen[id] = 1;
    g.node_class[id] = n.at("class").get<int>();
    g.features[id].entry = n.value("entry", -1);
    if (n.contains("raw")) g.features[id].raw = n.at("raw").get<std::vector<double>>();
    if (n.contains("role")) {
      has_roles = true;
      roles[id] = {n.at("role").at(0).get<int>(), n.at("role").at(1).get<int>()};
    }
  }
  if (has_roles) g.roles = std::move(roles);
  for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  if (!j.at("target").is_null()) g.target = j.at("target").get<int>();
  g.label = j.at("label").get<int>();
  for (const auto& s : j.at("structures"))
    g.structures.push_back({s.at("slot").get<int>(), s.at("tag").get<int>(), s.at("nodes").get<std::vector<int>>()});
  return g;
}

namespace {

json vocab_to_json(const std::vector<SyntheticEntry>& vocab) {
  json out = json::array();
  for (const auto& e : vocab) {
    json related = json::array(), similar = json::array();
    for (int r : e.related) related.push_back(vocab[r].name);
    for (int s : e.similar) similar.push_back(vocab[s].name);
    out.push_back({{"name", e.name},
                   {"class", e.cls},
                   {"subclass", e.subclass},
                   {"content", e.content},
                   {"related", related},
                   {"similar", similar}});
  }
  return out;
}

std::vector<SyntheticEntry> vocab_from_json(const json& j) {
  std::vector<SyntheticEntry> vocab;
  std::map<std::string, int> ids;
  for (const auto& e : j) {
    SyntheticEntry s;
    s.name = e.at("name").get<std::string>();
    s.cls = e.at("class").get<int>();
    s.subclass = e.at("subclass").get<int>();
    s.content = e.at("content").get<std::vector<std::string>>();
    if (s.subclass < 0 || s.subclass >= kNumSubclasses || s.subclass / kSubclassesPerClass != s.cls)
      throw IoError("vocabulary entry '" + s.name + "' has a subclass outside its class");
    if (!ids.emplace(s.name, static_cast<int>(vocab.size())).second)
      throw IoError("vocabulary entry '" + s.name + "' is duplicated");
    vocab.push_back(std::move(s));
  }
  const auto resolve = [&](const json& names, const std::string& owner) {
    std::vector<int> out;
    for (const auto& n : names) {
      auto it = ids.find(n.get<std::string>());
      if (it == ids.end()) throw IoError("vocabulary entry '" + owner + "' links to unknown entry");
      out.push_back(it->second);
    }
    return out;
  };
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    vocab[i].related = resolve(j[i].at("related"), vocab[i].name);
    vocab[i].similar = resolve(j[i].at("similar"), vocab[i].name);
  }
  return vocab;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace

void emit_dataset(const Dataset& d, const std::filesystem::path& dir) {
  if (static_cast<int>(d.samples.size()) != d.manifest.num_samples)
    throw InvalidParams("emit_dataset: sample count disagrees with the manifest");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const json manifest = {{"format", "causalign-dataset"},
                         {"version", 1},
                         {"task", to_string(d.manifest.task)},
                         {"num_samples", d.manifest.num_samples},
                         {"num_classes", d.manifest.num_classes},
                         {"seed", d.manifest.seed},
                         {"split", {{"train", d.manifest.train}, {"test", d.manifest.test}}},
                         {"generator", d.manifest.generator},
                         {"tables", d.manifest.tables},
                         {"samples_file", kSamplesFile},
                         {"vocabulary", vocab_to_json(d.vocab)}};
  write_file(dir / kManifestFile, manifest.dump(1) + "\n");
  std::string lines;
  for (const auto& g : d.samples) lines += sample_to_json(g).dump() + "\n";
  write_file(dir / kSamplesFile, lines);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  json m;
  Dataset d;
  try {
    in >> m;
    if (m.value("format", "") != "causalign-dataset" || m.value("version", 0) != 1)
      throw IoError("not a causalign dataset manifest (format/version)");
    d.manifest.task = task_from_string(m.at("task").get<std::string>());
    d.manifest.num_samples = m.at("num_samples").get<int>();
    d.manifest.num_classes = m.at("num_classes").get<int>();
    d.manifest.seed = m.at("seed").get<std::uint64_t>();
    d.manifest.train = m.at("split").at("train").get<std::vector<int>>();
    d.manifest.test = m.at("split").at("test").get<std::vector<int>>();
    d.manifest.generator = m.at("generator");
    d.manifest.tables = m.at("tables");
    d.vocab = vocab_from_json(m.at("vocabulary"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  std::vector<char> used(static_cast<std::size_t>(std::max(0, d.manifest.num_samples)), 0);
  for (const auto* split : {&d.manifest.train, &d.manifest.test})
    for (int i : *split) {
      if (i < 0 || i >= d.manifest.num_samples || used[i])
        throw IoError(manifest_path.string() + ": split indices out of range or not disjoint");
      used[i] = 1;
    }

  const auto samples_path = dir / m.value("samples_file", std::string(kSamplesFile));
  std::ifstream lines(samples_path);
  if (!lines) throw IoError("cannot open " + samples_path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      AttributedGraph g = sample_from_json(json::parse(line));
      validate(g, d.manifest.num_classes);
      for (const auto& f : g.features)
        if (f.entry >= static_cast<int>(d.vocab.size())) throw GraphStructureError("entry index outside the vocabulary");
      d.samples.push_back(std::move(g));
    } catch (const std::exception& e) {
      throw CorruptRecord(samples_path.string(), lineno, e.what());
    }
  }
  if (static_cast<int>(d.samples.size()) != d.manifest.num_samples)
    throw CorruptRecord(samples_path.string(), lineno,
                        "expected " + std::to_string(d.manifest.num_samples) + " samples, found " +
                            std::to_string(d.samples.size()));
  return d;
}

}  // namespace causalign::synth
