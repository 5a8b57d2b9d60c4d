#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "causalign/errors.hpp"
#include "causalign/intervene.hpp"
#include "causalign/rng.hpp"
#include "causalign/synthgraph.hpp"

using namespace causalign;
using namespace causalign::intervene;

namespace {

const synth::Dataset& node_dataset() {
  static const synth::Dataset d = [] {
    synth::DatasetConfig c;
    c.num_samples = 200;
    c.num_test = 50;
    return synth::generate_dataset(c, 31);
  }();
  return d;
}

// Class one-hot features padded to `dim`; an untrained GNN over them.
std::vector<ad::Matrix> class_features(std::span<const AttributedGraph> gs, int dim) {
  std::vector<ad::Matrix> out;
  for (const auto& g : gs) {
    ad::Matrix x = ad::Matrix::Zero(g.num_nodes, dim);
    for (int u = 0; u < g.num_nodes; ++u) x(u, g.node_class[u]) = 1.0;
    out.push_back(x);
  }
  return out;
}

gnn::GnnModel small_gnn(int input_dim, std::uint64_t seed) {
  gnn::GnnConfig c;
  c.num_layers = 3;
  c.hidden_dim = 8;
  c.input_dim = input_dim;
  return gnn::GnnModel(c, seed);
}

}  // namespace

TEST_CASE("cross-entropy loss on fixed distributions") {
  const std::vector<ad::Matrix> uniform(4, ad::Matrix::Zero(1, 3));
  const std::vector<int> labels = {0, 1, 2, 1};
  CHECK(mean_cross_entropy(uniform, labels) == doctest::Approx(std::log(3.0)).epsilon(1e-14));

  ad::Matrix half(1, 3);
  half << std::log(0.5), std::log(0.25), std::log(0.25);
  const std::vector<ad::Matrix> one = {half};
  CHECK(mean_cross_entropy(one, std::vector<int>{0}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  ad::Matrix sharp = ad::Matrix::Zero(1, 3);
  sharp(0, 2) = GlassBox::kLogitScale;
  const std::vector<ad::Matrix> exact = {sharp, sharp};
  CHECK(mean_cross_entropy(exact, std::vector<int>{2, 2}) < 1e-20);
  CHECK(mean_cross_entropy(exact, std::vector<int>{2, 0}) > 20.0);
  CHECK_THROWS_AS(mean_cross_entropy(exact, std::vector<int>{2}), InvalidParams);
}

TEST_CASE("intint on a self pair equals the plain forward distribution") {
  const auto& d = node_dataset();
  const auto xs = class_features(d.samples, 4);
  const auto f = small_gnn(4, 2);
  for (int layer = 0; layer <= 3; ++layer)
    for (int i = 0; i < 5; ++i) {
      const auto& g = d.samples[i];
      const ActivationSite site{layer, {gnn::NodeRef::of_group(1)}, std::nullopt};
      const ad::Matrix p = intint_low(f, g, xs[i], g, xs[i], site);
      CHECK(p == ad::softmax_rows(f.forward(g, xs[i]).logits));
      CHECK(p.sum() == doctest::Approx(1.0));
    }
}

TEST_CASE("a full final-layer site returns the donor's output") {
  Rng rng(3);
  AttributedGraph a;
  a.id = "a";
  a.num_nodes = 4;
  a.edges = {{0, 1}, {1, 2}, {2, 3}};
  a.node_class = {0, 1, 2, 0};
  a.features.resize(4);
  a.target = 0;
  AttributedGraph b = a;
  b.id = "b";
  b.edges = {{0, 2}, {1, 3}, {0, 3}};
  normalise_edges(b);
  const auto f = small_gnn(3, 5);
  ad::Matrix xa(4, 3), xb(4, 3);
  for (ad::Index i = 0; i < 12; ++i) xa.data()[i] = rng.uniform(-1, 1), xb.data()[i] = rng.uniform(-1, 1);
  const ActivationSite all{3, {gnn::NodeRef::all()}, std::nullopt};
  CHECK(intint_low(f, a, xa, b, xb, all) == ad::softmax_rows(f.forward(b, xb).logits));
  AttributedGraph c = a;
  c.num_nodes = 5;
  c.node_class.push_back(0);
  c.features.resize(5);
  CHECK_THROWS_AS(intint_low(f, a, xa, c, ad::Matrix::Zero(5, 3), all), NodeCorrespondenceError);
}

TEST_CASE("pair sets pass the changed-pair filter") {
  const auto& d = node_dataset();
  const auto h = synth::high_level_model(d);
  const std::span<const AttributedGraph> gs(d.samples.data(), 40);
  std::vector<causal::CausalTrace> traces;
  for (const auto& g : gs) traces.push_back(causal::evaluate(h, g));
  for (const char* var : {"Psi1", "Phi2", "Psi3"}) {
    const causal::HighVariableSet zh(h, {var});
    const auto full = build_pairs(h, gs, traces, zh, 0, 1);
    CHECK(full.pairs == causal::changed_pairs(h, gs, traces, zh));
    CHECK(full.total_changed == full.pairs.size());
    const auto capped = build_pairs(h, gs, traces, zh, 50, 1);
    CHECK(capped.pairs.size() == std::min<std::size_t>(50, full.pairs.size()));
    CHECK(std::is_sorted(capped.pairs.begin(), capped.pairs.end()));
    CHECK(capped.pairs == build_pairs(h, gs, traces, zh, 50, 1).pairs);
    for (std::size_t k = 0; k < capped.pairs.size(); ++k) {
      const auto [o, df] = capped.pairs[k];
      CHECK(o != df);
      CHECK(capped.labels[k] == causal::intervene_high(h, gs[o], gs[df], zh));
      CHECK(capped.labels[k] != traces[o].output(h));
    }
  }
}

TEST_CASE("reference network reproduces h_node and its interventions") {
  const auto& d = node_dataset();
  const auto h = synth::high_level_model(d);
  const GlassBox box(h, d.samples);
  CHECK(box.layer_width(0) == 5 * 3 + 9 + 27);
  for (const auto& g : d.samples) CHECK(gnn::predict(box, g, box.input(g)) == causal::evaluate(h, g).output(h));

  // Writing any value into a variable's block acts like pinning that variable.
  for (const auto& [var, enc] : box.encodings()) {
    const int v = h.index_of(var);
    const causal::HighVariableSet zh(h, {var});
    for (int i = 0; i < 20; ++i) {
      const auto& g = d.samples[i];
      const auto base = causal::evaluate(h, g);
      for (int value = 0; value < h.domain(v); ++value) {
        causal::CausalTrace donor = base;
        donor.values[v] = value;
        const int want = causal::intervene_trace(h, g, base, donor, zh).output(h);
        gnn::PatchRegion p{enc.layer, {*g.target}, enc.dims.begin, enc.dims.end,
                           ad::Matrix::Zero(1, enc.dims.end - enc.dims.begin)};
        p.values(0, value) = 1.0;
        ad::Index got = 0;
        box.forward_patched(g, box.input(g), std::span(&p, 1)).logits.row(0).maxCoeff(&got);
        CHECK(got == want);
      }
    }
  }

  auto bad = std::vector<AttributedGraph>(d.samples.begin(), d.samples.begin() + 3);
  AttributedGraph lone;
  lone.id = "lone";
  lone.num_nodes = 1;
  lone.features.resize(1);
  lone.node_class = {0};
  lone.roles = {{0, 0}};
  lone.target = 0;
  bad.push_back(lone);
  CHECK_THROWS_AS(GlassBox(h, bad), GraphStructureError);
}

TEST_CASE("oracle localizes every variable at its constructed layer") {
  const auto& d = node_dataset();
  const auto h = synth::high_level_model(d);
  SweepConfig c;
  c.variables = {"C_v", "Psi1", "Psi2", "Psi3", "Phi1", "Phi2"};
  c.seed = 4;
  const OracleReport rep = run_oracle(h, d.samples, c);
  CHECK(rep.pass);
  CHECK(rep.max_lii < kOracleTolerance);
  for (const auto& row : rep.rows) {
    INFO(row.variable);
    CHECK(row.argmin_layer == row.constructed_layer);
    REQUIRE(row.margin);
    CHECK(*row.margin >= kOracleMargin);
  }
  for (std::size_t r = 0; r < rep.grid.variables.size(); ++r) {
    CHECK(rep.grid.pair_count[r] > 0);
    for (const auto& cell : rep.grid.cells[r]) CHECK(cell.value_or(0.0) >= 0.0);
  }

  // GNN-internal layers alone still reach zero loss.
  c.layers = {1, 2, 3};
  const OracleReport inner = run_oracle(h, d.samples, c);
  CHECK(inner.pass);
  CHECK(inner.max_lii < kOracleTolerance);
}

TEST_CASE("sweeps are deterministic and thread-count independent") {
  const auto& d = node_dataset();
  const auto h = synth::high_level_model(d);
  const std::span<const AttributedGraph> gs(d.samples.data(), 60);
  const auto f = small_gnn(4, 9);
  const gnn::FixedInput in(class_features(gs, 4));
  SweepConfig c;
  c.pair_cap = 300;
  c.seed = 2;
  const auto a = sweep(h, f, in, gs, role_templates(h), c);
  const auto b = sweep(h, f, in, gs, role_templates(h), c);
  c.threads = 4;
  const auto t = sweep(h, f, in, gs, role_templates(h), c);
  CHECK(a == b);
  CHECK(a == t);
  CHECK(a.variables.size() == 6);
  CHECK(a.layers == std::vector<int>{0, 1, 2, 3});
  for (std::size_t r = 0; r < a.variables.size(); ++r) {
    const auto am = a.argmin(r);
    REQUIRE(am);
    for (const auto& cell : a.cells[r]) {
      REQUIRE(cell);
      CHECK(*cell >= 0.0);
      CHECK(*a.cells[r][*am] <= *cell);
    }
  }
  c.seed = 3;
  CHECK(sweep(h, f, in, gs, role_templates(h), c).pair_count == a.pair_count);
}

TEST_CASE("variables without changed pairs give undefined rows") {
  const auto& d = node_dataset();
  const auto h = synth::high_level_model(d);
  const std::vector<AttributedGraph> same(4, d.samples[0]);
  const auto f = small_gnn(4, 1);
  const gnn::FixedInput in(class_features(same, 4));
  SweepConfig c;
  c.variables = {"Psi1"};
  const auto g = sweep(h, f, in, same, role_templates(h), c);
  CHECK(g.pair_count[0] == 0);
  CHECK_FALSE(g.argmin(0).has_value());
  for (const auto& cell : g.cells[0]) CHECK_FALSE(cell.has_value());
  CHECK(to_json(g)["rows"][0]["argmin_layer"].is_null());
}

TEST_CASE("unmatched pairs are skipped and counted") {
  const auto& d = node_dataset();
  const auto h = synth::high_level_model(d);
  std::vector<AttributedGraph> gs(d.samples.begin(), d.samples.begin() + 20);
  for (int i = 0; i < 20; i += 2) gs[i].roles.clear();  // no role layout: nothing matches
  const auto f = small_gnn(4, 1);
  const gnn::FixedInput in(class_features(gs, 4));
  SweepConfig c;
  c.variables = {"Psi1"};
  const auto g = sweep(h, f, in, gs, role_templates(h), c);
  REQUIRE(g.pair_count[0] > 0);
  for (std::size_t k = 0; k < g.layers.size(); ++k) {
    CHECK(g.skipped[0][k] > 0);
    CHECK(g.skipped[0][k] < g.pair_count[0]);
  }
}

TEST_CASE("grid files") {
  AlignmentGrid g;
  g.variables = {"Psi1", "Phi1"};
  g.layers = {0, 1, 2};
  g.cells = {{0.5, 0.25, 1.0 / 3.0}, {std::nullopt, std::nullopt, std::nullopt}};
  g.sites = {{"a", "b", "c"}, {"d", "e", "f"}};
  g.skipped = {{0, 1, 0}, {0, 0, 0}};
  g.pair_count = {10, 0};
  g.changed_count = {12, 0};
  g.metadata = {{"dataset", "toy"}};
  CHECK(g.argmin_layer(0) == 1);
  CHECK(alignment_grid_from_json(to_json(g)) == g);
  const std::string csv = to_csv(g);
  CHECK(csv.starts_with("variable,layer0,layer1,layer2,argmin_layer,pairs\n"));
  CHECK(csv.find("Phi1,,,,,0\n") != std::string::npos);
  const std::string svg = to_svg(g);
  std::size_t green = 0;
  for (std::size_t at = 0; (at = svg.find("class=\"argmin\"", at)) != std::string::npos; ++at) ++green;
  CHECK(green == 1);
  CHECK(svg.find("#1a9e3a") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "causalign_grid";
  write_grid(g, dir, "grid");
  for (const char* ext : {".json", ".csv", ".svg"}) CHECK(std::filesystem::exists(dir / (std::string("grid") + ext)));
  CHECK_THROWS_AS(alignment_grid_from_json({{"layers", 1}}), IoError);

  CHECK(sweep_config_from_json(to_json(SweepConfig{})).pair_cap == 2000);
  CHECK_THROWS_AS(sweep_config_from_json({{"cap", 3}}), ConfigError);
}
