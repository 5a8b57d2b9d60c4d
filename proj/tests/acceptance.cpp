// Acceptance suite: one PASS/FAIL line per criterion. Criteria 4 and 7 are
// soft; their failures are printed but do not fail the run.

#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <json.hpp>

#include "causalign/at.hpp"
#include "causalign/causal.hpp"
#include "causalign/errors.hpp"
#include "causalign/gnn.hpp"
#include "causalign/intervene.hpp"
#include "causalign/rng.hpp"
#include "cli/run.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace causalign;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ad::Matrix random_matrix(Rng& rng, ad::Index r, ad::Index c) {
  ad::Matrix m(r, c);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
  return m;
}

AttributedGraph random_graph(Rng& rng, int n, double p) {
  AttributedGraph g;
  g.num_nodes = n;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) g.edges.push_back({u, v});
  normalise_edges(g);
  g.features.assign(static_cast<std::size_t>(n), {});
  g.node_class.assign(static_cast<std::size_t>(n), 0);
  g.target = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
  return g;
}

cli::RunConfig config(json overrides) { return cli::resolve_config(overrides); }

// ---- 1 ---------------------------------------------------------------------------

Outcome gradient_suite() {
  constexpr double kTol = 1e-4;
  double worst = 0.0;
  std::size_t checks = 0;
  const auto note = [&](double err) {
    worst = std::max(worst, err);
    ++checks;
  };

  for (gnn::Arch arch : {gnn::Arch::GCN, gnn::Arch::GAT, gnn::Arch::SAGE}) {
    for (int seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(7, "grad", static_cast<std::uint64_t>(seed)));
      gnn::GnnConfig gc;
      gc.arch = arch;
      gc.num_layers = 2;
      gc.hidden_dim = 5;
      gc.input_dim = 4;
      gc.readout = seed % 2 ? gnn::Readout::MeanPool : gnn::Readout::TargetNode;
      gnn::GnnModel m(gc, static_cast<std::uint64_t>(seed));
      for (auto& p : m.params()) p.data() += random_matrix(rng, p.data().rows(), p.data().cols()) * 0.1;
      const auto g = random_graph(rng, 5, 0.5);
      const ad::Matrix x = random_matrix(rng, 5, 4);
      ad::Matrix y = ad::Matrix::Zero(1, 3);
      y(0, static_cast<ad::Index>(rng.index(3))) = 1.0;
      std::vector<ad::Tensor*> ps;
      for (auto& p : m.params()) ps.push_back(&p);
      const auto loss = [&](ad::Tape& t) {
        const auto tf = m.record(t, g, t.constant(x), {}, [&](ad::Tape& tt, std::size_t i) {
          return tt.param(m.params()[i]);
        });
        return ad::cross_entropy(tf.logits, y);
      };
      const auto r = ad::grad_check(loss, ps);
      if (r.checked == 0) return {false, gnn::to_string(arch) + " checked no coordinates"};
      note(r.max_rel_error);
    }
  }

  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(7, "ce", static_cast<std::uint64_t>(seed)));
    const ad::Matrix logits = random_matrix(rng, 1, 3) * 3.0;
    ad::Matrix y = ad::Matrix::Zero(1, 3);
    y(0, seed % 3) = 1.0;
    note(ad::grad_check([&](ad::Tape&, ad::Var z) { return ad::cross_entropy(z, y); }, logits));
  }

  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(7, "at", static_cast<std::uint64_t>(seed)));
    at::AttentionEncoder enc(4, {seed % 2 ? 3 : 2, 6, 1}, static_cast<std::uint64_t>(seed));
    gnn::GnnConfig gc;
    gc.num_layers = 2;
    gc.hidden_dim = 5;
    gc.input_dim = 4;
    const gnn::GnnModel model(gc, static_cast<std::uint64_t>(seed));
    AttributedGraph g;
    g.num_nodes = 3;
    g.edges = {{0, 1}, {1, 2}};
    g.target = 1;
    const ad::Index q = 2, m = 2;
    const ad::Matrix s = random_matrix(rng, 3 * q * m, 4) * 2.0;
    ad::Matrix y = ad::Matrix::Zero(1, 3);
    y(0, seed % 3) = 1;
    std::vector<ad::Tensor*> ps;
    for (auto& p : enc.params()) ps.push_back(&p);
    const auto loss = [&](ad::Tape& t) {
      std::vector<ad::Var> bound;
      for (auto& p : enc.params()) bound.push_back(t.param(p));
      const ad::Var sv = t.constant(s);
      const at::Scores sc = at::score(t, enc, sv, m, q * m, bound);
      return ad::cross_entropy(model.record(t, g, at::fuse(sc.alpha_bar, sv, q, m)).logits, y);
    };
    const auto r = ad::grad_check(loss, ps);
    if (r.checked == 0) return {false, "AT encoder checked no coordinates"};
    note(r.max_rel_error);
  }
  return {worst < kTol, "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(checks) +
                            " checks (GCN/GAT/SAGE, cross-entropy, AT encoder; 10 seeds each)"};
}

// ---- 2 ---------------------------------------------------------------------------

Outcome glass_box_oracle() {
  const auto c = config({{"dataset", {{"num_samples", 200}, {"num_test", 50}}}});
  const synth::Dataset d = cli::make_dataset(c, 1);
  intervene::SweepConfig s;
  s.pair_cap = 0;
  s.seed = 11;
  const auto r = intervene::run_oracle(synth::high_level_model(d), d.samples, s);
  std::ostringstream detail;
  double margin = INFINITY;
  for (const auto& row : r.rows) {
    detail << row.variable << "@" << (row.argmin_layer ? std::to_string(*row.argmin_layer) : "-") << " ";
    margin = std::min(margin, row.margin.value_or(-INFINITY));
  }
  detail << "on 200 samples, max L_II " << fmt("%.1e", r.max_lii) << ", min margin " << fmt("%.3f", margin);
  return {r.pass && r.max_lii < intervene::kOracleTolerance && margin >= intervene::kOracleMargin, detail.str()};
}

// ---- 3 ---------------------------------------------------------------------------

Outcome trained_threshold() {
  const auto c = config({{"seed", 1}});
  const synth::Dataset d = cli::make_dataset(c, 1);
  cli::Features f = cli::make_features(c, d, 1);
  const cli::Trained t = cli::train_model(c, d, f, 1);
  const double acc = t.result.test_accuracy();
  return {acc >= 0.9, "test accuracy " + fmt("%.3f", acc) + " after " + std::to_string(t.result.curve.size()) +
                          " epochs (4-layer GCN, 256 hidden, lr 0.001; " + std::to_string(d.manifest.train.size()) +
                          "/" + std::to_string(d.manifest.test.size()) + " split)"};
}

// ---- 4 ---------------------------------------------------------------------------

Outcome psi_before_phi() {
  int held = 0;
  std::ostringstream detail;
  for (int seed = 1; seed <= 5; ++seed) {
    const auto c = config({{"seed", seed},
                           {"model", {{"hidden_dim", 64}}},
                           {"train", {{"epochs", 60}, {"lr", 0.01}}},
                           {"sweep", {{"pair_cap", 500}, {"variables", {"Psi1", "Psi2", "Psi3", "Phi1", "Phi2"}}}}});
    const synth::Dataset d = cli::make_dataset(c, 1);
    cli::Features f = cli::make_features(c, d, 1);
    const cli::Trained t = cli::train_model(c, d, f, 1);
    const auto grid = cli::align(c, d, t.model, f, 1);
    double psi = 0, phi = 0;
    int npsi = 0, nphi = 0;
    for (std::size_t r = 0; r < grid.variables.size(); ++r) {
      const auto layer = grid.argmin_layer(r);
      if (!layer) continue;
      if (grid.variables[r].starts_with("Psi")) psi += *layer, ++npsi;
      else phi += *layer, ++nphi;
    }
    const bool ok = npsi > 0 && nphi > 0 && psi / npsi <= phi / nphi;
    held += ok;
    detail << (seed > 1 ? ", " : "") << fmt("%.2f", npsi ? psi / npsi : NAN) << (ok ? "<=" : ">")
           << fmt("%.2f", nphi ? phi / nphi : NAN);
  }
  return {held >= 4, std::to_string(held) + "/5 seeds place Psi at or before Phi (mean argmin layer " +
                         detail.str() + ")"};
}

// ---- 5 ---------------------------------------------------------------------------

// Intervened h_node output recomputed from the graphs alone.
struct NodeVars {
  std::array<int, 6> v{};  // C_v, Psi1, Psi2, Psi3, Phi1, Phi2
};

NodeVars node_vars(const AttributedGraph& g, int classes) {
  const auto dist = bfs_distances(g, *g.target);
  NodeVars n;
  n.v[0] = g.node_class[static_cast<std::size_t>(*g.target)];
  for (int k = 1; k <= 3; ++k) {
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (int u = 0; u < g.num_nodes; ++u)
      if (dist[static_cast<std::size_t>(u)] == k) ++counts[static_cast<std::size_t>(g.node_class[static_cast<std::size_t>(u)])];
    int best = 0, total = 0;
    for (int cl = 0; cl < classes; ++cl) {
      total += counts[static_cast<std::size_t>(cl)];
      if (counts[static_cast<std::size_t>(cl)] > counts[static_cast<std::size_t>(best)]) best = cl;
    }
    if (2 * counts[static_cast<std::size_t>(best)] <= total)
      throw std::runtime_error(g.id + ": ring " + std::to_string(k) + " has no strict majority");
    n.v[static_cast<std::size_t>(k)] = best;
  }
  n.v[4] = n.v[0] * classes + n.v[1];
  n.v[5] = n.v[4] * classes + n.v[2];
  return n;
}

int intervened_output(const NodeVars& orig, const NodeVars& donor, int pinned, int classes,
                      const causal::LookupTable& table) {
  NodeVars x = orig;
  x.v[static_cast<std::size_t>(pinned)] = donor.v[static_cast<std::size_t>(pinned)];
  if (pinned != 4) x.v[4] = x.v[0] * classes + x.v[1];
  if (pinned != 5) x.v[5] = (x.v[0] * classes + x.v[1]) * classes + x.v[2];
  const std::array<int, 3> key = {x.v[4], x.v[5], x.v[3]};
  return table(key);
}

Outcome intervention_algebra() {
  const auto c = config({{"dataset", {{"num_samples", 5}, {"num_test", 1}}}, {"enhancer", {{"dim", 8}}}});
  const synth::Dataset d = cli::make_dataset(c, 1);
  const auto h = synth::high_level_model(d);
  const int classes = d.manifest.num_classes;
  const auto table = causal::LookupTable::from_json(h.tables.at("Y"));
  const cli::Features f = cli::make_features(c, d, 1);
  std::size_t self_checks = 0, reach_checks = 0, reach_changed = 0, reach_total = 0, pair_checks = 0;
  std::vector<std::string> failures;
  const auto fail = [&](const std::string& what) {
    if (failures.size() < 3) failures.push_back(what);
  };

  // high-level self-intervention and changed-pair filtering
  const char* names[] = {"C_v", "Psi1", "Psi2", "Psi3", "Phi1", "Phi2"};
  std::vector<causal::CausalTrace> traces;
  std::vector<NodeVars> vars;
  for (const auto& g : d.samples) {
    traces.push_back(causal::evaluate(h, g));
    vars.push_back(node_vars(g, classes));
    if (traces.back().output(h) != intervened_output(vars.back(), vars.back(), 0, classes, table))
      fail(g.id + ": independent h_node evaluation disagrees");
  }
  for (int z = 0; z < 6; ++z) {
    const causal::HighVariableSet zh(h, {names[z]});
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
      if (causal::intervene_trace(h, d.samples[i], traces[i], traces[i], zh).values != traces[i].values)
        fail(std::string("h self-intervention on ") + names[z]);
      ++self_checks;
    }
    causal::PairList expect;
    std::vector<int> labels;
    for (std::size_t i = 0; i < d.samples.size(); ++i)
      for (std::size_t j = 0; j < d.samples.size(); ++j) {
        if (i == j) continue;
        const int y = intervened_output(vars[i], vars[j], z, classes, table);
        if (y != traces[i].output(h)) {
          expect.push_back({i, j});
          labels.push_back(y);
        }
        ++pair_checks;
      }
    const auto ps = intervene::build_pairs(h, d.samples, traces, zh, 0, 1);
    if (ps.pairs != expect || ps.labels != labels || ps.total_changed != expect.size())
      fail(std::string("changed pairs for ") + names[z]);
  }

  // low-level identities and reachability on every site
  for (gnn::Arch arch : {gnn::Arch::GCN, gnn::Arch::GAT, gnn::Arch::SAGE}) {
    gnn::GnnConfig gc = c.model;
    gc.arch = arch;
    gc.num_layers = 2;
    gc.hidden_dim = 6;
    const gnn::GnnModel m(gc, 5);
    const int L = m.num_layers();
    std::vector<gnn::ForwardRecord> rec;
    for (std::size_t i = 0; i < d.samples.size(); ++i) rec.push_back(m.forward(d.samples[i], f.input->layer0(i)));
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
      const auto& orig = d.samples[i];
      for (std::size_t j = 0; j < d.samples.size(); ++j) {
        const auto& donor = d.samples[j];
        for (int layer = 0; layer <= L; ++layer) {
          const ad::Index w = m.layer_width(layer);
          for (const auto& role : orig.roles) {
            for (const auto dims : {std::optional<gnn::DimSlice>{}, std::optional<gnn::DimSlice>{{0, (w + 1) / 2}}}) {
              const gnn::ActivationSite site{layer, {gnn::NodeRef::of_role(role)}, dims};
              gnn::NodeMatch match;
              try {
                match = gnn::match_nodes(site.nodes, orig, donor);
              } catch (const NodeCorrespondenceError&) {
                continue;
              }
              const auto patch = gnn::make_patch(m, site, match, rec[j]);
              const auto out = m.resume_patched(orig, rec[i], std::span(&patch, 1));
              for (int below = 0; below < layer; ++below)
                if (out.layers[static_cast<std::size_t>(below)] != rec[i].layers[static_cast<std::size_t>(below)])
                  fail("patch at layer " + std::to_string(layer) + " moved layer " + std::to_string(below));
              if (i == j) {
                ++self_checks;
                if (out.layers != rec[i].layers || out.logits != rec[i].logits)
                  fail(gnn::to_string(arch) + " self-patch at " + site.str() + " changed activations");
                if (intervene::intint_logits(m, orig, rec[i], orig, rec[i], site) != rec[i].logits)
                  fail(gnn::to_string(arch) + " self-intervention at " + site.str());
                continue;
              }
              ++reach_checks;
              const bool beyond = role.group > L - layer;
              const bool changed = out.logits != rec[i].logits;
              if (beyond && changed) fail(gnn::to_string(arch) + " unreachable site " + site.str() + " moved the logits");
              if (!beyond) reach_changed += changed, ++reach_total;
            }
          }
        }
      }
    }
  }
  if (reach_total == 0 || reach_changed == 0) fail("no reachable patch changed the logits");
  std::ostringstream detail;
  detail << self_checks << " self/identity checks, " << reach_checks << " cross-sample site patches ("
         << reach_changed << "/" << reach_total << " reachable ones moved the logits), " << pair_checks
         << " brute-force pair checks";
  for (const auto& f2 : failures) detail << "; " << f2;
  return {failures.empty(), detail.str()};
}

// ---- 6 ---------------------------------------------------------------------------

Outcome at_fidelity() {
  std::vector<std::string> failures;
  double worst_sum = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(9, "alpha", static_cast<std::uint64_t>(seed)));
    const at::AttentionEncoder enc(5, {2, 8, 1}, static_cast<std::uint64_t>(seed));
    const ad::Index q = 1 + static_cast<ad::Index>(rng.index(4)), m = 1 + static_cast<ad::Index>(rng.index(3)), nodes = 3;
    ad::Tape t;
    const at::Scores sc = at::score(t, enc, t.constant(random_matrix(rng, nodes * q * m, 5) * 3.0), m, q * m);
    for (ad::Index v = 0; v < nodes; ++v)
      worst_sum = std::max(worst_sum, std::abs(sc.alpha_bar.value().middleRows(v * q * m, q * m).sum() - 1.0));
  }
  if (!(worst_sum < 1e-9)) failures.push_back("alpha_bar sum off by " + fmt("%.1e", worst_sum));

  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(9, "collapse", static_cast<std::uint64_t>(seed)));
    const at::AttentionEncoder enc(3, {2, 8, 1}, static_cast<std::uint64_t>(seed));
    const ad::Matrix s = random_matrix(rng, 4, 3);
    ad::Tape t;
    const ad::Var sv = t.constant(s);
    if (at::fuse(at::score(t, enc, sv, 1, 1).alpha_bar, sv, 1, 1).value() != s)
      failures.push_back("q = m = 1 does not return s");
  }

  const auto fused = [](const ad::Matrix& abar, const ad::Matrix& s, ad::Index q, ad::Index m) {
    ad::Tape t;
    return at::fuse(t.constant(abar), t.constant(s), q, m).value();
  };
  ad::Matrix s1(2, 2), a1(2, 1), s2(2, 2), a2(2, 1), s3(8, 2), a3(8, 1);
  s1 << 1, 0, 0, 1;
  a1 << 0.25, 0.75;
  s2 << 2, 4, 6, 8;
  a2 << 0.5, 0.5;
  s3 << 1, 1, 2, 0, 0, 3, 4, -1, 1, 2, 1, 2, 1, 2, 1, 2;
  a3 << 0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25;
  const std::array<std::pair<ad::Matrix, ad::Matrix>, 3> fixtures = {{
      {fused(a1, s1, 1, 2), (ad::Matrix(1, 2) << 0.125, 0.375).finished()},
      {fused(a2, s2, 2, 1), (ad::Matrix(1, 2) << 2, 3).finished()},
      {fused(a3, s3, 2, 2), (ad::Matrix(2, 2) << 0.525, 0.15, 0.25, 0.5).finished()},
  }};
  for (std::size_t k = 0; k < fixtures.size(); ++k)
    if (!((fixtures[k].first - fixtures[k].second).cwiseAbs().maxCoeff() < 1e-15))
      failures.push_back("fuse fixture " + std::to_string(k + 1));

  const auto literal = at::select_indices(10, 2, at::IndexRule::Literal);
  const auto corrected = at::select_indices(10, 2, at::IndexRule::Corrected);
  if (literal != std::vector<ad::Index>{1, 1}) failures.push_back("literal rule on n=10, m=2");
  if (corrected != std::vector<ad::Index>{5, 10}) failures.push_back("corrected rule on n=10, m=2");

  std::string detail = "max |sum alpha_bar - 1| " + fmt("%.1e", worst_sum) +
                       ", q=m=1 collapse, 3 fuse fixtures, n=10 m=2: literal [" + std::to_string(literal[0]) + "," +
                       std::to_string(literal[1]) + "] corrected [" + std::to_string(corrected[0]) + "," +
                       std::to_string(corrected[1]) + "]";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---- 7 ---------------------------------------------------------------------------

Outcome at_direction() {
  double base_sum = 0, at_sum = 0;
  std::ostringstream detail;
  for (int seed = 1; seed <= 5; ++seed) {
    const json common = {{"seed", seed},
                         {"model", {{"hidden_dim", 64}}},
                         {"train", {{"epochs", 60}, {"lr", 0.01}}}};
    json base = common, with_at = common;
    base["enhancer"] = {{"informative_position", 0.5}, {"position", 10}};
    with_at["enhancer"] = {{"informative_position", 0.5}};
    with_at["at"] = {{"enabled", true}, {"q", 10}, {"m", 2}, {"delta", 10}};
    double acc[2];
    for (int k = 0; k < 2; ++k) {
      const auto c = config(k == 0 ? base : with_at);
      const synth::Dataset d = cli::make_dataset(c, 1);
      cli::Features f = cli::make_features(c, d, 1);
      acc[k] = cli::train_model(c, d, f, 1).result.test_accuracy();
    }
    base_sum += acc[0];
    at_sum += acc[1];
    detail << (seed > 1 ? ", " : "") << fmt("%.2f", acc[0]) << "->" << fmt("%.2f", acc[1]);
  }
  const double margin = (at_sum - base_sum) / 5.0;
  return {margin > 0.0, "mean test accuracy last token " + fmt("%.3f", base_sum / 5) + ", AT " + fmt("%.3f", at_sum / 5) +
                            " (margin " + fmt("%+.3f", margin) + "; per seed " + detail.str() + ")"};
}

// ---- 8 ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI and returns the run directory it reports.
fs::path run_tool(const std::string& args) {
  const std::string cmd = std::string(CAUSALIGN_TOOL) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("cannot start " + cmd);
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  if (pclose(pipe) != 0) throw std::runtime_error("`" + cmd + "` failed: " + out);
  return json::parse(out).at("run_dir").get<std::string>();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("causalign-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  std::ofstream(cfg) << json{{"seed", 3},
                             {"dataset", {{"num_samples", 120}, {"num_test", 30}}},
                             {"model", {{"hidden_dim", 32}}},
                             {"train", {{"epochs", 15}, {"lr", 0.01}}},
                             {"sweep", {{"pair_cap", 200}}}}
                          .dump();
  std::array<std::vector<std::string>, 2> reports;
  std::array<std::string, 2> hashes;
  for (int run = 0; run < 2; ++run) {
    const std::string common = "--config " + cfg.string() + " --threads " + std::to_string(run + 1) + " --out " +
                               (root / ("run" + std::to_string(run))).string();
    const fs::path gen = run_tool("generate " + common);
    const fs::path train = run_tool("train " + common + " --dataset " + (gen / "dataset").string());
    const fs::path align = run_tool("align " + common + " --dataset " + (gen / "dataset").string() +
                                    " --checkpoint " + (train / "model").string());
    for (const auto& p : {gen / "report.json", train / "report.json", align / "report.json", gen / "dataset/samples.jsonl",
                          train / "model.bin", align / "alignment.svg"})
      reports[static_cast<std::size_t>(run)].push_back(read_file(p));
    hashes[static_cast<std::size_t>(run)] = json::parse(reports[static_cast<std::size_t>(run)][0]).at("config_hash");
  }
  fs::remove_all(root);
  std::size_t same = 0;
  for (std::size_t k = 0; k < reports[0].size(); ++k) same += reports[0][k] == reports[1][k] && !reports[0][k].empty();
  return {same == reports[0].size() && hashes[0] == hashes[1],
          std::to_string(same) + "/" + std::to_string(reports[0].size()) +
              " artifacts byte-identical across generate/train/align runs at 1 and 2 threads (config hash " +
              hashes[0].substr(0, 12) + ")"};
}

struct Criterion {
  int id;
  const char* name;
  bool soft;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", false, 60, gradient_suite},
      {2, "glass-box oracle", false, 300, glass_box_oracle},
      {3, "trained-model threshold", false, 300, trained_threshold},
      {4, "Psi before Phi ordering (soft)", true, 0, psi_before_phi},
      {5, "intervention algebra", false, 60, intervention_algebra},
      {6, "AT formula fidelity", false, 0, at_fidelity},
      {7, "AT improvement direction (soft)", true, 0, at_direction},
      {8, "determinism", false, 0, determinism},
  };
  int hard_failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    if (!o.pass && !c.soft) ++hard_failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << (o.pass || !c.soft ? "" : " (soft, reported only)") << std::endl;
  }
  std::cout << (hard_failures == 0 ? "acceptance: all hard criteria hold" : "acceptance: hard criteria failed")
            << std::endl;
  return hard_failures == 0 ? 0 : 1;
}
