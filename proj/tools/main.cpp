// causalign: generate datasets, train GNNs, sweep alignments, check the
// reference network, and run scale / position studies.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "causalign/checkpoint.hpp"
#include "causalign/errors.hpp"
#include "causalign/parallel.hpp"
#include "cli/run.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace causalign;

namespace {

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

int exit_code_for(const std::string& kind) {
  for (const char* k : {"config", "invalid_params", "io", "corrupt_record", "remote", "training_diverged"})
    if (kind == k) return kUserError;
  return kInternalError;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path make_run_dir(const fs::path& out, const std::string& command, const std::string& hash) {
  const std::string stem = command + "-" + utc_stamp() + "-" + hash.substr(0, 8);
  fs::path dir = out / stem;
  for (int k = 2; fs::exists(dir); ++k) dir = out / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

class Stopwatch {
 public:
  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    phases_[phase] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  json report() const {
    json j = phases_;
    j["total_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return j;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now(), last_ = start_;
  json phases_ = json::object();
};

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = default_threads();
  std::string out;
  std::string dataset_dir;
  std::string checkpoint;
  std::string axis;
};

synth::Dataset dataset_for(const cli::RunConfig& c, const Options& o) {
  return o.dataset_dir.empty() ? cli::make_dataset(c, o.threads) : cli::load_matching_dataset(c, o.dataset_dir);
}

// Runs one command; returns the report body and sets `failed` when the
// command ran but its check did not hold.
json run(const cli::RunConfig& c, const Options& o, const fs::path& dir, Stopwatch& clock, bool& failed) {
  json report;
  if (o.command == "generate") {
    const synth::Dataset d = cli::make_dataset(c, o.threads);
    clock.lap("generate_s");
    synth::emit_dataset(d, dir / "dataset");
    report["dataset"] = cli::dataset_summary(d);
    report["artifacts"] = {"dataset/manifest.json", "dataset/samples.jsonl"};
    return report;
  }
  if (o.command == "train") {
    const synth::Dataset d = dataset_for(c, o);
    clock.lap("dataset_s");
    cli::Features f = cli::make_features(c, d, o.threads);
    clock.lap("features_s");
    const cli::Trained t = cli::train_model(c, d, f, o.threads);
    clock.lap("train_s");
    save_checkpoint(dir / "model", cli::make_checkpoint(c, t.model, f));
    report["dataset"] = cli::dataset_summary(d);
    report["training"] = cli::training_summary(t, f);
    report["artifacts"] = {"model.json", "model.bin"};
    if (f.at_input) {
      write_json(dir / "prompts.json", f.prompts);
      report["artifacts"].push_back("prompts.json");
    }
    return report;
  }
  if (o.command == "align") {
    if (o.checkpoint.empty()) throw ConfigError("align needs --checkpoint <prefix>");
    const synth::Dataset d = dataset_for(c, o);
    cli::Features f = cli::make_features(c, d, o.threads);
    const gnn::GnnModel model = cli::restore(c, load_checkpoint(o.checkpoint), f);
    clock.lap("load_s");
    const auto grid = cli::align(c, d, model, f, o.threads);
    clock.lap("sweep_s");
    intervene::write_grid(grid, dir, "alignment");
    report["test_accuracy"] = gnn::accuracy(model, *f.input, d.samples, d.manifest.test, o.threads);
    report["alignment"] = cli::grid_summary(grid);
    report["grid"] = intervene::to_json(grid);
    report["artifacts"] = {"alignment.json", "alignment.csv", "alignment.svg"};
    return report;
  }
  if (o.command == "oracle") {
    if (c.dataset.task != synth::Task::NodeLevel) throw ConfigError("oracle needs a node_level dataset");
    const synth::Dataset d = dataset_for(c, o);
    intervene::SweepConfig s = c.sweep;
    s.threads = o.threads;
    if (s.variables.empty()) s.variables = {"Psi1", "Psi2", "Psi3", "Phi1", "Phi2"};
    const auto r = intervene::run_oracle(synth::high_level_model(d), d.samples, s);
    clock.lap("oracle_s");
    intervene::write_grid(r.grid, dir, "oracle");
    std::cout << (r.pass ? "PASS" : "FAIL") << " glass-box oracle: max L_II = " << r.max_lii << " (tolerance "
              << intervene::kOracleTolerance << ", margin " << intervene::kOracleMargin << ")\n";
    failed = !r.pass;
    report["oracle"] = intervene::to_json(r);
    report["artifacts"] = {"oracle.json", "oracle.csv", "oracle.svg"};
    return report;
  }
  // study
  const auto axis = cli::study_axis_from_string(o.axis);
  report["study"] = cli::run_study(c, axis, o.threads, dir / "grids");
  clock.lap("study_s");
  return report;
}

void print_error(const std::string& kind, const std::string& message, int code,
                 const std::optional<fs::path>& dir) {
  const json e = {{"status", "error"}, {"exit_code", code}, {"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << e.dump() << "\n";
  if (dir) {
    std::ofstream out(*dir / "error.json");
    out << e.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep the large activation buffers on the heap instead of fresh mappings.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Synthetic causal graphs, GNN training and interchange-intervention alignment"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run config (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed, overrides the config");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "parent of the run directory, overrides the config");
  };
  auto* gen = app.add_subcommand("generate", "write a dataset");
  auto* train = app.add_subcommand("train", "train a model and save a checkpoint");
  auto* align = app.add_subcommand("align", "sweep interchange interventions over a trained model");
  auto* oracle = app.add_subcommand("oracle", "validate the sweep on the hand-wired reference network");
  auto* study = app.add_subcommand("study", "train and align across model depth, width or feature position");
  for (auto* sub : {gen, train, align, oracle, study}) common(sub);
  for (auto* sub : {train, align, oracle})
    sub->add_option("--dataset", o.dataset_dir, "dataset directory written by generate")->check(CLI::ExistingDirectory);
  align->add_option("--checkpoint", o.checkpoint, "checkpoint prefix written by train")->required();
  study->add_option("--axis", o.axis, "layers, hidden or position")
      ->required()
      ->check(CLI::IsMember({"layers", "hidden", "position"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what(), kUserError, std::nullopt);
    return kUserError;
  }
  for (auto* sub : app.get_subcommands()) o.command = sub->get_name();

  std::optional<fs::path> dir;
  try {
    json user = json::object();
    if (!o.config_path.empty()) {
      std::ifstream in(o.config_path);
      try {
        user = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(o.config_path + ": " + e.what());
      }
    }
    if (!user.is_object()) throw ConfigError("config: expected a JSON object");
    if (o.seed) user["seed"] = *o.seed;
    if (!o.out.empty()) user["out"] = o.out;
    const cli::RunConfig c = cli::resolve_config(user);
    const std::string hash = cli::config_hash(c);

    Stopwatch clock;
    dir = make_run_dir(c.out, o.command, hash);
    write_json(*dir / "config.json", c.document);
    bool failed = false;
    json report = {{"command", o.command}, {"config_hash", hash}};
    report.update(run(c, o, *dir, clock, failed));
    write_json(*dir / "report.json", report);
    json timing = clock.report();
    timing["threads"] = o.threads;
    write_json(*dir / "timing.json", timing);
    if (failed) {
      print_error("check_failed", o.command + " check did not hold; see report.json", kInternalError, dir);
      return kInternalError;
    }
    std::cout << json{{"status", "ok"}, {"command", o.command}, {"run_dir", dir->string()}, {"config_hash", hash}}.dump()
              << "\n";
    return 0;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    print_error(e.kind(), e.what(), code, dir);
    return code;
  } catch (const fs::filesystem_error& e) {
    print_error("io", e.what(), kUserError, dir);
    return kUserError;
  } catch (const std::exception& e) {
    print_error("internal", e.what(), kInternalError, dir);
    return kInternalError;
  }
}
