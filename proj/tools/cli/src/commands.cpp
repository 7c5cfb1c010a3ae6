#include "ecp_cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ecp/cache.hpp"
#include "ecp/datasets.hpp"
#include "ecp/error.hpp"
#include "ecp/evaluation.hpp"
#include "ecp/pipeline.hpp"
#include "ecp/records.hpp"
#include "ecp_cli/config.hpp"

namespace ecp::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

bool dir_has_entries(const fs::path& dir) {
  std::error_code ec;
  return fs::is_directory(dir, ec) && fs::directory_iterator(dir, ec) != fs::directory_iterator();
}

Dims parse_size(const std::string& text, const std::string& flag) {
  int w = 0;
  int h = 0;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || !in.eof() || w < 1 || h < 1) {
    throw Error(ErrorCode::kConfig, "invalid value for " + flag + ": expected WxH, got '" + text + "'");
  }
  return {w, h};
}

// Writes every image a backend is sent to <dir>/<fingerprint>-<i>.<ext>.
class ArtifactBackend final : public ModelBackend {
 public:
  ArtifactBackend(std::shared_ptr<ModelBackend> inner, fs::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}

  RawReply call(const ChatRequest& req) override {
    const std::string fp = fingerprint(req);
    for (std::size_t i = 0; i < req.images.size(); ++i) {
      const ImagePart& img = req.images[i];
      const char* ext = img.format == ImageFormat::kPng ? ".png" : ".jpg";
      const fs::path path = dir_ / (fp + "-" + std::to_string(i) + ext);
      std::error_code ec;
      if (fs::exists(path, ec)) continue;
      std::ofstream out(path, std::ios::binary);
      out.write(reinterpret_cast<const char*>(img.bytes.data()),
                static_cast<std::streamsize>(img.bytes.size()));
    }
    return inner_->call(req);
  }
  std::string identity() const override { return inner_->identity(); }
  BackendKind kind() const override { return inner_->kind(); }

 private:
  std::shared_ptr<ModelBackend> inner_;
  fs::path dir_;
};

void write_request_index(const fs::path& path, const RequestLog& log) {
  std::string text;
  for (const LoggedRequest& e : log.entries()) {
    json frames = json::array();
    for (const FrameId& f : e.image_frames) {
      frames.push_back({{"kind", to_string(f.kind)}, {"size", {f.dims.width, f.dims.height}}});
    }
    text += json({{"sample_id", e.sample_id},
                  {"stage", e.stage == Stage::kExtract ? "extract" : "predict"},
                  {"permutation", e.permutation},
                  {"fingerprint", e.fingerprint},
                  {"image_labels", e.image_labels},
                  {"image_frames", frames},
                  {"instruction", e.instruction}})
                .dump() +
            "\n";
  }
  write_text(path, text);
}

// ---- run -----------------------------------------------------------------

struct RunFlags {
  std::string config;
  std::string manifest;
  std::string task;
  std::string strategy;
  std::string output_dir;
  std::string cache_dir;
  bool no_cache = false;
  int parallelism = 0;
  std::uint64_t seed = 0;
  bool no_cyclic = false;
  bool resume = false;
  bool print_config = false;
  bool debug_artifacts = false;
  std::string record_fixtures;
  std::string label;
  std::string fixtures;
  std::string ec_kind;
  std::string p_kind;
  int submit_max_side = 0;
  std::string crop;
  int crop_max_side = -1;
  bool ec_excludes_choices = false;
  std::string stage2_global;
  CLI::Option* seed_opt = nullptr;
};

RunConfig resolve_run_config(const RunFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (!f.manifest.empty()) cfg.manifest = f.manifest;
  if (!f.task.empty()) cfg.task = task_from_string(f.task);
  if (!f.strategy.empty()) cfg.pipeline.strategy = strategy_from_string(f.strategy);
  if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
  if (!f.cache_dir.empty()) cfg.cache_dir = f.cache_dir;
  if (f.no_cache) cfg.cache_dir.clear();
  if (f.parallelism != 0) {
    if (f.parallelism < 1) {
      throw Error(ErrorCode::kConfig, "invalid value for --parallelism: must be positive");
    }
    cfg.parallelism = f.parallelism;
  }
  if (f.seed_opt != nullptr && f.seed_opt->count() > 0) apply_seed(cfg, f.seed);
  if (f.no_cyclic) cfg.cyclic_permutation = false;
  if (!f.record_fixtures.empty()) cfg.record_fixtures = f.record_fixtures;
  if (!f.label.empty()) cfg.label = f.label;
  if (!f.ec_kind.empty()) cfg.pipeline.ec_backend.kind = backend_kind_from_string(f.ec_kind);
  if (!f.p_kind.empty()) cfg.pipeline.p_backend.kind = backend_kind_from_string(f.p_kind);
  if (!f.fixtures.empty()) {
    cfg.pipeline.ec_backend.fixtures = f.fixtures;
    cfg.pipeline.p_backend.fixtures = f.fixtures;
  }
  if (f.submit_max_side != 0) cfg.pipeline.submit_max_side = f.submit_max_side;
  if (!f.crop.empty()) {
    const Dims d = parse_size(f.crop, "--crop");
    cfg.pipeline.crop = {d.width, d.height};
  }
  if (f.crop_max_side >= 0) cfg.pipeline.crop_max_side = f.crop_max_side;
  if (f.ec_excludes_choices) cfg.pipeline.ec_sees_choices = false;
  if (f.stage2_global == "on") cfg.pipeline.include_global_in_stage2 = true;
  if (f.stage2_global == "off") cfg.pipeline.include_global_in_stage2 = false;
  if (cfg.task) cfg.pipeline.task = *cfg.task;
  return cfg;
}

int cmd_run(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_run_config(flags);
  if (cfg.manifest.empty()) throw Error(ErrorCode::kConfig, "invalid config field 'manifest': required");

  if (cfg.label.empty()) cfg.label = cfg.output_dir.filename().string();
  if (flags.print_config) {
    if (!cfg.task) {
      try {
        cfg.pipeline.task = load_manifest(cfg.manifest, {.check_images_exist = false}).task;
      } catch (const Error&) {
        // Printing stays useful for a manifest that does not exist yet.
      }
    }
    out << to_json(cfg).dump(2) << '\n';
    return kExitOk;
  }
  const Manifest manifest = load_manifest(cfg.manifest);
  if (!cfg.task) cfg.pipeline.task = manifest.task;
  if (cfg.output_dir.empty()) {
    throw Error(ErrorCode::kConfig, "invalid config field 'output_dir': required");
  }
  if (manifest.task != cfg.pipeline.task) {
    throw Error(ErrorCode::kConfig, "manifest task '" + std::string(to_string(manifest.task)) +
                                        "' does not match config task '" +
                                        std::string(to_string(cfg.pipeline.task)) + "'");
  }
  validate(cfg.pipeline);
  if (dir_has_entries(cfg.output_dir) && !flags.resume) {
    throw Error(ErrorCode::kConfig, "output directory " + cfg.output_dir.string() +
                                        " is not empty (pass --resume to reuse it)");
  }
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + cfg.output_dir.string());

  const PipelineConfig& pc = cfg.pipeline;
  std::shared_ptr<ModelBackend> p_backend = make_backend(pc.p_backend);
  std::shared_ptr<ModelBackend> ec_backend;
  if (pc.strategy == Strategy::kEcp) ec_backend = make_backend(pc.ec_backend);
  std::vector<std::shared_ptr<FixtureRecorder>> recorders;
  if (!cfg.record_fixtures.empty()) {
    for (auto* b : {&p_backend, &ec_backend}) {
      if (!*b) continue;
      auto rec = std::make_shared<FixtureRecorder>(*b);
      recorders.push_back(rec);
      *b = rec;
    }
  }

  const fs::path artifacts = cfg.output_dir / "artifacts";
  RequestLog log;
  if (flags.debug_artifacts) {
    fs::create_directories(artifacts, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + artifacts.string());
    for (auto* b : {&p_backend, &ec_backend}) {
      if (*b) *b = std::make_shared<ArtifactBackend>(*b, artifacts);
    }
  }

  BenchmarkOptions opts;
  if (flags.debug_artifacts) opts.log = &log;
  opts.parallelism = cfg.parallelism;
  opts.cyclic_permutation = cfg.cyclic_permutation;
  if (!cfg.cache_dir.empty()) opts.cache = std::make_shared<ResponseCache>(cfg.cache_dir);

  const BenchmarkResult result = run_benchmark(manifest, pc, ec_backend, p_backend, opts);
  for (const auto& rec : recorders) rec->save(cfg.record_fixtures);
  if (flags.debug_artifacts) write_request_index(artifacts / "requests.jsonl", log);

  write_records(cfg.output_dir / "records.jsonl", result.records);
  write_timings(cfg.output_dir / "timings.jsonl", result.records);
  json snapshot = to_json(cfg);
  snapshot["prompt_template_version"] = kPromptTemplateVersion;
  write_text(cfg.output_dir / "config.json", snapshot.dump(2) + "\n");
  write_text(cfg.output_dir / "prompts.json",
             json({{"version", kPromptTemplateVersion}, {"sha256", pc.templates.hashes()}}).dump(2) +
                 "\n");

  AggregateOptions agg;
  agg.cyclic_permutation = cfg.cyclic_permutation;
  EvalReport report = aggregate(result.records, manifest, agg);
  report.label = cfg.label;
  write_text(cfg.output_dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(cfg.output_dir / "report.md", render_markdown({report}));
  write_text(cfg.output_dir / "summary.json",
             json({{"records", result.records.size()},
                   {"failed_ids", result.failed_ids},
                   {"backend_calls", result.backend_calls},
                   {"cache_hits", result.cache_hits}})
                     .dump(2) +
                 "\n");

  out << "wrote " << result.records.size() << " records to " << cfg.output_dir.string()
      << " (accuracy " << format_percent(report.overall.accuracy) << "%, "
      << result.failed_ids.size() << " failed samples, " << result.backend_calls
      << " backend calls, " << result.cache_hits << " cache hits)\n";
  if (!result.failed_ids.empty()) {
    err << "failed samples:";
    for (const std::string& id : result.failed_ids) err << ' ' << id;
    err << '\n';
  }
  return kExitOk;
}

// ---- report --------------------------------------------------------------

EvalReport load_report(const fs::path& path) {
  fs::path records_path = path;
  std::string label = path.filename().string();
  if (fs::is_directory(path)) {
    records_path = path / "records.jsonl";
    std::ifstream cfg(path / "config.json");
    if (cfg) {
      const json j = json::parse(cfg, nullptr, false);
      if (j.is_object() && j.value("label", "") != "") label = j["label"].get<std::string>();
    }
  } else {
    label = path.stem().string();
  }
  std::error_code ec;
  if (!fs::exists(records_path, ec)) {
    throw Error(ErrorCode::kNotFound, "no records in " + path.string());
  }
  const std::vector<PredictionRecord> records = read_records(records_path);
  if (records.empty()) throw Error(ErrorCode::kNotFound, "no records in " + path.string());
  EvalReport report = aggregate_scored(records);
  report.label = label;
  return report;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& baseline_path,
               const std::string& format, const std::string& output, std::ostream& out) {
  std::vector<EvalReport> reports;
  std::optional<EvalReport> baseline;
  if (!baseline_path.empty()) {
    baseline = load_report(baseline_path);
    reports.push_back(*baseline);
  }
  for (const std::string& run : runs) {
    EvalReport r = load_report(run);
    reports.push_back(baseline ? compare(std::move(r), *baseline) : std::move(r));
  }

  std::string text;
  if (format == "csv") {
    text = render_csv(reports);
  } else if (format == "json") {
    json arr = json::array();
    for (const EvalReport& r : reports) arr.push_back(to_json(r));
    text = arr.dump(2) + "\n";
  } else {
    text = render_markdown(reports);
  }
  if (output.empty()) {
    out << text;
  } else {
    write_text(output, text);
    out << "wrote " << output << '\n';
  }
  return kExitOk;
}

// ---- fixtures --------------------------------------------------------------

struct FixtureFlags {
  std::string kind = "grounding";
  std::size_t n = 10;
  std::string size = "3840x2160";
  std::string target = "24x24";
  int block_px = 4;
  std::uint64_t seed = 1;
  std::string out_dir;
};

int cmd_fixtures(const FixtureFlags& f, std::ostream& out) {
  const Dims dims = parse_size(f.size, "--size");
  const fs::path dir(f.out_dir);
  if (f.kind == "grounding") {
    SyntheticGroundingOptions o;
    o.n = f.n;
    o.image_dims = dims;
    o.target_dims = parse_size(f.target, "--target");
    o.seed = f.seed;
    generate_synthetic_grounding(o, dir);
  } else {
    SyntheticMcOptions o;
    o.n = f.n;
    o.image_dims = dims;
    o.block_px = f.block_px;
    o.seed = f.seed;
    generate_synthetic_mc(o, dir);
  }
  out << (dir / "manifest.jsonl").string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ECP: two-stage high-resolution MLLM orchestration and evaluation", "ecp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ecp 0.1.0");

  RunFlags rf;
  CLI::App* run = app.add_subcommand("run", "Run a benchmark and write a run directory");
  run->add_option("-c,--config", rf.config, "JSON run config")->check(CLI::ExistingFile);
  run->add_option("-m,--manifest", rf.manifest, "Manifest (JSON lines)");
  run->add_option("--task", rf.task, "grounding | multiple_choice (default: from manifest)");
  run->add_option("-s,--strategy", rf.strategy, "single | ecp");
  run->add_option("-o,--out", rf.output_dir, "Output run directory");
  run->add_option("--cache", rf.cache_dir, "Response cache directory");
  run->add_flag("--no-cache", rf.no_cache, "Disable the response cache");
  run->add_option("-j,--parallelism", rf.parallelism, "Samples processed concurrently");
  rf.seed_opt = run->add_option("--seed", rf.seed, "Seed for random backends");
  run->add_flag("--no-cyclic", rf.no_cyclic, "Multiple choice: identity order only");
  run->add_flag("--resume", rf.resume, "Allow a non-empty output directory");
  run->add_flag("--print-config", rf.print_config, "Print the resolved config and exit");
  run->add_flag("--debug-artifacts", rf.debug_artifacts,
                "Write every submitted image and a request index to <out>/artifacts");
  run->add_option("--record-fixtures", rf.record_fixtures,
                  "Save fingerprint -> reply pairs to this fixtures file");
  run->add_option("--label", rf.label, "Row label in reports");
  run->add_option("--fixtures", rf.fixtures, "Fixtures file for scripted backends");
  run->add_option("--ec-backend", rf.ec_kind, "Extraction backend kind");
  run->add_option("--p-backend", rf.p_kind, "Prediction backend kind");
  run->add_option("--submit-max-side", rf.submit_max_side, "Longest side of submitted images");
  run->add_option("--crop", rf.crop, "Candidate crop size WxH");
  run->add_option("--crop-max-side", rf.crop_max_side, "Downsample crops to this side (0 = native)");
  run->add_flag("--ec-excludes-choices", rf.ec_excludes_choices,
                "Multiple choice: extraction prompt shows the question only");
  run->add_option("--stage2-global", rf.stage2_global, "Send the global image in stage 2")
      ->check(CLI::IsMember({"on", "off"}));

  std::vector<std::string> report_runs;
  std::string report_baseline;
  std::string report_format = "markdown";
  std::string report_output;
  CLI::App* report = app.add_subcommand("report", "Render accuracy tables from run directories");
  report->add_option("runs", report_runs, "Run directories or records files")->required();
  report->add_option("--compare", report_baseline, "Baseline run for delta rows");
  report->add_option("-f,--format", report_format, "markdown | csv | json")
      ->check(CLI::IsMember({"markdown", "csv", "json"}));
  report->add_option("-o,--output", report_output, "Write to a file instead of stdout");

  FixtureFlags ff;
  CLI::App* fixtures = app.add_subcommand("fixtures", "Generate a synthetic manifest and images");
  fixtures->add_option("-k,--kind", ff.kind, "grounding | mc")
      ->check(CLI::IsMember({"grounding", "mc"}));
  fixtures->add_option("-n", ff.n, "Number of samples");
  fixtures->add_option("--size", ff.size, "Image size WxH");
  fixtures->add_option("--target", ff.target, "Grounding target size WxH");
  fixtures->add_option("--block-px", ff.block_px, "MC glyph block size in pixels");
  fixtures->add_option("--seed", ff.seed, "Generator seed");
  fixtures->add_option("-o,--out", ff.out_dir, "Output directory")->required();

  std::string cache_dir;
  CLI::App* cache = app.add_subcommand("cache", "Inspect or clear a response cache");
  cache->require_subcommand(1);
  CLI::App* stats = cache->add_subcommand("stats", "Entry count and size");
  CLI::App* clear = cache->add_subcommand("clear", "Remove every entry");
  for (CLI::App* sub : {stats, clear}) {
    sub->add_option("-d,--dir", cache_dir, "Cache directory")->required();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n"
        << "run 'ecp --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(rf, out, err);
    if (*report) return cmd_report(report_runs, report_baseline, report_format, report_output, out);
    if (*fixtures) return cmd_fixtures(ff, out);
    if (*stats) {
      const ResponseCache::Stats s = ResponseCache(cache_dir).stats();
      out << "entries: " << s.entries << "\nbytes: " << s.bytes << '\n';
      return kExitOk;
    }
    if (*clear) {
      out << "removed " << ResponseCache(cache_dir).clear() << " entries\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ecp::cli
