#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "blinkkit/attention.hpp"
#include "blinkkit/candidates.hpp"
#include "blinkkit/classifier.hpp"
#include "blinkkit/error.hpp"
#include "blinkkit/evaluation.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/ingest.hpp"
#include "blinkkit/review.hpp"
#include "blinkkit/synthdata.hpp"
#include "blinkkit/temporal.hpp"
#include "blinkkit/timestamp.hpp"

#ifndef BLINKKIT_VERSION
#define BLINKKIT_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace blinkkit::cli {

namespace {

struct RunLog {
  json doc = json::object();
  void set(const std::string& key, json value) { doc[key] = std::move(value); }
};

std::vector<std::string> strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

// extract-candidates ------------------------------------------------------

struct ExtractArgs {
  std::vector<fs::path> sessions;
  fs::path out;
  double quantile = 0.10;
  FrameIndex merge_frames = kMaxBlinkFrames;
};

void extract_candidates_cmd(const ExtractArgs& a, RunLog& log) {
  std::vector<BlinkCandidate> all;
  json per_session = json::object();
  for (const auto& path : a.sessions) {
    const auto session = load_session(path);
    const auto eeg = load_eeg(session.eeg_path);
    CandidateOptions options;
    options.session_id = session.session_id;
    options.fps = session.fps;
    options.min_strength_quantile = a.quantile;
    options.merge_frames = a.merge_frames;
    auto found = extract_candidates(eeg, options);
    per_session[session.session_id] = found.size();
    all.insert(all.end(), found.begin(), found.end());
  }
  save_candidates(all, a.out);
  log.set("config", {{"sessions", strings(a.sessions)}, {"quantile", a.quantile}, {"merge_frames", a.merge_frames}});
  log.set("outputs", {{"candidates", a.out.string()}, {"counts", per_session}});
  std::printf("%zu candidates written to %s\n", all.size(), a.out.string().c_str());
}

// build-dataset -----------------------------------------------------------

struct BuildArgs {
  std::vector<fs::path> sessions;
  fs::path candidates;
  fs::path decisions;
  fs::path out;
  FrameIndex margin = 15;
  std::uint64_t seed = 0;
  bool per_session = false;
  double pad = 0.5;
  std::string adapter = "template";
  bool dry_run = false;
};

void build_dataset_cmd(const BuildArgs& a, RunLog& log) {
  std::vector<SessionManifest> sessions;
  for (const auto& p : a.sessions) sessions.push_back(load_session(p));
  const auto candidates = load_candidates(a.candidates);
  std::vector<DecisionRecord> decisions;
  if (!a.decisions.empty() && fs::exists(a.decisions)) decisions = load_decisions(a.decisions);
  const auto adapter = make_landmark_adapter(a.adapter);
  DatasetOptions options;
  options.margin_frames = a.margin;
  options.seed = a.seed;
  options.per_session_balance = a.per_session;
  options.pad = a.pad;
  options.dry_run = a.dry_run;
  options.adapter = adapter.get();
  const auto summary = build_dataset(sessions, candidates, decisions, a.out, options);
  log.set("config", {{"sessions", strings(a.sessions)},
                     {"candidates", a.candidates.string()},
                     {"decisions", a.decisions.string()},
                     {"margin_frames", a.margin},
                     {"per_session_balance", a.per_session},
                     {"pad", a.pad},
                     {"adapter", adapter->name()},
                     {"dry_run", a.dry_run}});
  log.set("seeds", {{"negative_sampling", a.seed}});
  log.set("outputs", {{"dataset", a.out.string()},
                      {"blink", summary.blink_count},
                      {"no_blink", summary.no_blink_count},
                      {"images", summary.image_count},
                      {"dropped", summary.dropped.size()}});
  std::printf("blink %zu, no_blink %zu, images %zu, dropped %zu\n", summary.blink_count, summary.no_blink_count,
              summary.image_count, summary.dropped.size());
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  fs::path dataset;
  std::size_t synthetic = 0;
  std::uint64_t synthetic_seed = 1;
  std::string stream = "rgb";
  fs::path checkpoint;
  TrainConfig config;
  bool per_eye = false;
};

json train_config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"validation_fraction", c.validation_fraction},
          {"early_stop_patience", c.early_stop_patience},
          {"shared_eyes", c.shared_eyes}};
}

void train_cmd(TrainArgs a, RunLog& log) {
  a.config.shared_eyes = !a.per_eye;
  std::vector<LabeledCrop> data;
  if (a.synthetic > 0) {
    data = synthetic_crop_dataset(a.synthetic, a.synthetic_seed);
  } else {
    const auto kind = parse_stream_kind(a.stream);
    if (!kind) throw Error(ErrorCode::ConfigViolation, "unknown stream '" + a.stream + "'");
    data = load_dataset_crops(a.dataset, *kind);
  }
  spdlog::info("training on {} crops", data.size());
  const auto checkpoint = train(data, a.config, {}, [](const std::string& eye, const EpochRecord& r) {
    spdlog::info("[{}] epoch {}: train loss {:.4f} acc {:.4f}, val loss {:.4f} acc {:.4f}", eye, r.epoch,
                 r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy);
  });
  checkpoint.save(a.checkpoint);
  log.set("config", {{"dataset", a.dataset.string()}, {"synthetic_crops", a.synthetic}, {"train", train_config_json(a.config)}});
  log.set("seeds", {{"train", a.config.seed}, {"synthetic", a.synthetic_seed}});
  json models = json::array();
  for (const auto& m : checkpoint.models) {
    models.push_back({{"eye", m.eye}, {"epochs", m.history.epochs.size()}, {"best_epoch", m.history.best_epoch}});
  }
  log.set("outputs", {{"checkpoint", a.checkpoint.string()},
                      {"dataset_fingerprint", checkpoint.dataset_fingerprint},
                      {"models", models}});
  std::printf("checkpoint written to %s\n", a.checkpoint.string().c_str());
}

// calibrate / evaluate -----------------------------------------------------

struct BenchArgs {
  fs::path bench;
  fs::path checkpoint;
  std::string adapter = "template";
  double pad = 0.5;
  bool eye_crops = false;
};

std::vector<ScoreRow> bench_scores(const BenchArgs& a, EvaluationResult* result_out = nullptr) {
  const auto set = load_benchmark(a.bench);
  const auto model = Checkpoint::load(a.checkpoint);
  const auto adapter = make_landmark_adapter(a.adapter);
  EvaluateOptions options;
  options.frames_are_eye_crops = a.eye_crops;
  options.pad = a.pad;
  options.adapter = adapter.get();
  auto result = evaluate(set.samples, model, 0.5, options);
  std::vector<ScoreRow> rows;
  for (const auto& o : result.outcomes) {
    const std::string id = o.sample.sample_id + "/" + std::string(to_string(o.sample.eye_side));
    for (std::size_t k = 0; k < o.scored.frame_scores.size(); ++k) {
      rows.push_back({id, static_cast<int>(k), o.scored.frame_scores[k], o.sample.label});
    }
  }
  if (result_out) *result_out = std::move(result);
  return rows;
}

struct CalibrateArgs {
  fs::path scores;
  BenchArgs bench;
  fs::path scores_out;
  std::string split;
  fs::path out;
};

void calibrate_cmd(const CalibrateArgs& a, RunLog& log) {
  std::vector<ScoreRow> rows;
  if (!a.scores.empty()) {
    rows = load_scores(a.scores);
  } else {
    rows = bench_scores(a.bench);
    if (!a.scores_out.empty()) save_scores(rows, a.scores_out);
  }
  std::vector<double> pos, neg;
  for (const auto& s : scored_samples_from_rows(rows)) {
    if (!s.label) throw Error(ErrorCode::MalformedCsv, "sample " + s.sample_id + " has no label");
    (*s.label == SampleLabel::Blink ? pos : neg).push_back(s.sample_score);
  }
  ThresholdReport report{calibrate_threshold(pos, neg), a.split};
  save_threshold_report(report, a.out);
  log.set("config", {{"scores", a.scores.string()}, {"bench", a.bench.bench.string()}, {"calibration_split", a.split}});
  log.set("outputs", {{"threshold_report", a.out.string()},
                      {"threshold", report.result.threshold},
                      {"fpr", report.result.fpr},
                      {"fnr", report.result.fnr}});
  std::printf("threshold %.6f (FPR %.4f, FNR %.4f, %zu pos / %zu neg, split '%s')\n", report.result.threshold,
              report.result.fpr, report.result.fnr, report.result.n_pos, report.result.n_neg, a.split.c_str());
}

struct EvaluateArgs {
  BenchArgs bench;
  fs::path threshold_report;
  fs::path baselines;
  fs::path out_json;
  fs::path out_table;
  fs::path scores_out;
  std::string method = "blinkkit";
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void evaluate_cmd(const EvaluateArgs& a, RunLog& log) {
  const auto threshold = load_threshold_report(a.threshold_report);
  const auto set = load_benchmark(a.bench.bench);
  const auto model = Checkpoint::load(a.bench.checkpoint);
  const auto adapter = make_landmark_adapter(a.bench.adapter);
  EvaluateOptions options;
  options.frames_are_eye_crops = a.bench.eye_crops;
  options.pad = a.bench.pad;
  options.adapter = adapter.get();
  const auto result = evaluate(set.samples, model, threshold.result.threshold, options);
  std::vector<ReportRow> baselines;
  if (!a.baselines.empty()) baselines = load_baselines(a.baselines);
  const auto report = render_report(result.metrics, baselines, a.method);
  std::fputs(report.text.c_str(), stdout);
  const fs::path json_path = a.out_json.empty() ? fs::path("metrics.json") : a.out_json;
  write_text(json_path, report.json);
  if (!a.out_table.empty()) write_text(a.out_table, report.text);
  if (!a.scores_out.empty()) {
    std::vector<ScoreRow> rows;
    for (const auto& o : result.outcomes) {
      const std::string id = o.sample.sample_id + "/" + std::string(to_string(o.sample.eye_side));
      for (std::size_t k = 0; k < o.scored.frame_scores.size(); ++k) {
        rows.push_back({id, static_cast<int>(k), o.scored.frame_scores[k], o.sample.label});
      }
    }
    save_scores(rows, a.scores_out);
  }
  log.set("config", {{"bench", a.bench.bench.string()},
                     {"checkpoint", a.bench.checkpoint.string()},
                     {"threshold", threshold.result.threshold},
                     {"calibration_split", threshold.calibration_split},
                     {"adapter", adapter->name()},
                     {"eye_crops", a.bench.eye_crops}});
  log.set("outputs", {{"metrics_json", json_path.string()},
                      {"samples", set.samples.size()},
                      {"malformed", set.malformed.size()},
                      {"skipped", result.skipped.size()}});
}

// attention-report ---------------------------------------------------------

struct AttentionArgs {
  std::vector<fs::path> sessions;
  fs::path checkpoint;
  fs::path threshold_report;
  fs::path candidates;
  fs::path decisions;
  fs::path out;
  std::string adapter = "template";
  double pad = 0.5;
  AttentionOptions options;
};

void attention_cmd(const AttentionArgs& a, RunLog& log) {
  const auto model = Checkpoint::load(a.checkpoint);
  const auto threshold = load_threshold_report(a.threshold_report);
  const auto adapter = make_landmark_adapter(a.adapter);
  std::vector<BlinkCandidate> candidates;
  if (!a.candidates.empty()) {
    candidates = load_candidates(a.candidates);
    if (!a.decisions.empty() && fs::exists(a.decisions)) {
      const auto decisions = load_decisions(a.decisions);
      candidates = apply_decisions(candidates, decisions).candidates;
    }
  }
  std::vector<SessionAnalysis> analyses;
  json failures = json::object();
  for (const auto& path : a.sessions) {
    const auto session = load_session(path);
    SessionAnalysisInput input;
    input.session_id = session.session_id;
    input.eeg = load_eeg(session.eeg_path);
    input.fps = session.fps;
    input.threshold = threshold.result.threshold;
    const auto scoring = score_video_frames(session, model, *adapter, a.pad);
    input.frame_scores = scoring.scores;
    failures[session.session_id] = scoring.failed_frames;
    for (const auto& c : candidates) {
      if (c.session_id == session.session_id && c.status == CandidateStatus::Accepted) {
        input.ground_truth_times.push_back(c.t_eeg);
      }
    }
    auto analysis = analyze_session(input, a.options);
    if (input.ground_truth_times.empty()) analysis.notes.push_back("no accepted candidates for ground truth");
    analyses.push_back(std::move(analysis));
  }
  write_attention_report(analyses, a.out);
  log.set("config", {{"sessions", strings(a.sessions)},
                     {"checkpoint", a.checkpoint.string()},
                     {"threshold", threshold.result.threshold},
                     {"attention_window", a.options.attention_window},
                     {"attention_slide", a.options.attention_slide},
                     {"bpm_window", a.options.bpm_window},
                     {"bpm_slide", a.options.bpm_slide},
                     {"min_gap_frames", a.options.min_gap_frames}});
  log.set("outputs", {{"report_dir", a.out.string()}, {"failed_frames", failures}});
  for (const auto& s : analyses) {
    if (s.r_attention_estimated) {
      std::printf("%s: r(attention, estimated bpm) = %.4f\n", s.session_id.c_str(), *s.r_attention_estimated);
    } else {
      std::printf("%s: r(attention, estimated bpm) undefined\n", s.session_id.c_str());
    }
  }
}

// synth --------------------------------------------------------------------

struct SynthSessionArgs {
  fs::path out;
  std::string session_id = "synth";
  double duration = 240.0;
  int blinks = -1;
  std::vector<double> blink_times;
  double coupling = -0.8;
  double fps = 30.0;
  double artifact_rate = 0.0;
  std::uint64_t seed = 0;
  bool render = false;
  int width = 320;
  int height = 240;
};

void synth_session_cmd(const SynthSessionArgs& a, RunLog& log) {
  SyntheticSessionSpec spec;
  spec.session_id = a.session_id;
  spec.duration = a.duration;
  spec.blink_times = a.blink_times;
  if (a.blinks >= 0) spec.blink_count = static_cast<std::size_t>(a.blinks);
  spec.coupling = a.coupling;
  spec.fps = a.fps;
  spec.artifact_rate = a.artifact_rate;
  spec.seed = a.seed;
  const auto session = gen_session(spec);
  SessionWriteOptions options;
  options.render_frames = a.render;
  options.frame_size = {a.width, a.height};
  const auto manifest = write_session(session, a.out, options);
  log.set("config", {{"duration", a.duration}, {"blinks", a.blinks}, {"coupling", a.coupling}, {"fps", a.fps},
                     {"render_frames", a.render}, {"artifact_rate", a.artifact_rate}});
  log.set("seeds", {{"session", a.seed}});
  log.set("outputs", {{"manifest", manifest.string()}, {"events", session.events.size()}});
  std::printf("%s: %zu blinks, %lld frames\n", manifest.string().c_str(), session.events.size(),
              static_cast<long long>(session.frame_count));
}

struct SynthBenchArgs {
  fs::path out;
  std::size_t blink = 381;
  std::size_t no_blink = 292;
  std::uint64_t seed = 0;
  bool eye_crops = false;
  double noise = 0.03;
};

void synth_bench_cmd(const SynthBenchArgs& a, RunLog& log) {
  BenchmarkWriteOptions options;
  options.eye_crops = a.eye_crops;
  options.noise_level = a.noise;
  write_synthetic_benchmark(a.out, a.blink, a.no_blink, a.seed, options);
  log.set("config", {{"blink", a.blink}, {"no_blink", a.no_blink}, {"eye_crops", a.eye_crops}, {"noise", a.noise}});
  log.set("seeds", {{"bench", a.seed}});
  log.set("outputs", {{"bench", a.out.string()}});
  std::printf("benchmark with %zu blink / %zu no_blink samples written to %s\n", a.blink, a.no_blink,
              a.out.string().c_str());
}

// serve-review -------------------------------------------------------------

struct ServeArgs {
  int port = 8080;
  fs::path candidates;
  fs::path decisions;
  fs::path frames_root;
  fs::path ui_dir;
};

void serve_cmd(const ServeArgs& a, RunLog& log) {
  const char* env = std::getenv("BLINKKIT_BIND");
  const std::string host = env && *env ? env : "127.0.0.1";
  ReviewConfig config;
  config.candidates_path = a.candidates;
  config.decisions_path = a.decisions;
  config.frames_root = a.frames_root;
  config.ui_dir = a.ui_dir;
  ReviewService service(config);
  const int port = service.bind(host, a.port);
  if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(a.port));
  log.set("config", {{"host", host}, {"port", port}, {"candidates", a.candidates.string()},
                     {"decisions", a.decisions.string()}, {"frames_root", a.frames_root.string()}});
  spdlog::info("review service on http://{}:{}", host, port);
  service.serve();
}

void emit_run_log(const RunLog& log, const fs::path& path) {
  const std::string text = log.doc.dump() + "\n";
  if (path.empty()) {
    std::fputs(text.c_str(), stderr);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    spdlog::error("cannot write run log {}", path.string());
    return;
  }
  out << text;
}

}  // namespace

int run(int argc, char** argv) {
  if (!spdlog::get("blinkkit")) spdlog::set_default_logger(spdlog::stderr_color_mt("blinkkit"));
  CLI::App app{"blinkkit: EEG-labelled blink detection and attention analysis"};
  app.set_version_flag("--version", BLINKKIT_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  fs::path run_log_path;
  std::string log_level = "info";
  app.add_option("--run-log", run_log_path, "Write the JSON run log here instead of stderr");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  ExtractArgs extract;
  auto* ex = app.add_subcommand("extract-candidates", "EEG blink-strength peaks to blink candidates");
  ex->add_option("--session", extract.sessions, "session.json (repeatable)")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", extract.out, "Candidates CSV")->required();
  ex->add_option("--quantile", extract.quantile, "Minimum strength quantile")->check(CLI::Range(0.0, 1.0));
  ex->add_option("--merge-frames", extract.merge_frames, "Merge candidates closer than this");

  BuildArgs build;
  auto* bd = app.add_subcommand("build-dataset", "Write the 21-frame blink / no-blink dataset");
  bd->add_option("--session", build.sessions, "session.json (repeatable)")->required()->check(CLI::ExistingFile);
  bd->add_option("--candidates", build.candidates)->required()->check(CLI::ExistingFile);
  bd->add_option("--decisions", build.decisions, "Decisions CSV");
  bd->add_option("--out", build.out)->required();
  bd->add_option("--margin", build.margin, "Frames kept clear around blink windows");
  bd->add_option("--seed", build.seed);
  bd->add_flag("--per-session", build.per_session, "Balance negatives per session");
  bd->add_option("--pad", build.pad);
  bd->add_option("--adapter", build.adapter, "template | command:<executable>");
  bd->add_flag("--dry-run", build.dry_run, "Plan and count without writing images");

  TrainArgs tr;
  auto* trc = app.add_subcommand("train", "Train the blink CNN");
  auto* src = trc->add_option("--dataset", tr.dataset, "Dataset directory from build-dataset");
  trc->add_option("--synthetic", tr.synthetic, "Train on this many synthetic crops instead")->excludes(src);
  trc->add_option("--synthetic-seed", tr.synthetic_seed);
  trc->add_option("--stream", tr.stream);
  trc->add_option("--checkpoint", tr.checkpoint, "Output checkpoint")->required();
  trc->add_option("--epochs", tr.config.epochs)->check(CLI::NonNegativeNumber);
  trc->add_option("--batch-size", tr.config.batch_size)->check(CLI::PositiveNumber);
  trc->add_option("--lr", tr.config.learning_rate)->check(CLI::PositiveNumber);
  trc->add_option("--seed", tr.config.seed);
  trc->add_option("--val-fraction", tr.config.validation_fraction)->check(CLI::Range(0.0, 0.9));
  trc->add_option("--patience", tr.config.early_stop_patience);
  auto* shared = trc->add_flag("--shared-eyes", "One model for both eyes (default)");
  trc->add_flag("--per-eye", tr.per_eye, "One model per eye")->excludes(shared);

  CalibrateArgs cal;
  auto* ca = app.add_subcommand("calibrate", "Fix the EER threshold");
  auto* scores_opt = ca->add_option("--scores", cal.scores, "Scores CSV")->check(CLI::ExistingFile);
  ca->add_option("--bench", cal.bench.bench, "Benchmark directory to score")->excludes(scores_opt);
  ca->add_option("--checkpoint", cal.bench.checkpoint);
  ca->add_option("--adapter", cal.bench.adapter);
  ca->add_option("--pad", cal.bench.pad);
  ca->add_flag("--eye-crops", cal.bench.eye_crops, "Benchmark frames are already eye crops");
  ca->add_option("--scores-out", cal.scores_out);
  ca->add_option("--split-name", cal.split, "Name of the calibration data (recorded)")->required();
  ca->add_option("--out", cal.out, "Threshold report JSON")->required();

  EvaluateArgs ev;
  auto* eva = app.add_subcommand("evaluate", "Per-eye recall / precision / F1 on a benchmark");
  eva->add_option("--bench", ev.bench.bench)->required();
  eva->add_option("--checkpoint", ev.bench.checkpoint)->required()->check(CLI::ExistingFile);
  eva->add_option("--threshold-report", ev.threshold_report)->required()->check(CLI::ExistingFile);
  eva->add_option("--adapter", ev.bench.adapter);
  eva->add_option("--pad", ev.bench.pad);
  eva->add_flag("--eye-crops", ev.bench.eye_crops, "Benchmark frames are already eye crops");
  eva->add_option("--baselines", ev.baselines, "CSV method,eye,recall,precision,f1")->check(CLI::ExistingFile);
  eva->add_option("--method", ev.method, "Name of the evaluated row");
  eva->add_option("--out-json", ev.out_json);
  eva->add_option("--out-table", ev.out_table);
  eva->add_option("--scores-out", ev.scores_out);

  AttentionArgs at;
  auto* ar = app.add_subcommand("attention-report", "Attention vs blink-rate series and correlation");
  ar->add_option("--session", at.sessions)->required()->check(CLI::ExistingFile);
  ar->add_option("--checkpoint", at.checkpoint)->required()->check(CLI::ExistingFile);
  ar->add_option("--threshold-report", at.threshold_report)->required()->check(CLI::ExistingFile);
  ar->add_option("--candidates", at.candidates, "Candidates CSV for ground-truth bpm");
  ar->add_option("--decisions", at.decisions);
  ar->add_option("--out", at.out)->required();
  ar->add_option("--adapter", at.adapter);
  ar->add_option("--pad", at.pad);
  ar->add_option("--attention-window", at.options.attention_window);
  ar->add_option("--attention-slide", at.options.attention_slide);
  ar->add_option("--bpm-window", at.options.bpm_window);
  ar->add_option("--bpm-slide", at.options.bpm_slide);
  ar->add_option("--min-gap", at.options.min_gap_frames);

  auto* sy = app.add_subcommand("synth", "Synthetic sessions and benchmarks");
  sy->require_subcommand(1);
  SynthSessionArgs ss;
  auto* sys = sy->add_subcommand("session", "EEG trace, ground truth and optional face frames");
  sys->add_option("--out", ss.out)->required();
  sys->add_option("--session-id", ss.session_id);
  sys->add_option("--duration", ss.duration)->check(CLI::PositiveNumber);
  sys->add_option("--blinks", ss.blinks, "Number of blinks (default from 12 bpm)");
  sys->add_option("--blink-times", ss.blink_times, "Explicit blink times in seconds");
  sys->add_option("--coupling", ss.coupling)->check(CLI::Range(-1.0, 1.0));
  sys->add_option("--fps", ss.fps)->check(CLI::PositiveNumber);
  sys->add_option("--artifact-rate", ss.artifact_rate)->check(CLI::Range(0.0, 1.0));
  sys->add_option("--seed", ss.seed);
  sys->add_flag("--render-frames", ss.render);
  sys->add_option("--width", ss.width)->check(CLI::PositiveNumber);
  sys->add_option("--height", ss.height)->check(CLI::PositiveNumber);
  SynthBenchArgs sb;
  auto* syb = sy->add_subcommand("bench", "Benchmark in the 13-frame layout");
  syb->add_option("--out", sb.out)->required();
  syb->add_option("--blink", sb.blink);
  syb->add_option("--no-blink", sb.no_blink);
  syb->add_option("--seed", sb.seed);
  syb->add_flag("--eye-crops", sb.eye_crops, "Write eye crops instead of face frames");
  syb->add_option("--noise", sb.noise);

  ServeArgs sv;
  auto* se = app.add_subcommand("serve-review", "HTTP review service (bind address from BLINKKIT_BIND)");
  se->add_option("--port", sv.port);
  se->add_option("--candidates", sv.candidates)->required()->check(CLI::ExistingFile);
  se->add_option("--decisions", sv.decisions)->required();
  se->add_option("--frames-root", sv.frames_root)->required();
  se->add_option("--ui-dir", sv.ui_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  RunLog log;
  std::vector<std::string> args(argv, argv + argc);
  log.set("version", BLINKKIT_VERSION);
  log.set("argv", args);
  log.set("started_at", format_iso8601(utc_now()));
  int code = 0;
  try {
    if (*ex) {
      log.set("command", "extract-candidates");
      extract_candidates_cmd(extract, log);
    } else if (*bd) {
      log.set("command", "build-dataset");
      build_dataset_cmd(build, log);
    } else if (*trc) {
      log.set("command", "train");
      if (tr.dataset.empty() && tr.synthetic == 0) throw CLI::RequiredError("--dataset or --synthetic");
      train_cmd(tr, log);
    } else if (*ca) {
      log.set("command", "calibrate");
      if (cal.scores.empty() && (cal.bench.bench.empty() || cal.bench.checkpoint.empty())) {
        throw CLI::RequiredError("--scores or --bench with --checkpoint");
      }
      calibrate_cmd(cal, log);
    } else if (*eva) {
      log.set("command", "evaluate");
      evaluate_cmd(ev, log);
    } else if (*ar) {
      log.set("command", "attention-report");
      attention_cmd(at, log);
    } else if (*sys) {
      log.set("command", "synth session");
      synth_session_cmd(ss, log);
    } else if (*syb) {
      log.set("command", "synth bench");
      synth_bench_cmd(sb, log);
    } else if (*se) {
      log.set("command", "serve-review");
      serve_cmd(sv, log);
    }
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "usage error: %s\n%s", e.what(), app.help().c_str());
    code = 2;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    log.set("error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}});
    code = 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    log.set("error", {{"code", "Internal"}, {"message", e.what()}});
    code = 1;
  }
  log.set("finished_at", format_iso8601(utc_now()));
  log.set("exit_code", code);
  emit_run_log(log, run_log_path);
  return code;
}

}  // namespace blinkkit::cli
