#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blinkkit/candidates.hpp"
#include "blinkkit/classifier.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/temporal.hpp"

namespace blinkkit {

inline constexpr int kBenchmarkFrames = 13;

struct BenchmarkSample {
  std::string sample_id;
  EyeSide eye_side = EyeSide::Left;
  std::vector<std::filesystem::path> frames;
  SampleLabel label = SampleLabel::NoBlink;
};

struct SkippedSample {
  std::string sample_id;
  std::optional<EyeSide> eye_side;
  std::string reason;
};

struct BenchmarkSet {
  std::vector<BenchmarkSample> samples;
  std::vector<SkippedSample> malformed;

  std::size_t count(SampleLabel label) const;
  std::size_t count(SampleLabel label, EyeSide side) const;
};

/// Reads `root/{blink|no_blink}/<sample_id>/<left|right>/00.png..12.png`.
/// `root/labels.csv` (sample_id,label) is optional; when present it must agree
/// with the directory. Samples with the wrong frame count or a label conflict
/// are skipped with a warning and listed in `malformed`. A missing root yields
/// an empty set.
BenchmarkSet load_benchmark(const std::filesystem::path& root);

struct EvalMetrics {
  EyeSide eye_side = EyeSide::Left;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  /// Samples excluded because a frame could not be cropped (no face etc).
  std::size_t skipped = 0;
};

/// Recall, precision and F1 from counts; zero denominators give 0.
EvalMetrics compute_metrics(EyeSide side, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
double f1_score(double precision, double recall);

struct EvaluateOptions {
  /// Frames are face images cropped through landmarks; when true they are
  /// already eye images and are only resized to 50x50.
  bool frames_are_eye_crops = false;
  double pad = 0.5;
  /// Required unless frames_are_eye_crops.
  const LandmarkAdapter* adapter = nullptr;
};

struct SampleOutcome {
  BenchmarkSample sample;
  ScoredSample scored;
  SampleLabel predicted = SampleLabel::NoBlink;
};

struct EvaluationResult {
  /// Left then right.
  std::vector<EvalMetrics> metrics;
  std::vector<SampleOutcome> outcomes;
  std::vector<SkippedSample> skipped;
};

/// Crops every frame, scores it, max-aggregates per sample and classifies at
/// `threshold`. Samples whose frames cannot be cropped are skipped and counted.
EvaluationResult evaluate(std::span<const BenchmarkSample> samples, const Checkpoint& model, double threshold,
                          const EvaluateOptions& options = {});

struct FrameScoring {
  /// Mean closed-eye score of both eyes per frame.
  std::vector<double> scores;
  /// Frames where no face was found or cropping failed (scored 0).
  std::size_t failed_frames = 0;
};

/// Scores every frame of one stream of a session (continuous video).
FrameScoring score_video_frames(const SessionManifest& session, const Checkpoint& model,
                                const LandmarkAdapter& adapter, double pad = 0.5,
                                StreamKind stream = StreamKind::RGB);

/// Accumulates metrics per eye from already scored outcomes.
std::vector<EvalMetrics> metrics_from_outcomes(std::span<const SampleOutcome> outcomes,
                                               std::span<const SkippedSample> skipped = {});

struct ReportRow {
  std::string method;
  std::string eye;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct Report {
  std::string text;
  std::string json;
  std::vector<std::string> warnings;
};

/// Table of evaluated rows followed by pass-through baseline rows, values with
/// four decimals. Rows whose f1 differs from 2PR/(P+R) by more than 1e-4 get a
/// consistency warning.
Report render_report(std::span<const EvalMetrics> metrics, std::span<const ReportRow> baselines = {},
                     const std::string& method = "blinkkit");

/// Baseline rows from CSV `method,eye,recall,precision,f1`.
std::vector<ReportRow> load_baselines(const std::filesystem::path& path);

}  // namespace blinkkit
