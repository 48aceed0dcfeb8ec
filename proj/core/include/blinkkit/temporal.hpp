#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blinkkit/candidates.hpp"

namespace blinkkit {

struct ScoredSample {
  std::string sample_id;
  std::vector<double> frame_scores;
  double sample_score = 0.0;
  std::optional<SampleLabel> label;
};

struct BlinkEvent {
  FrameIndex start_frame = 0;
  FrameIndex end_frame = 0;
  double peak_score = 0.0;
  /// Run longer than the 13-frame blink bound (kept, but likely an eye closure).
  bool long_closure = false;

  FrameIndex length() const { return end_frame - start_frame + 1; }
  bool operator==(const BlinkEvent&) const = default;
};

/// Maximum frame score. Errors: EmptyScores.
double score_sample(std::span<const double> frame_scores);
ScoredSample make_scored_sample(std::string sample_id, std::vector<double> frame_scores,
                                std::optional<SampleLabel> label = std::nullopt);

struct ThresholdResult {
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  bool operator==(const ThresholdResult&) const = default;
};

/// Equal-error-rate threshold. Candidates are the midpoints between adjacent
/// distinct values of the merged scores plus the sentinels min - 1 and max + 1;
/// a score is positive iff score > threshold. Picks the candidate minimising
/// |FPR - FNR|, then FPR + FNR, then the threshold itself (compared exactly on
/// integer counts). Errors: EmptyClass.
ThresholdResult calibrate_threshold(std::span<const double> pos_scores, std::span<const double> neg_scores);

inline SampleLabel classify_sample(double sample_score, double threshold) {
  return sample_score > threshold ? SampleLabel::Blink : SampleLabel::NoBlink;
}

/// Maximal runs of frames with score > threshold; runs separated by fewer than
/// `min_gap_frames` sub-threshold frames are merged. Frame indices start at
/// `first_frame`. Errors: EmptyScores.
std::vector<BlinkEvent> detect_events(std::span<const double> frame_scores, double threshold,
                                      FrameIndex min_gap_frames = 4, FrameIndex first_frame = 0);

struct ThresholdReport {
  ThresholdResult result;
  /// Name of the data the threshold was fixed on; always recorded.
  std::string calibration_split;
};

void save_threshold_report(const ThresholdReport& report, const std::filesystem::path& path);
ThresholdReport load_threshold_report(const std::filesystem::path& path);

/// Scores file rows: sample_id,frame_offset,score,label.
struct ScoreRow {
  std::string sample_id;
  int frame_offset = 0;
  double score = 0.0;
  std::optional<SampleLabel> label;
};

void save_scores(std::span<const ScoreRow> rows, const std::filesystem::path& path);
std::vector<ScoreRow> load_scores(const std::filesystem::path& path);
/// Groups rows per sample (first-appearance order), frames ordered by offset.
std::vector<ScoredSample> scored_samples_from_rows(std::span<const ScoreRow> rows);

}  // namespace blinkkit
