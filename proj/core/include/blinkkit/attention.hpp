#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blinkkit/ingest.hpp"
#include "blinkkit/temporal.hpp"

namespace blinkkit {

enum class SeriesMeaning { Attention, BlinkRateBpm, BlinkRateGroundTruthBpm };

std::string_view to_string(SeriesMeaning meaning);

struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;
  SeriesMeaning meaning = SeriesMeaning::Attention;

  std::size_t size() const { return times.size(); }
};

/// Mean attention over samples with t in [t0, t0 + window) for t0 = 0, slide,
/// 2 slide, ... while t0 + window <= trace end (last t + 1 s). Windows holding
/// no sample (gaps in the trace) are left out.
/// Errors: EmptyTrace, WindowLongerThanTrace, InvariantViolation (window < slide or slide <= 0).
TimeSeries attention_series(std::span<const EEGSample> eeg, double window = 20.0, double slide = 5.0);

/// Events per window x 60 / window, counting events whose start time lies in
/// [t0, t0 + window), for t0 = 0, slide, ... while t0 + window <= duration.
/// Errors: InvariantViolation (window or slide <= 0).
TimeSeries blink_rate_series(std::span<const double> event_start_times, double duration, double window = 5.0,
                             double slide = 5.0, SeriesMeaning meaning = SeriesMeaning::BlinkRateBpm);
TimeSeries blink_rate_series(std::span<const BlinkEvent> events, double fps, double duration, double window = 5.0,
                             double slide = 5.0);

/// (v - min) / (max - min); a constant series maps to zeros.
TimeSeries minmax_normalize(const TimeSeries& series);

/// Value of `series` at the sample nearest to each time (ties take the earlier one).
TimeSeries resample_nearest(const TimeSeries& series, std::span<const double> times);

struct AlignedPair {
  std::vector<double> times;
  std::vector<double> a;
  std::vector<double> b;
};

/// Puts both series on the grid of the coarser one (larger median spacing; `a`
/// on ties), restricted to their common time span, by nearest-time matching.
AlignedPair align(const TimeSeries& a, const TimeSeries& b);

/// Pearson r over the aligned overlap.
/// Errors: InsufficientOverlap (< 3 shared points), ZeroVariance (either side constant).
double correlate(const TimeSeries& a, const TimeSeries& b);

struct AttentionOptions {
  double attention_window = 20.0;
  double attention_slide = 5.0;
  double bpm_window = 5.0;
  double bpm_slide = 5.0;
  FrameIndex min_gap_frames = 4;
};

struct SessionAnalysisInput {
  std::string session_id;
  std::vector<EEGSample> eeg;
  /// Closed-eye score per video frame (starting at frame 0).
  std::vector<double> frame_scores;
  double fps = 30.0;
  double threshold = 0.5;
  /// Ground-truth event times in seconds (accepted EEG candidates).
  std::vector<double> ground_truth_times;
};

struct SessionAnalysis {
  std::string session_id;
  std::vector<BlinkEvent> events;
  TimeSeries attention;
  TimeSeries bpm_estimated;
  TimeSeries bpm_ground_truth;
  /// Normalised series on the bpm grid restricted to the attention span.
  std::vector<double> times;
  std::vector<double> attention_norm;
  std::vector<double> bpm_est_norm;
  std::vector<double> bpm_gt_norm;
  std::optional<double> r_attention_estimated;
  std::optional<double> r_attention_ground_truth;
  std::optional<double> r_estimated_ground_truth;
  /// Mean |estimated - ground-truth| bpm on the shared bpm grid (raw bpm).
  double mean_abs_bpm_difference = 0.0;
  std::vector<std::string> notes;
};

/// Detects blink events on the frame scores, builds the three series and their
/// correlations. Correlations that cannot be computed are left empty and noted.
SessionAnalysis analyze_session(const SessionAnalysisInput& input, const AttentionOptions& options = {});

/// Writes `<session_id>_attention.csv` (t,attention_norm,bpm_est_norm,bpm_gt_norm)
/// per session, `attention_summary.json`, and `attention.png` with one panel per session.
void write_attention_report(std::span<const SessionAnalysis> sessions, const std::filesystem::path& output_dir);

/// One panel per session with the three normalised curves.
void plot_attention(std::span<const SessionAnalysis> sessions, const std::filesystem::path& png_path);

}  // namespace blinkkit
