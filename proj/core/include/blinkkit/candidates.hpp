#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blinkkit/ingest.hpp"
#include "blinkkit/timestamp.hpp"

namespace blinkkit {

class LandmarkAdapter;

inline constexpr FrameIndex kSampleHalfWidth = 10;
inline constexpr FrameIndex kSampleFrames = 2 * kSampleHalfWidth + 1;
/// Longest physiological blink at 30 Hz.
inline constexpr FrameIndex kMaxBlinkFrames = 13;

enum class CandidateStatus { Pending, Accepted, Rejected };
enum class Decision { Accept, Reject };
enum class SampleLabel { Blink, NoBlink };

std::string_view to_string(CandidateStatus status);
std::string_view to_string(Decision decision);
std::string_view to_string(SampleLabel label);
std::optional<CandidateStatus> parse_candidate_status(std::string_view text);
std::optional<Decision> parse_decision(std::string_view text);
std::optional<SampleLabel> parse_sample_label(std::string_view text);

struct BlinkCandidate {
  std::string candidate_id;
  std::string session_id;
  double t_eeg = 0.0;
  FrameIndex center_frame = 0;
  double strength = 0.0;
  CandidateStatus status = CandidateStatus::Pending;

  bool operator==(const BlinkCandidate&) const = default;
};

struct DecisionRecord {
  std::string candidate_id;
  Decision decision = Decision::Accept;
  std::string reviewer;
  Timestamp decided_at{};
};

/// Inclusive frame interval.
struct FrameRange {
  FrameIndex first = 0;
  FrameIndex last = 0;

  FrameIndex size() const { return last - first + 1; }
  bool operator==(const FrameRange&) const = default;
};

struct LabeledSample {
  std::string sample_id;
  SampleLabel label = SampleLabel::NoBlink;
  std::string session_id;
  FrameRange frame_range;
  std::vector<StreamKind> streams;
  /// Candidate the blink sample came from; empty for no-blink samples.
  std::string candidate_id;
};

struct CandidateOptions {
  std::string session_id;
  double fps = 30.0;
  /// Strengths below this quantile of the strictly positive strengths are ignored.
  double min_strength_quantile = 0.10;
  /// Candidates closer than this many frames collapse onto the stronger one.
  FrameIndex merge_frames = kMaxBlinkFrames;
};

/// One pending candidate per local maximum of blink_strength (strictly above the
/// previous reading, at least the next one) whose strength is positive and at or
/// above the lower-interpolated quantile of all positive strengths.
/// Errors: EmptyTrace.
std::vector<BlinkCandidate> extract_candidates(std::span<const EEGSample> eeg,
                                               const CandidateOptions& options);

/// [center - 10, center + 10]. Errors: WindowOutOfBounds.
FrameRange extract_window(FrameIndex center_frame, FrameIndex frame_count);

struct DecisionOutcome {
  std::vector<BlinkCandidate> candidates;
  std::vector<std::string> unknown_ids;
};

/// Latest decided_at wins per candidate; equal timestamps resolve to the later record.
DecisionOutcome apply_decisions(std::span<const BlinkCandidate> candidates,
                                std::span<const DecisionRecord> decisions);

struct NegativeSamplingRequest {
  std::string session_id;
  FrameIndex frame_count = 0;
  std::vector<StreamKind> streams;
  /// Windows negatives must keep clear of (accepted blinks and any other
  /// footage that may contain a blink).
  std::vector<FrameRange> blink_windows;
  std::size_t count = 0;
  FrameIndex margin_frames = 15;
  std::uint64_t seed = 0;
};

/// Largest number of disjoint 21-frame windows that keep more than
/// `margin_frames` clear of every blink window.
std::size_t negative_capacity(FrameIndex frame_count, std::span<const FrameRange> blink_windows,
                              FrameIndex margin_frames);

/// Draws `count` mutually disjoint no-blink windows, each separated from every
/// blink window by more than `margin_frames` (index distance). Deterministic per seed.
/// Errors: InsufficientNegativeFootage (message carries the achievable maximum).
std::vector<LabeledSample> sample_negatives(const NegativeSamplingRequest& request);

/// Convenience overload taking accepted blink samples of one session.
std::vector<LabeledSample> sample_negatives(std::span<const LabeledSample> accepted,
                                            const SessionManifest& session, std::size_t count,
                                            FrameIndex margin_frames, std::uint64_t seed);

std::vector<BlinkCandidate> load_candidates(const std::filesystem::path& path);
void save_candidates(std::span<const BlinkCandidate> candidates, const std::filesystem::path& path);
std::vector<DecisionRecord> load_decisions(const std::filesystem::path& path);
std::string decision_csv_header();
std::string decision_csv_row(const DecisionRecord& record);
/// Appends one row, writing the header first when the file is new or empty.
void append_decision(const DecisionRecord& record, const std::filesystem::path& path);

struct DatasetOptions {
  FrameIndex margin_frames = 15;
  std::uint64_t seed = 0;
  /// Balance negatives per session instead of globally.
  bool per_session_balance = false;
  double pad = 0.5;
  /// Plan windows and counts without reading or writing any image.
  bool dry_run = false;
  /// Required unless dry_run.
  const LandmarkAdapter* adapter = nullptr;
};

struct DroppedSample {
  std::string id;
  std::string reason;
};

struct DatasetSummary {
  std::size_t blink_count = 0;
  std::size_t no_blink_count = 0;
  /// Cropped-eye images: sum over samples of 21 x 2 eyes x stream count.
  std::size_t image_count = 0;
  std::vector<DroppedSample> dropped;
  std::vector<LabeledSample> samples;
};

/// Eye images a sample contributes: 21 frames x 2 eyes x streams.
std::size_t images_per_sample(std::size_t stream_count);

/// Builds `output_dir/{blink|no_blink}/<sample_id>/<stream>/...` plus sample.json
/// per sample. Candidates are taken from `candidates` after applying `decisions`.
DatasetSummary build_dataset(std::span<const SessionManifest> sessions,
                             std::span<const BlinkCandidate> candidates,
                             std::span<const DecisionRecord> decisions,
                             const std::filesystem::path& output_dir, const DatasetOptions& options);

}  // namespace blinkkit
