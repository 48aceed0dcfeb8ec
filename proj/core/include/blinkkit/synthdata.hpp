#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "blinkkit/attention.hpp"
#include "blinkkit/candidates.hpp"
#include "blinkkit/classifier.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/temporal.hpp"

namespace blinkkit {

enum class EyeState { Open, Closed };

std::string_view to_string(EyeState state);

/// Subject-level look of a synthetic eye (BGR colours in [0, 255]).
struct EyeAppearance {
  cv::Vec3d skin{150, 170, 205};
  cv::Vec3d iris{60, 90, 120};
  cv::Vec3d brow{40, 50, 60};
  /// Lid opening at rest, fraction of the full almond.
  double rest_openness = 0.9;

  static EyeAppearance from_seed(std::uint64_t seed);
};

/// Procedural drawing parameters in eye half-width units (u to the right,
/// v downwards, eye centre at the origin).
struct EyeDrawParams {
  /// 1 = wide open, 0 = lids shut.
  double openness = 1.0;
  double iris_x = 0.0;
  double iris_y = 0.0;
  double illumination = 1.0;
  EyeSide side = EyeSide::Left;
  EyeAppearance appearance;
};

/// Paints the eye (lids, sclera, iris, pupil, crease, brow) onto an 8-bit BGR
/// canvas around `center`, `half_width` pixels from corner to centre.
void draw_eye(cv::Mat& canvas, cv::Point2d center, double half_width, const EyeDrawParams& params);

/// Openness above which an eye counts as open and below which it counts as closed.
inline constexpr double kClosedOpennessMax = 0.12;
inline constexpr double kOpenOpennessMin = 0.65;

struct SyntheticEyeSpec {
  EyeState state = EyeState::Open;
  /// Gaze offset of the iris in eye half-widths.
  double iris_x = 0.0;
  double iris_y = 0.0;
  /// Standard deviation of additive Gaussian noise on the [0, 1] scale.
  double noise_level = 0.0;
  double illumination = 1.0;
  std::uint64_t seed = 0;
  EyeSide side = EyeSide::Left;
  /// Subject look; derived from `seed` when empty.
  std::optional<EyeAppearance> appearance;
  /// Lid opening; derived from state and seed when empty.
  std::optional<double> openness;
  /// Eye size on the source image before cropping, corner to centre in pixels.
  double half_width = 12.5;
};

struct RenderedEye {
  EyeCrop crop;
  EyeState state = EyeState::Open;
};

/// Draws the eye on a face-like patch, then crops it with the same landmark hull,
/// 0.5 padding and resampling the face pipeline uses. Bit-deterministic per spec.
RenderedEye render_eye(const SyntheticEyeSpec& spec);

/// Horizontal-to-vertical face box ratio used by the renderer (height = 1.25 width).
inline constexpr double kFaceAspect = 1.25;

struct FaceFrameSpec {
  cv::Size frame_size{320, 240};
  /// Top-left corner and width of the face box; height = round(kFaceAspect * width).
  cv::Point face_origin{85, 24};
  int face_width = 150;
  double left_openness = 1.0;
  double right_openness = 1.0;
  double iris_x = 0.0;
  double iris_y = 0.0;
  double illumination = 1.0;
  EyeAppearance appearance;
  cv::Vec3d background{70, 45, 30};
  /// Noise std-dev in 8-bit levels.
  double noise_level = 2.0;
  std::uint64_t seed = 0;
};

struct RenderedFace {
  cv::Mat image;
  /// Template landmarks fitted to the drawn face box (ground truth geometry).
  LandmarkSet landmarks;
};

/// A flat face on a uniform background, eyes at the template landmark positions.
RenderedFace render_face_frame(const FaceFrameSpec& spec);

/// Piecewise-constant attention: `value` from `start` until the next segment.
struct AttentionSegment {
  double start = 0.0;
  double value = 50.0;
};

double attention_at(std::span<const AttentionSegment> profile, double t);

/// Relative blink intensity max(0.05, 1 + coupling * z), z = (attention - 50) / 25 clipped to [-1, 1].
double blink_intensity(std::span<const AttentionSegment> profile, double coupling, double t);

struct SyntheticSessionSpec {
  std::string session_id = "synth";
  double duration = 240.0;
  /// Explicit blink times in seconds; generated from the attention profile when empty.
  std::vector<double> blink_times;
  /// Number of blinks to generate when `blink_times` is empty; default from base_rate_bpm.
  std::optional<std::size_t> blink_count;
  double base_rate_bpm = 12.0;
  /// Generated (plateaus of 20-60 s at levels 20-90) when empty.
  std::vector<AttentionSegment> attention_profile;
  /// Links attention to blink intensity; in [-1, 1].
  double coupling = -0.8;
  std::uint64_t seed = 0;
  double fps = 30.0;
  /// Probability per quiet second of a small spurious blink-strength reading.
  double artifact_rate = 0.0;
};

/// Generated blinks are at least this far apart (keeps EEG pulses distinct).
inline constexpr double kMinBlinkSeparation = 2.5;

struct GroundTruthEvent {
  std::string event_id;
  FrameIndex start_frame = 0;
  FrameIndex end_frame = 0;

  FrameIndex length() const { return end_frame - start_frame + 1; }
};

struct SyntheticSession {
  /// Spec with blink times and attention profile filled in.
  SyntheticSessionSpec spec;
  std::vector<EEGSample> eeg;
  std::vector<GroundTruthEvent> events;
  FrameIndex frame_count = 0;

  /// Lid opening of one eye at a frame (closed inside ground-truth events).
  double openness(FrameIndex frame, EyeSide side) const;
  /// Crop-level eye spec for a frame, as the face renderer would draw it.
  SyntheticEyeSpec eye_spec(FrameIndex frame, EyeSide side, double noise_level = 0.02) const;
  FaceFrameSpec face_spec(FrameIndex frame, cv::Size frame_size) const;
  /// Ground-truth event start times in seconds.
  std::vector<double> event_start_times() const;
};

/// Errors: InvariantViolation (bad duration, fps, coupling or blink time),
/// OverlappingBlinks (explicit blinks closer than 13 frames).
SyntheticSession gen_session(const SyntheticSessionSpec& spec);

struct SessionWriteOptions {
  bool render_frames = false;
  cv::Size frame_size{320, 240};
};

/// Writes session.json, eeg.csv, ground_truth.csv and (optionally) rgb/%06d.png.
/// Returns the manifest path.
std::filesystem::path write_session(const SyntheticSession& session, const std::filesystem::path& dir,
                                    const SessionWriteOptions& options = {});

void save_ground_truth(std::span<const GroundTruthEvent> events, const std::filesystem::path& path);
std::vector<GroundTruthEvent> load_ground_truth(const std::filesystem::path& path);

/// A 13- (or n-) frame crop sequence of one subject; blink sequences shut the
/// eye for 3-7 consecutive frames somewhere in the middle.
struct SyntheticSequence {
  std::vector<EyeCrop> crops;
  std::vector<bool> closed;
  SampleLabel label = SampleLabel::NoBlink;
};

SyntheticSequence synthetic_sequence(SampleLabel label, EyeSide side, std::uint64_t seed,
                                     int frames = 13, double noise_level = 0.03);

/// Balanced frame-level crops (half open, half closed), one group per crop.
std::vector<LabeledCrop> synthetic_crop_dataset(std::size_t count, std::uint64_t seed, double noise_level = 0.03);

struct BenchmarkWriteOptions {
  /// Write 50x50 eye crops instead of face frames.
  bool eye_crops = false;
  cv::Size frame_size{200, 180};
  double noise_level = 0.03;
};

/// Writes a benchmark in the `{blink|no_blink}/<id>/<left|right>/%02d.png` layout plus labels.csv.
void write_synthetic_benchmark(const std::filesystem::path& root, std::size_t blink_samples,
                               std::size_t no_blink_samples, std::uint64_t seed,
                               const BenchmarkWriteOptions& options = {});

/// Exhaustive EER reference: evaluates every candidate threshold by direct counting.
ThresholdResult oracle_eer(std::span<const double> pos, std::span<const double> neg);

/// Literal per-window counting loop over events (start frame / fps).
TimeSeries oracle_bpm(std::span<const BlinkEvent> events, double fps, double window, double slide, double duration);

}  // namespace blinkkit
