#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blinkkit {

using FrameIndex = std::int64_t;

enum class StreamKind { RGB, NIR_LEFT, NIR_RIGHT };

std::string_view to_string(StreamKind kind);
/// Lower-case form used for directory names in datasets ("rgb", "nir_left", ...).
std::string_view directory_name(StreamKind kind);
std::optional<StreamKind> parse_stream_kind(std::string_view text);

struct StreamDescriptor {
  StreamKind kind = StreamKind::RGB;
  /// Directory of `%06d.png` frames, resolved against the manifest location.
  std::filesystem::path path;
  FrameIndex frame_count = 0;
};

struct Resolution {
  int width = 1280;
  int height = 720;
};

struct SessionManifest {
  std::string session_id;
  std::string subject_id;
  bool wears_glasses = false;
  std::vector<StreamDescriptor> streams;
  std::filesystem::path eeg_path;
  double fps = 30.0;
  Resolution resolution;

  const StreamDescriptor* stream(StreamKind kind) const;
  /// Frame count of the RGB stream, or of the first stream when there is no RGB.
  FrameIndex reference_frame_count() const;
};

/// One 1 Hz reading of the EEG band.
struct EEGSample {
  double t = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double theta = 0.0;
  double blink_strength = 0.0;
  double attention = 0.0;
};

struct FrameRef {
  StreamKind stream_kind = StreamKind::RGB;
  FrameIndex frame_index = 0;
};

SessionManifest load_session(const std::filesystem::path& manifest_path);
/// Throws InvariantViolation when the manifest breaks a documented invariant.
void validate(const SessionManifest& manifest);
/// Writes `session.json`; stream and EEG paths are stored relative to `manifest_path`'s directory
/// when they live below it.
void save_session(const SessionManifest& manifest, const std::filesystem::path& manifest_path);

std::vector<EEGSample> load_eeg(const std::filesystem::path& path);
void save_eeg(std::span<const EEGSample> samples, const std::filesystem::path& path);

/// round(t * fps), half away from zero.
FrameIndex time_to_frame(double t, double fps);
double frame_to_time(FrameIndex frame_index, double fps);

/// Throws InvariantViolation when the reference does not name an existing frame.
void validate(const FrameRef& ref, const SessionManifest& manifest);
std::filesystem::path frame_path(const StreamDescriptor& stream, FrameIndex frame_index);

}  // namespace blinkkit
