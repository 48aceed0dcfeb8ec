#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "blinkkit/ingest.hpp"

namespace blinkkit {

inline constexpr int kLandmarkCount = 68;
/// 68-point convention; "left" is image-left (the subject's right eye).
inline constexpr int kLeftEyeFirst = 36;
inline constexpr int kRightEyeFirst = 42;
inline constexpr int kEyePointCount = 6;

enum class EyeSide { Left, Right };

std::string_view to_string(EyeSide side);
std::optional<EyeSide> parse_eye_side(std::string_view text);

struct LandmarkSet {
  std::array<cv::Point2d, kLandmarkCount> points{};
  double confidence = 1.0;
};

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool operator==(const Box&) const = default;
};

struct EyeBox {
  EyeSide side = EyeSide::Left;
  Box bbox;
};

/// 50x50 RGB eye image, row-major HWC, values in [0, 1].
struct EyeCrop {
  static constexpr int kSize = 50;
  static constexpr int kChannels = 3;
  static constexpr int kValues = kSize * kSize * kChannels;

  EyeSide side = EyeSide::Left;
  std::vector<float> pixels = std::vector<float>(kValues, 0.0f);
  FrameRef source;

  float& at(int y, int x, int c) { return pixels[(y * kSize + x) * kChannels + c]; }
  float at(int y, int x, int c) const { return pixels[(y * kSize + x) * kChannels + c]; }
};

/// Throws ShapeMismatch unless the crop is 50x50x3 with every value finite and in [0, 1].
void validate(const EyeCrop& crop);
EyeCrop mirror_horizontal(const EyeCrop& crop);
/// 8-bit BGR image of the crop (for writing PNGs).
cv::Mat to_bgr8(const EyeCrop& crop);
EyeCrop from_image(const cv::Mat& image, EyeSide side, FrameRef source = {});

/// Raw adapter output, validated by `detect_landmarks`.
struct RawLandmarks {
  std::vector<cv::Point2d> points;
  double confidence = 1.0;
};

/// Pluggable facial landmark provider. Implementations must not keep hidden
/// mutable global state; `locate` may be called from several threads.
class LandmarkAdapter {
 public:
  virtual ~LandmarkAdapter() = default;
  /// nullopt means no face in the image.
  virtual std::optional<RawLandmarks> locate(const cv::Mat& image) const = 0;
  virtual std::optional<RawLandmarks> locate_file(const std::filesystem::path& path) const;
  virtual std::string name() const = 0;
};

/// Normalized 68-point mean shape inside the unit face box.
const std::array<cv::Point2d, kLandmarkCount>& face_template();

/// Finds the face as the foreground region against a uniform background and
/// fits the mean shape to its bounding box. Suited to studio-style captures
/// and to the synthetic frames produced by `render_face_frame`.
class TemplateLandmarkAdapter final : public LandmarkAdapter {
 public:
  struct Options {
    int background_tolerance = 40;
    double min_face_fraction = 0.01;
  };
  TemplateLandmarkAdapter() = default;
  explicit TemplateLandmarkAdapter(Options options) : options_(options) {}

  std::optional<RawLandmarks> locate(const cv::Mat& image) const override;
  std::string name() const override { return "template"; }

 private:
  Options options_;
};

/// Runs an external executable as `<command> <image-path>`; it must print JSON
/// `{"points": [[x, y], ...], "confidence": c}` with 68 pairs, or an empty
/// `points` array / `null` when no face is found.
class CommandLandmarkAdapter final : public LandmarkAdapter {
 public:
  explicit CommandLandmarkAdapter(std::string command) : command_(std::move(command)) {}

  std::optional<RawLandmarks> locate(const cv::Mat& image) const override;
  std::optional<RawLandmarks> locate_file(const std::filesystem::path& path) const override;
  std::string name() const override { return "command:" + command_; }

 private:
  std::string command_;
};

/// Parses the adapter JSON contract (shared by the command adapter and tests).
std::optional<RawLandmarks> parse_landmark_json(const std::string& text);

/// Builds an adapter from a configuration string: "template" or "command:<executable>".
std::unique_ptr<LandmarkAdapter> make_landmark_adapter(const std::string& spec);

/// Errors: NoFaceFound, AdapterFailure (wrong point count, non-finite points, bad image).
LandmarkSet detect_landmarks(const LandmarkAdapter& adapter, const cv::Mat& image);
LandmarkSet detect_landmarks(const LandmarkAdapter& adapter, const std::filesystem::path& image_path);

/// Axis-aligned hull of each eye's six points, grown by pad * max(w, h) on
/// every side, then clamped to `frame_size` when given.
/// Errors: DegenerateBox (zero-area hull), EmptyIntersection (box outside the frame).
std::pair<EyeBox, EyeBox> eye_boxes_from_landmarks(const LandmarkSet& landmarks, double pad,
                                                   std::optional<cv::Size> frame_size = std::nullopt);

/// Squares the box about its center, bilinearly resamples it to 50x50 (edge
/// pixels replicate outside the frame) and scales to [0, 1].
/// Errors: EmptyIntersection when the box does not overlap the frame.
EyeCrop crop_and_resize(const cv::Mat& frame, const EyeBox& box, FrameRef source = {});

}  // namespace blinkkit
