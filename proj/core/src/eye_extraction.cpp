#include "blinkkit/eye_extraction.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "blinkkit/error.hpp"

namespace blinkkit {

std::string_view to_string(EyeSide side) { return side == EyeSide::Left ? "left" : "right"; }

std::optional<EyeSide> parse_eye_side(std::string_view text) {
  if (text == "left" || text == "Left" || text == "L") return EyeSide::Left;
  if (text == "right" || text == "Right" || text == "R") return EyeSide::Right;
  return std::nullopt;
}

void validate(const EyeCrop& crop) {
  if (crop.pixels.size() != static_cast<std::size_t>(EyeCrop::kValues)) {
    throw Error(ErrorCode::ShapeMismatch,
                "eye crop must hold 50x50x3 values, got " + std::to_string(crop.pixels.size()));
  }
  for (float v : crop.pixels) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw Error(ErrorCode::ShapeMismatch, "eye crop value outside [0, 1]: " + std::to_string(v));
    }
  }
}

EyeCrop mirror_horizontal(const EyeCrop& crop) {
  EyeCrop out = crop;
  for (int y = 0; y < EyeCrop::kSize; ++y) {
    for (int x = 0; x < EyeCrop::kSize; ++x) {
      for (int c = 0; c < EyeCrop::kChannels; ++c) {
        out.at(y, x, c) = crop.at(y, EyeCrop::kSize - 1 - x, c);
      }
    }
  }
  return out;
}

cv::Mat to_bgr8(const EyeCrop& crop) {
  cv::Mat out(EyeCrop::kSize, EyeCrop::kSize, CV_8UC3);
  for (int y = 0; y < EyeCrop::kSize; ++y) {
    auto* row = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < EyeCrop::kSize; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(crop.at(y, x, c), 0.0f, 1.0f);
        row[x][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  return out;
}

EyeCrop from_image(const cv::Mat& image, EyeSide side, FrameRef source) {
  if (image.empty()) throw Error(ErrorCode::ShapeMismatch, "empty image");
  const EyeBox box{side, {0.0, 0.0, static_cast<double>(image.cols), static_cast<double>(image.rows)}};
  return crop_and_resize(image, box, source);
}

namespace {

Box hull(const LandmarkSet& landmarks, int first) {
  Box b{landmarks.points[first].x, landmarks.points[first].y, landmarks.points[first].x,
        landmarks.points[first].y};
  for (int i = first + 1; i < first + kEyePointCount; ++i) {
    const auto& p = landmarks.points[i];
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

EyeBox padded_box(const LandmarkSet& landmarks, int first, EyeSide side, double pad,
                  std::optional<cv::Size> frame_size) {
  Box b = hull(landmarks, first);
  if (!(b.width() * b.height() > 0.0)) {
    throw Error(ErrorCode::DegenerateBox, std::string(to_string(side)) + " eye hull has zero area");
  }
  const double grow = pad * std::max(b.width(), b.height());
  b = {b.x0 - grow, b.y0 - grow, b.x1 + grow, b.y1 + grow};
  if (frame_size) {
    const double w = frame_size->width;
    const double h = frame_size->height;
    b = {std::clamp(b.x0, 0.0, w), std::clamp(b.y0, 0.0, h), std::clamp(b.x1, 0.0, w),
         std::clamp(b.y1, 0.0, h)};
    if (!(b.width() > 0.0 && b.height() > 0.0)) {
      throw Error(ErrorCode::EmptyIntersection,
                  std::string(to_string(side)) + " eye box lies outside the frame");
    }
  }
  return {side, b};
}

// RGB float copy of rows [y0, y1) x cols [x0, x1), values in [0, 1].
cv::Mat rgb_region(const cv::Mat& img, const cv::Rect& r) {
  const cv::Mat roi = img(r);
  cv::Mat rgb;
  switch (img.channels()) {
    case 1: cv::cvtColor(roi, rgb, cv::COLOR_GRAY2RGB); break;
    case 4: cv::cvtColor(roi, rgb, cv::COLOR_BGRA2RGB); break;
    default: cv::cvtColor(roi, rgb, cv::COLOR_BGR2RGB); break;
  }
  cv::Mat out;
  switch (img.depth()) {
    case CV_8U: rgb.convertTo(out, CV_32F, 1.0 / 255.0); break;
    case CV_16U: rgb.convertTo(out, CV_32F, 1.0 / 65535.0); break;
    case CV_32F:
      out = cv::min(cv::max(rgb, 0.0), 1.0);
      break;
    default: throw Error(ErrorCode::ShapeMismatch, "unsupported image depth");
  }
  return out;
}

}  // namespace

std::pair<EyeBox, EyeBox> eye_boxes_from_landmarks(const LandmarkSet& landmarks, double pad,
                                                   std::optional<cv::Size> frame_size) {
  if (pad < 0.0 || !std::isfinite(pad)) throw Error(ErrorCode::InvariantViolation, "pad must be >= 0");
  return {padded_box(landmarks, kLeftEyeFirst, EyeSide::Left, pad, frame_size),
          padded_box(landmarks, kRightEyeFirst, EyeSide::Right, pad, frame_size)};
}

EyeCrop crop_and_resize(const cv::Mat& frame, const EyeBox& box, FrameRef source) {
  if (frame.empty() || frame.cols <= 0 || frame.rows <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "empty frame");
  }
  if (frame.channels() != 1 && frame.channels() != 3 && frame.channels() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "frame must have 1, 3 or 4 channels");
  }
  const Box& b = box.bbox;
  if (!(b.x1 > b.x0 && b.y1 > b.y0)) throw Error(ErrorCode::DegenerateBox, "box has zero area");
  const double ix0 = std::max(b.x0, 0.0), iy0 = std::max(b.y0, 0.0);
  const double ix1 = std::min(b.x1, static_cast<double>(frame.cols));
  const double iy1 = std::min(b.y1, static_cast<double>(frame.rows));
  if (!(ix1 > ix0 && iy1 > iy0)) {
    throw Error(ErrorCode::EmptyIntersection, "box does not overlap the frame");
  }

  const double side = std::max(b.width(), b.height());
  const double cx = 0.5 * (b.x0 + b.x1);
  const double cy = 0.5 * (b.y0 + b.y1);
  const double sx0 = cx - 0.5 * side;
  const double sy0 = cy - 0.5 * side;
  const double step = side / EyeCrop::kSize;

  EyeCrop crop;
  crop.side = box.side;
  crop.source = source;
  // Every tap is clamped to the frame, so only this region is ever read.
  const auto clamp_x = [&](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, frame.cols - 1); };
  const auto clamp_y = [&](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, frame.rows - 1); };
  const int rx0 = clamp_x(sx0 + 0.5 * step - 0.5), rx1 = clamp_x(sx0 + (EyeCrop::kSize - 0.5) * step - 0.5) + 1;
  const int ry0 = clamp_y(sy0 + 0.5 * step - 0.5), ry1 = clamp_y(sy0 + (EyeCrop::kSize - 0.5) * step - 0.5) + 1;
  const cv::Rect region(rx0, ry0, std::min(rx1, frame.cols - 1) - rx0 + 1, std::min(ry1, frame.rows - 1) - ry0 + 1);
  const cv::Mat rgb = rgb_region(frame, region);
  const auto px = [&](int x, int y) {
    x = std::clamp(x, 0, frame.cols - 1) - region.x;
    y = std::clamp(y, 0, frame.rows - 1) - region.y;
    return rgb.ptr<float>(y) + 3 * x;
  };
  for (int oy = 0; oy < EyeCrop::kSize; ++oy) {
    const double fy = sy0 + (oy + 0.5) * step - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const float wy = static_cast<float>(fy - y0);
    for (int ox = 0; ox < EyeCrop::kSize; ++ox) {
      const double fx = sx0 + (ox + 0.5) * step - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const float wx = static_cast<float>(fx - x0);
      const float* p00 = px(x0, y0);
      const float* p01 = px(x0 + 1, y0);
      const float* p10 = px(x0, y0 + 1);
      const float* p11 = px(x0 + 1, y0 + 1);
      for (int c = 0; c < EyeCrop::kChannels; ++c) {
        const float top = p00[c] + wx * (p01[c] - p00[c]);
        const float bottom = p10[c] + wx * (p11[c] - p10[c]);
        crop.at(oy, ox, c) = std::clamp(top + wy * (bottom - top), 0.0f, 1.0f);
      }
    }
  }
  return crop;
}

namespace {

LandmarkSet to_landmark_set(const std::optional<RawLandmarks>& raw, const LandmarkAdapter& adapter,
                            const std::string& what) {
  if (!raw) throw Error(ErrorCode::NoFaceFound, "adapter " + adapter.name() + " found no face in " + what);
  if (raw->points.size() != static_cast<std::size_t>(kLandmarkCount)) {
    throw Error(ErrorCode::AdapterFailure, "adapter " + adapter.name() + " returned " +
                                               std::to_string(raw->points.size()) + " points, expected 68");
  }
  LandmarkSet set;
  for (int i = 0; i < kLandmarkCount; ++i) {
    const auto& p = raw->points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::AdapterFailure, "non-finite landmark coordinate");
    }
    set.points[i] = p;
  }
  set.confidence = std::clamp(raw->confidence, 0.0, 1.0);
  return set;
}

}  // namespace

LandmarkSet detect_landmarks(const LandmarkAdapter& adapter, const cv::Mat& image) {
  if (image.empty() || image.cols <= 0 || image.rows <= 0) {
    throw Error(ErrorCode::AdapterFailure, "image has no pixels");
  }
  return to_landmark_set(adapter.locate(image), adapter, "image");
}

LandmarkSet detect_landmarks(const LandmarkAdapter& adapter, const std::filesystem::path& image_path) {
  if (!std::filesystem::exists(image_path)) throw Error(ErrorCode::MissingFile, image_path.string());
  return to_landmark_set(adapter.locate_file(image_path), adapter, image_path.string());
}

std::optional<RawLandmarks> LandmarkAdapter::locate_file(const std::filesystem::path& path) const {
  cv::Mat image = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (image.empty()) throw Error(ErrorCode::AdapterFailure, "cannot decode " + path.string());
  return locate(image);
}

}  // namespace blinkkit
