#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "blinkkit/error.hpp"
#include "blinkkit/eye_extraction.hpp"

namespace blinkkit {

namespace {

std::array<cv::Point2d, kLandmarkCount> build_template() {
  using std::numbers::pi;
  std::array<cv::Point2d, kLandmarkCount> p{};
  // Jaw line 0-16.
  for (int i = 0; i <= 16; ++i) {
    const double phi = pi - i * pi / 16.0;
    p[i] = {0.5 + 0.5 * std::cos(phi), 0.35 + 0.65 * std::sin(phi)};
  }
  // Brows 17-21 and 22-26.
  for (int i = 0; i < 5; ++i) {
    const double s = i / 4.0;
    const double lift = 0.04 * std::sin(pi * s);
    p[17 + i] = {0.15 + 0.28 * s, 0.28 - lift};
    p[22 + i] = {0.57 + 0.28 * s, 0.28 - lift};
  }
  // Nose bridge 27-30, base 31-35.
  for (int i = 0; i < 4; ++i) p[27 + i] = {0.5, 0.38 + 0.08 * i};
  for (int i = 0; i < 5; ++i) p[31 + i] = {0.42 + 0.04 * i, i == 2 ? 0.69 : 0.67};
  // Eyes: outer corner, two upper-lid points, inner corner, two lower-lid points.
  p[36] = {0.23, 0.42};
  p[37] = {0.29, 0.385};
  p[38] = {0.35, 0.385};
  p[39] = {0.41, 0.42};
  p[40] = {0.35, 0.455};
  p[41] = {0.29, 0.455};
  p[42] = {0.59, 0.42};
  p[43] = {0.65, 0.385};
  p[44] = {0.71, 0.385};
  p[45] = {0.77, 0.42};
  p[46] = {0.71, 0.455};
  p[47] = {0.65, 0.455};
  // Outer lip 48-59 and inner lip 60-67, clockwise from the image-left corner.
  for (int i = 0; i < 12; ++i) {
    const double phi = pi + i * 2.0 * pi / 12.0;
    p[48 + i] = {0.5 + 0.15 * std::cos(phi), 0.80 + 0.05 * std::sin(phi)};
  }
  for (int i = 0; i < 8; ++i) {
    const double phi = pi + i * 2.0 * pi / 8.0;
    p[60 + i] = {0.5 + 0.10 * std::cos(phi), 0.80 + 0.02 * std::sin(phi)};
  }
  return p;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

// First and last index of the longest run of counts >= min_count, bridging gaps
// of up to two entries. (-1, -1) when there is none.
std::pair<int, int> longest_run(const std::vector<int>& counts, int min_count) {
  constexpr int kMaxGap = 2;
  int best_lo = -1, best_hi = -1, lo = -1, last = -1;
  for (int i = 0; i < static_cast<int>(counts.size()); ++i) {
    if (counts[i] < min_count) continue;
    if (lo < 0 || i - last - 1 > kMaxGap) lo = i;
    last = i;
    if (best_lo < 0 || last - lo > best_hi - best_lo) {
      best_lo = lo;
      best_hi = last;
    }
  }
  return {best_lo, best_hi};
}

}  // namespace

const std::array<cv::Point2d, kLandmarkCount>& face_template() {
  static const auto shape = build_template();
  return shape;
}

std::optional<RawLandmarks> TemplateLandmarkAdapter::locate(const cv::Mat& image) const {
  cv::Mat bgr;
  if (image.channels() == 1) {
    cv::cvtColor(image, bgr, cv::COLOR_GRAY2BGR);
  } else if (image.channels() == 4) {
    cv::cvtColor(image, bgr, cv::COLOR_BGRA2BGR);
  } else {
    bgr = image;
  }
  if (bgr.depth() != CV_8U) bgr.convertTo(bgr, CV_8U, bgr.depth() == CV_16U ? 1.0 / 257.0 : 255.0);

  // Background colour: per-channel median of the one-pixel border.
  cv::Vec3b background;
  {
    std::vector<unsigned char> border[3];
    const auto take = [&](int y, int x) {
      const auto& p = bgr.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) border[c].push_back(p[c]);
    };
    for (int x = 0; x < bgr.cols; ++x) {
      take(0, x);
      take(bgr.rows - 1, x);
    }
    for (int y = 1; y + 1 < bgr.rows; ++y) {
      take(y, 0);
      take(y, bgr.cols - 1);
    }
    for (int c = 0; c < 3; ++c) {
      auto& v = border[c];
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      background[c] = v[v.size() / 2];
    }
  }

  std::vector<int> row_count(bgr.rows, 0), col_count(bgr.cols, 0);
  long total = 0;
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      int diff = 0;
      for (int c = 0; c < 3; ++c) diff = std::max(diff, std::abs(row[x][c] - background[c]));
      if (diff > options_.background_tolerance) {
        ++row_count[y];
        ++col_count[x];
        ++total;
      }
    }
  }
  if (total < options_.min_face_fraction * bgr.rows * bgr.cols) return std::nullopt;

  // The face is the longest run of rows (columns) with more than a few
  // foreground pixels; stray noisy lines elsewhere are ignored.
  const int min_row = std::max(3, bgr.cols / 40);
  const int min_col = std::max(3, bgr.rows / 40);
  const auto [y0, y1] = longest_run(row_count, min_row);
  const auto [x0, x1] = longest_run(col_count, min_col);
  if (y0 < 0 || x0 < 0 || x1 - x0 < 8 || y1 - y0 < 8) return std::nullopt;

  const double fx = x0, fy = y0;
  const double fw = x1 + 1 - x0, fh = y1 + 1 - y0;
  RawLandmarks out;
  out.points.reserve(kLandmarkCount);
  for (const auto& p : face_template()) out.points.emplace_back(fx + p.x * fw, fy + p.y * fh);
  out.confidence = std::min(1.0, static_cast<double>(total) / (0.785 * fw * fh));
  return out;
}

std::optional<RawLandmarks> parse_landmark_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::AdapterFailure, std::string("adapter output is not JSON: ") + e.what());
  }
  if (doc.is_null()) return std::nullopt;
  const nlohmann::json* points = nullptr;
  if (doc.is_array()) {
    points = &doc;
  } else if (doc.is_object() && doc.contains("points")) {
    points = &doc.at("points");
  } else {
    throw Error(ErrorCode::AdapterFailure, "adapter output lacks 'points'");
  }
  if (points->is_null() || (points->is_array() && points->empty())) return std::nullopt;
  RawLandmarks out;
  try {
    for (const auto& pair : *points) {
      if (!pair.is_array() || pair.size() != 2) {
        throw Error(ErrorCode::AdapterFailure, "each landmark must be an [x, y] pair");
      }
      out.points.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    if (doc.is_object() && doc.contains("confidence")) out.confidence = doc.at("confidence").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::AdapterFailure, std::string("bad landmark JSON: ") + e.what());
  }
  return out;
}

std::optional<RawLandmarks> CommandLandmarkAdapter::locate_file(const std::filesystem::path& path) const {
  const std::string cmd = command_ + " " + shell_quote(path.string());
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error(ErrorCode::AdapterFailure, "cannot run " + command_);
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  if (status != 0) {
    throw Error(ErrorCode::AdapterFailure, command_ + " exited with status " + std::to_string(status));
  }
  return parse_landmark_json(output);
}

std::optional<RawLandmarks> CommandLandmarkAdapter::locate(const cv::Mat& image) const {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream name;
  name << "blinkkit-lm-" << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "-"
       << counter.fetch_add(1) << ".png";
  const auto path = std::filesystem::temp_directory_path() / name.str();
  if (!cv::imwrite(path.string(), image)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  } cleanup{path};
  return locate_file(path);
}

std::unique_ptr<LandmarkAdapter> make_landmark_adapter(const std::string& spec) {
  if (spec.empty() || spec == "template") return std::make_unique<TemplateLandmarkAdapter>();
  constexpr std::string_view prefix = "command:";
  if (spec.rfind(prefix, 0) == 0) return std::make_unique<CommandLandmarkAdapter>(spec.substr(prefix.size()));
  throw Error(ErrorCode::ConfigViolation, "unknown landmark adapter '" + spec + "'");
}

}  // namespace blinkkit
