#include <algorithm>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "blinkkit/attention.hpp"
#include "blinkkit/error.hpp"

namespace blinkkit {

namespace {

constexpr int kPanelW = 640;
constexpr int kPanelH = 280;
constexpr int kMarginL = 48, kMarginR = 16, kMarginT = 34, kMarginB = 30;

const cv::Scalar kAttentionColor(200, 90, 20);   // blue
const cv::Scalar kEstimatedColor(40, 40, 220);   // red
const cv::Scalar kGroundTruthColor(40, 160, 40); // green

void draw_curve(cv::Mat& panel, const std::vector<double>& times, const std::vector<double>& values, double t_max,
                const cv::Scalar& color) {
  if (times.size() < 2) return;
  const int w = kPanelW - kMarginL - kMarginR, h = kPanelH - kMarginT - kMarginB;
  std::vector<cv::Point> pts;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double x = kMarginL + (t_max > 0 ? times[i] / t_max : 0.0) * w;
    const double y = kMarginT + (1.0 - std::clamp(values[i], 0.0, 1.0)) * h;
    pts.emplace_back(cvRound(x), cvRound(y));
  }
  cv::polylines(panel, pts, false, color, 2, cv::LINE_AA);
}

cv::Mat render_panel(const SessionAnalysis& s) {
  cv::Mat panel(kPanelH, kPanelW, CV_8UC3, cv::Scalar(255, 255, 255));
  const int x0 = kMarginL, x1 = kPanelW - kMarginR, y0 = kMarginT, y1 = kPanelH - kMarginB;
  cv::rectangle(panel, {x0, y0}, {x1, y1}, cv::Scalar(0, 0, 0), 1);
  const double t_max = s.times.empty() ? 0.0 : s.times.back();
  for (int i = 0; i <= 4; ++i) {
    const int y = y1 - (y1 - y0) * i / 4;
    cv::line(panel, {x0, y}, {x1, y}, cv::Scalar(225, 225, 225), 1);
    char label[8];
    std::snprintf(label, sizeof label, "%.2f", i / 4.0);
    cv::putText(panel, label, {4, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.35, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  char axis[32];
  std::snprintf(axis, sizeof axis, "t = 0 .. %.0f s", t_max);
  cv::putText(panel, axis, {x0, kPanelH - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

  draw_curve(panel, s.times, s.attention_norm, t_max, kAttentionColor);
  draw_curve(panel, s.times, s.bpm_est_norm, t_max, kEstimatedColor);
  draw_curve(panel, s.times, s.bpm_gt_norm, t_max, kGroundTruthColor);

  char title[160];
  if (s.r_attention_estimated) {
    std::snprintf(title, sizeof title, "%s   r(attention, bpm est) = %.3f", s.session_id.c_str(),
                  *s.r_attention_estimated);
  } else {
    std::snprintf(title, sizeof title, "%s   r(attention, bpm est) undefined", s.session_id.c_str());
  }
  cv::putText(panel, title, {x0, 22}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  return panel;
}

}  // namespace

void plot_attention(std::span<const SessionAnalysis> sessions, const std::filesystem::path& png_path) {
  const int n = static_cast<int>(sessions.size());
  const int cols = n <= 1 ? 1 : 2;
  const int rows = std::max(1, (n + cols - 1) / cols);
  constexpr int kLegendH = 30;
  cv::Mat canvas(rows * kPanelH + kLegendH, cols * kPanelW, CV_8UC3, cv::Scalar(255, 255, 255));
  for (int i = 0; i < n; ++i) {
    render_panel(sessions[static_cast<std::size_t>(i)])
        .copyTo(canvas(cv::Rect((i % cols) * kPanelW, (i / cols) * kPanelH, kPanelW, kPanelH)));
  }
  const int ly = rows * kPanelH + 20;
  int lx = 10;
  for (const auto& [name, color] : {std::pair{"normalized attention", kAttentionColor},
                                    std::pair{"estimated bpm", kEstimatedColor},
                                    std::pair{"ground-truth bpm", kGroundTruthColor}}) {
    cv::line(canvas, {lx, ly - 4}, {lx + 24, ly - 4}, color, 2, cv::LINE_AA);
    cv::putText(canvas, name, {lx + 30, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    lx += 200;
  }
  if (!cv::imwrite(png_path.string(), canvas)) throw Error(ErrorCode::IoError, "cannot write " + png_path.string());
}

}  // namespace blinkkit
