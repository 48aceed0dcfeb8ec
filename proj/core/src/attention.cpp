#include "blinkkit/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"

namespace fs = std::filesystem;

namespace blinkkit {

namespace {
// Guards the window-end comparison against representation error in t0 + window.
constexpr double kTimeEps = 1e-9;

void check_window(double window, double slide) {
  if (!(window > 0.0) || !(slide > 0.0)) {
    throw Error(ErrorCode::InvariantViolation, "window and slide must be positive");
  }
}
}  // namespace

std::string_view to_string(SeriesMeaning meaning) {
  switch (meaning) {
    case SeriesMeaning::Attention: return "attention";
    case SeriesMeaning::BlinkRateBpm: return "blink_rate_bpm";
    case SeriesMeaning::BlinkRateGroundTruthBpm: return "blink_rate_groundtruth_bpm";
  }
  return "unknown";
}

TimeSeries attention_series(std::span<const EEGSample> eeg, double window, double slide) {
  if (eeg.empty()) throw Error(ErrorCode::EmptyTrace, "attention series of an empty trace");
  check_window(window, slide);
  if (window < slide) throw Error(ErrorCode::InvariantViolation, "window must not be shorter than the slide");
  const double end = eeg.back().t + 1.0;
  if (window > end + kTimeEps) {
    throw Error(ErrorCode::WindowLongerThanTrace,
                "window " + csv::format_double(window) + " s exceeds trace length " + csv::format_double(end) + " s");
  }
  TimeSeries out;
  out.meaning = SeriesMeaning::Attention;
  std::size_t lo = 0;
  for (long k = 0;; ++k) {
    const double t0 = static_cast<double>(k) * slide;
    if (t0 + window > end + kTimeEps) break;
    while (lo < eeg.size() && eeg[lo].t < t0) ++lo;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = lo; i < eeg.size() && eeg[i].t < t0 + window; ++i, ++n) sum += eeg[i].attention;
    if (n == 0) continue;
    out.times.push_back(t0);
    out.values.push_back(sum / static_cast<double>(n));
  }
  return out;
}

TimeSeries blink_rate_series(std::span<const double> event_start_times, double duration, double window, double slide,
                             SeriesMeaning meaning) {
  check_window(window, slide);
  std::vector<double> starts(event_start_times.begin(), event_start_times.end());
  std::sort(starts.begin(), starts.end());
  TimeSeries out;
  out.meaning = meaning;
  for (long k = 0;; ++k) {
    const double t0 = static_cast<double>(k) * slide;
    if (t0 + window > duration + kTimeEps) break;
    const auto first = std::lower_bound(starts.begin(), starts.end(), t0);
    const auto last = std::lower_bound(first, starts.end(), t0 + window);
    out.times.push_back(t0);
    out.values.push_back(static_cast<double>(last - first) * 60.0 / window);
  }
  return out;
}

TimeSeries blink_rate_series(std::span<const BlinkEvent> events, double fps, double duration, double window,
                             double slide) {
  std::vector<double> starts;
  starts.reserve(events.size());
  for (const auto& e : events) starts.push_back(frame_to_time(e.start_frame, fps));
  return blink_rate_series(starts, duration, window, slide, SeriesMeaning::BlinkRateBpm);
}

TimeSeries minmax_normalize(const TimeSeries& series) {
  TimeSeries out = series;
  if (series.values.empty()) return out;
  const auto [mn, mx] = std::minmax_element(series.values.begin(), series.values.end());
  const double lo = *mn, range = *mx - *mn;
  for (auto& v : out.values) v = range > 0.0 ? (v - lo) / range : 0.0;
  return out;
}

TimeSeries resample_nearest(const TimeSeries& series, std::span<const double> times) {
  if (series.times.empty()) throw Error(ErrorCode::InsufficientOverlap, "cannot resample an empty series");
  TimeSeries out;
  out.meaning = series.meaning;
  for (double t : times) {
    const auto it = std::lower_bound(series.times.begin(), series.times.end(), t);
    std::size_t idx;
    if (it == series.times.begin()) {
      idx = 0;
    } else if (it == series.times.end()) {
      idx = series.times.size() - 1;
    } else {
      const auto hi = static_cast<std::size_t>(it - series.times.begin());
      idx = (series.times[hi] - t < t - series.times[hi - 1]) ? hi : hi - 1;
    }
    out.times.push_back(t);
    out.values.push_back(series.values[idx]);
  }
  return out;
}

namespace {

double median_spacing(const TimeSeries& s) {
  if (s.times.size() < 2) return 0.0;
  std::vector<double> d;
  for (std::size_t i = 1; i < s.times.size(); ++i) d.push_back(s.times[i] - s.times[i - 1]);
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

AlignedPair align(const TimeSeries& a, const TimeSeries& b) {
  AlignedPair out;
  if (a.times.empty() || b.times.empty()) return out;
  const bool grid_is_a = median_spacing(a) >= median_spacing(b);
  const TimeSeries& grid = grid_is_a ? a : b;
  const double lo = std::max(a.times.front(), b.times.front());
  const double hi = std::min(a.times.back(), b.times.back());
  for (double t : grid.times) {
    if (t >= lo && t <= hi) out.times.push_back(t);
  }
  if (out.times.empty()) return out;
  out.a = resample_nearest(a, out.times).values;
  out.b = resample_nearest(b, out.times).values;
  return out;
}

double correlate(const TimeSeries& a, const TimeSeries& b) {
  const auto p = align(a, b);
  if (p.times.size() < 3) {
    throw Error(ErrorCode::InsufficientOverlap,
                "only " + std::to_string(p.times.size()) + " shared points, at least 3 are needed");
  }
  if (constant(p.a) || constant(p.b)) throw Error(ErrorCode::ZeroVariance, "a series is constant over the overlap");
  const double n = static_cast<double>(p.times.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < p.a.size(); ++i) {
    ma += p.a[i];
    mb += p.b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < p.a.size(); ++i) {
    const double da = p.a[i] - ma, db = p.b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(ErrorCode::ZeroVariance, "a series is constant over the overlap");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

std::optional<double> try_correlate(const TimeSeries& a, const TimeSeries& b, const std::string& what,
                                    std::vector<std::string>& notes) {
  try {
    return correlate(a, b);
  } catch (const Error& e) {
    notes.push_back(what + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace

SessionAnalysis analyze_session(const SessionAnalysisInput& input, const AttentionOptions& options) {
  SessionAnalysis out;
  out.session_id = input.session_id;
  if (!input.frame_scores.empty()) {
    out.events = detect_events(input.frame_scores, input.threshold, options.min_gap_frames);
  }
  const double duration = static_cast<double>(input.frame_scores.size()) / input.fps;
  out.attention = attention_series(input.eeg, options.attention_window, options.attention_slide);
  out.bpm_estimated = blink_rate_series(out.events, input.fps, duration, options.bpm_window, options.bpm_slide);
  out.bpm_ground_truth = blink_rate_series(input.ground_truth_times, duration, options.bpm_window, options.bpm_slide,
                                           SeriesMeaning::BlinkRateGroundTruthBpm);

  const auto long_closures = std::count_if(out.events.begin(), out.events.end(),
                                           [](const BlinkEvent& e) { return e.long_closure; });
  if (long_closures > 0) out.notes.push_back(std::to_string(long_closures) + " events flagged long_closure");

  out.r_attention_estimated = try_correlate(out.attention, out.bpm_estimated, "attention vs estimated bpm", out.notes);
  out.r_attention_ground_truth =
      try_correlate(out.attention, out.bpm_ground_truth, "attention vs ground-truth bpm", out.notes);
  out.r_estimated_ground_truth =
      try_correlate(out.bpm_estimated, out.bpm_ground_truth, "estimated vs ground-truth bpm", out.notes);

  const std::size_t n = std::min(out.bpm_estimated.size(), out.bpm_ground_truth.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < n; ++i) diff += std::abs(out.bpm_estimated.values[i] - out.bpm_ground_truth.values[i]);
  out.mean_abs_bpm_difference = n > 0 ? diff / static_cast<double>(n) : 0.0;

  const auto att = minmax_normalize(out.attention);
  const auto est = minmax_normalize(out.bpm_estimated);
  const auto gt = minmax_normalize(out.bpm_ground_truth);
  const auto grid = align(att, est);
  out.times = grid.times;
  if (!out.times.empty()) {
    out.attention_norm = grid.a;
    out.bpm_est_norm = grid.b;
    out.bpm_gt_norm = resample_nearest(gt, out.times).values;
  }
  return out;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void write_attention_report(std::span<const SessionAnalysis> sessions, const fs::path& output_dir) {
  fs::create_directories(output_dir);
  nlohmann::json summary;
  summary["sessions"] = nlohmann::json::array();
  for (const auto& s : sessions) {
    const fs::path csv_path = output_dir / (s.session_id + "_attention.csv");
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
    out << "t,attention_norm,bpm_est_norm,bpm_gt_norm\n";
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      out << csv::join({csv::format_double(s.times[i]), csv::format_double(s.attention_norm[i]),
                        csv::format_double(s.bpm_est_norm[i]), csv::format_double(s.bpm_gt_norm[i])})
          << '\n';
    }
    std::size_t long_closures = 0;
    for (const auto& e : s.events) long_closures += e.long_closure ? 1 : 0;
    summary["sessions"].push_back({{"session_id", s.session_id},
                                   {"pearson_r_attention_bpm_est", optional_number(s.r_attention_estimated)},
                                   {"pearson_r_attention_bpm_gt", optional_number(s.r_attention_ground_truth)},
                                   {"pearson_r_bpm_est_bpm_gt", optional_number(s.r_estimated_ground_truth)},
                                   {"mean_abs_bpm_difference", s.mean_abs_bpm_difference},
                                   {"detected_events", s.events.size()},
                                   {"long_closures", long_closures},
                                   {"points", s.times.size()},
                                   {"notes", s.notes}});
  }
  const fs::path json_path = output_dir / "attention_summary.json";
  std::ofstream js(json_path);
  if (!js) throw Error(ErrorCode::IoError, "cannot write " + json_path.string());
  js << summary.dump(2) << '\n';
  plot_attention(sessions, output_dir / "attention.png");
}

}  // namespace blinkkit
