#include "blinkkit/temporal.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"

namespace blinkkit {

double score_sample(std::span<const double> frame_scores) {
  if (frame_scores.empty()) throw Error(ErrorCode::EmptyScores, "sample has no frame scores");
  return *std::max_element(frame_scores.begin(), frame_scores.end());
}

ScoredSample make_scored_sample(std::string sample_id, std::vector<double> frame_scores,
                                std::optional<SampleLabel> label) {
  ScoredSample s;
  s.sample_score = score_sample(frame_scores);
  s.sample_id = std::move(sample_id);
  s.frame_scores = std::move(frame_scores);
  s.label = label;
  return s;
}

ThresholdResult calibrate_threshold(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) {
    throw Error(ErrorCode::EmptyClass, "EER calibration needs positive and negative scores");
  }
  std::vector<double> pos(pos_scores.begin(), pos_scores.end());
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> values;
  values.reserve(pos.size() + neg.size());
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(values));
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<double> thresholds;
  thresholds.reserve(values.size() + 1);
  thresholds.push_back(values.front() - 1.0);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) thresholds.push_back(0.5 * (values[i] + values[i + 1]));
  thresholds.push_back(values.back() + 1.0);

  const auto n_pos = static_cast<long long>(pos.size());
  const auto n_neg = static_cast<long long>(neg.size());
  std::size_t pi = 0, ni = 0;  // counts of scores <= threshold
  bool have = false;
  long long best_diff = 0, best_sum = 0;
  ThresholdResult best;
  for (double t : thresholds) {
    while (pi < pos.size() && pos[pi] <= t) ++pi;
    while (ni < neg.size() && neg[ni] <= t) ++ni;
    const long long fn = static_cast<long long>(pi);
    const long long fp = n_neg - static_cast<long long>(ni);
    // Rates scaled by n_pos * n_neg so comparisons are exact.
    const long long fpr_scaled = fp * n_pos;
    const long long fnr_scaled = fn * n_neg;
    const long long diff = fpr_scaled > fnr_scaled ? fpr_scaled - fnr_scaled : fnr_scaled - fpr_scaled;
    const long long sum = fpr_scaled + fnr_scaled;
    // Thresholds ascend, so keeping the first of equals prefers the smaller one.
    if (!have || diff < best_diff || (diff == best_diff && sum < best_sum)) {
      have = true;
      best_diff = diff;
      best_sum = sum;
      best.threshold = t;
      best.fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
      best.fnr = static_cast<double>(fn) / static_cast<double>(n_pos);
    }
  }
  best.n_pos = pos.size();
  best.n_neg = neg.size();
  return best;
}

std::vector<BlinkEvent> detect_events(std::span<const double> frame_scores, double threshold,
                                      FrameIndex min_gap_frames, FrameIndex first_frame) {
  if (frame_scores.empty()) throw Error(ErrorCode::EmptyScores, "empty score series");
  std::vector<BlinkEvent> runs;
  const auto n = static_cast<FrameIndex>(frame_scores.size());
  for (FrameIndex i = 0; i < n;) {
    if (!(frame_scores[i] > threshold)) {
      ++i;
      continue;
    }
    BlinkEvent e{i, i, frame_scores[i], false};
    while (i + 1 < n && frame_scores[i + 1] > threshold) {
      ++i;
      e.end_frame = i;
      e.peak_score = std::max(e.peak_score, frame_scores[i]);
    }
    runs.push_back(e);
    ++i;
  }
  std::vector<BlinkEvent> events;
  for (const auto& r : runs) {
    if (!events.empty() && r.start_frame - events.back().end_frame - 1 < min_gap_frames) {
      events.back().end_frame = r.end_frame;
      events.back().peak_score = std::max(events.back().peak_score, r.peak_score);
    } else {
      events.push_back(r);
    }
  }
  for (auto& e : events) {
    e.long_closure = e.length() > kMaxBlinkFrames;
    e.start_frame += first_frame;
    e.end_frame += first_frame;
  }
  return events;
}

void save_threshold_report(const ThresholdReport& report, const std::filesystem::path& path) {
  const nlohmann::json doc = {{"threshold", report.result.threshold},
                              {"fpr", report.result.fpr},
                              {"fnr", report.result.fnr},
                              {"n_pos", report.result.n_pos},
                              {"n_neg", report.result.n_neg},
                              {"calibration_split", report.calibration_split}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

ThresholdReport load_threshold_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    ThresholdReport r;
    r.result.threshold = doc.at("threshold").get<double>();
    r.result.fpr = doc.at("fpr").get<double>();
    r.result.fnr = doc.at("fnr").get<double>();
    r.result.n_pos = doc.at("n_pos").get<std::size_t>();
    r.result.n_neg = doc.at("n_neg").get<std::size_t>();
    r.calibration_split = doc.value("calibration_split", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, path.string() + ": " + e.what());
  }
}

void save_scores(std::span<const ScoreRow> rows, const std::filesystem::path& path) {
  std::string text = "sample_id,frame_offset,score,label\n";
  for (const auto& r : rows) {
    text += csv::join({r.sample_id, std::to_string(r.frame_offset), csv::format_double(r.score),
                       r.label ? std::string(to_string(*r.label)) : std::string()});
    text += '\n';
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

std::vector<ScoreRow> load_scores(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  std::vector<ScoreRow> rows;
  if (table.header.empty()) return rows;
  csv::require_header(table, {"sample_id", "frame_offset", "score", "label"}, path.string());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    ScoreRow row;
    row.sample_id = r[0];
    row.frame_offset = static_cast<int>(csv::to_int(r[1], where));
    row.score = csv::to_double(r[2], where);
    if (!r[3].empty()) {
      row.label = parse_sample_label(r[3]);
      if (!row.label) throw Error(ErrorCode::MalformedCsv, where + ": bad label '" + r[3] + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ScoredSample> scored_samples_from_rows(std::span<const ScoreRow> rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ScoreRow*>> groups;
  for (const auto& r : rows) {
    auto [it, inserted] = groups.try_emplace(r.sample_id);
    if (inserted) order.push_back(r.sample_id);
    it->second.push_back(&r);
  }
  std::vector<ScoredSample> out;
  for (const auto& id : order) {
    auto& g = groups[id];
    std::stable_sort(g.begin(), g.end(),
                     [](const ScoreRow* a, const ScoreRow* b) { return a->frame_offset < b->frame_offset; });
    std::vector<double> scores;
    std::optional<SampleLabel> label;
    for (const auto* r : g) {
      scores.push_back(r->score);
      if (r->label) label = r->label;
    }
    out.push_back(make_scored_sample(id, std::move(scores), label));
  }
  return out;
}

}  // namespace blinkkit
