#include "blinkkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"

namespace fs = std::filesystem;

namespace blinkkit {

std::size_t BenchmarkSet::count(SampleLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const BenchmarkSample& s) { return s.label == label; }));
}

std::size_t BenchmarkSet::count(SampleLabel label, EyeSide side) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const BenchmarkSample& s) {
    return s.label == label && s.eye_side == side;
  }));
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::string, SampleLabel> read_labels(const fs::path& path) {
  std::map<std::string, SampleLabel> labels;
  if (!fs::exists(path)) return labels;
  const auto table = csv::read(path);
  if (table.header.empty()) return labels;
  csv::require_header(table, {"sample_id", "label"}, path.string());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto label = parse_sample_label(table.rows[i][1]);
    if (!label) {
      throw Error(ErrorCode::MalformedCsv,
                  path.string() + ":" + std::to_string(table.line_numbers[i]) + ": bad label '" + table.rows[i][1] + "'");
    }
    labels[table.rows[i][0]] = *label;
  }
  return labels;
}

}  // namespace

BenchmarkSet load_benchmark(const fs::path& root) {
  BenchmarkSet set;
  if (!fs::is_directory(root)) return set;
  const auto labels = read_labels(root / "labels.csv");

  for (SampleLabel label : {SampleLabel::Blink, SampleLabel::NoBlink}) {
    const fs::path class_dir = root / std::string(to_string(label));
    if (!fs::is_directory(class_dir)) continue;
    for (const auto& sample_dir : sorted_entries(class_dir, true)) {
      const std::string id = sample_dir.filename().string();
      if (auto it = labels.find(id); it != labels.end() && it->second != label) {
        const std::string why = "MalformedSample: labels.csv says " + std::string(to_string(it->second)) +
                                " but the sample sits under " + std::string(to_string(label));
        spdlog::warn("benchmark sample {} skipped: {}", id, why);
        set.malformed.push_back({id, std::nullopt, why});
        continue;
      }
      for (const auto& side_dir : sorted_entries(sample_dir, true)) {
        const auto side = parse_eye_side(side_dir.filename().string());
        if (!side) continue;
        std::vector<fs::path> frames;
        for (const auto& f : sorted_entries(side_dir, false)) {
          if (f.extension() == ".png") frames.push_back(f);
        }
        bool ok = static_cast<int>(frames.size()) == kBenchmarkFrames;
        for (int k = 0; ok && k < kBenchmarkFrames; ++k) {
          char name[16];
          std::snprintf(name, sizeof name, "%02d.png", k);
          ok = frames[static_cast<std::size_t>(k)].filename() == name;
        }
        if (!ok) {
          const std::string why = "MalformedSample: expected frames 00.png..12.png, found " +
                                  std::to_string(frames.size()) + " png files";
          spdlog::warn("benchmark sample {}/{} skipped: {}", id, to_string(*side), why);
          set.malformed.push_back({id, side, why});
          continue;
        }
        set.samples.push_back({id, *side, std::move(frames), label});
      }
    }
  }
  spdlog::info("benchmark {}: {} blink / {} no_blink samples (left {}+{}, right {}+{}), {} malformed",
               root.string(), set.count(SampleLabel::Blink), set.count(SampleLabel::NoBlink),
               set.count(SampleLabel::Blink, EyeSide::Left), set.count(SampleLabel::NoBlink, EyeSide::Left),
               set.count(SampleLabel::Blink, EyeSide::Right), set.count(SampleLabel::NoBlink, EyeSide::Right),
               set.malformed.size());
  return set;
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

EvalMetrics compute_metrics(EyeSide side, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  EvalMetrics m;
  m.eye_side = side;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

namespace {

EyeCrop crop_frame(const fs::path& path, EyeSide side, const EvaluateOptions& options) {
  const cv::Mat image = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (image.empty()) throw Error(ErrorCode::MissingFile, "cannot decode " + path.string());
  if (options.frames_are_eye_crops) {
    EyeBox box{side, Box{0.0, 0.0, static_cast<double>(image.cols), static_cast<double>(image.rows)}};
    return crop_and_resize(image, box);
  }
  if (options.adapter == nullptr) throw Error(ErrorCode::ConfigViolation, "a landmark adapter is required");
  const auto landmarks = detect_landmarks(*options.adapter, image);
  const auto [left, right] = eye_boxes_from_landmarks(landmarks, options.pad, image.size());
  return crop_and_resize(image, side == EyeSide::Left ? left : right);
}

}  // namespace

std::vector<EvalMetrics> metrics_from_outcomes(std::span<const SampleOutcome> outcomes,
                                               std::span<const SkippedSample> skipped) {
  std::vector<EvalMetrics> out;
  for (EyeSide side : {EyeSide::Left, EyeSide::Right}) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& o : outcomes) {
      if (o.sample.eye_side != side) continue;
      const bool actual = o.sample.label == SampleLabel::Blink;
      const bool predicted = o.predicted == SampleLabel::Blink;
      if (actual && predicted) ++tp;
      else if (actual) ++fn;
      else if (predicted) ++fp;
      else ++tn;
    }
    auto m = compute_metrics(side, tp, fp, fn, tn);
    m.skipped = static_cast<std::size_t>(std::count_if(skipped.begin(), skipped.end(), [&](const SkippedSample& s) {
      return s.eye_side == side;
    }));
    out.push_back(m);
  }
  return out;
}

EvaluationResult evaluate(std::span<const BenchmarkSample> samples, const Checkpoint& model, double threshold,
                          const EvaluateOptions& options) {
  EvaluationResult result;
  for (const auto& sample : samples) {
    std::vector<EyeCrop> crops;
    try {
      for (const auto& frame : sample.frames) crops.push_back(crop_frame(frame, sample.eye_side, options));
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::NoFaceFound:
        case ErrorCode::AdapterFailure:
        case ErrorCode::DegenerateBox:
        case ErrorCode::EmptyIntersection:
        case ErrorCode::MissingFile:
          result.skipped.push_back({sample.sample_id, sample.eye_side, e.what()});
          continue;
        default:
          throw;
      }
    }
    auto scores = model.predict(crops);
    SampleOutcome o{sample, make_scored_sample(sample.sample_id, std::move(scores), sample.label),
                    SampleLabel::NoBlink};
    o.predicted = classify_sample(o.scored.sample_score, threshold);
    result.outcomes.push_back(std::move(o));
  }
  if (!result.skipped.empty()) spdlog::warn("{} benchmark samples skipped (cropping failed)", result.skipped.size());
  result.metrics = metrics_from_outcomes(result.outcomes, result.skipped);
  return result;
}

FrameScoring score_video_frames(const SessionManifest& session, const Checkpoint& model,
                                const LandmarkAdapter& adapter, double pad, StreamKind stream) {
  const auto* desc = session.stream(stream);
  if (desc == nullptr) {
    throw Error(ErrorCode::InvariantViolation, session.session_id + " has no " + std::string(to_string(stream)) + " stream");
  }
  FrameScoring out;
  out.scores.assign(static_cast<std::size_t>(desc->frame_count), 0.0);
  constexpr FrameIndex kBatch = 128;
  for (FrameIndex first = 0; first < desc->frame_count; first += kBatch) {
    const FrameIndex last = std::min(desc->frame_count, first + kBatch);
    std::vector<EyeCrop> crops;
    std::vector<FrameIndex> frames;
    for (FrameIndex f = first; f < last; ++f) {
      try {
        const cv::Mat image = cv::imread(frame_path(*desc, f).string(), cv::IMREAD_COLOR);
        if (image.empty()) throw Error(ErrorCode::MissingFile, frame_path(*desc, f).string());
        const auto landmarks = detect_landmarks(adapter, image);
        const auto [left, right] = eye_boxes_from_landmarks(landmarks, pad, image.size());
        const FrameRef ref{stream, f};
        crops.push_back(crop_and_resize(image, left, ref));
        crops.push_back(crop_and_resize(image, right, ref));
        frames.push_back(f);
      } catch (const Error& e) {
        if (out.failed_frames++ == 0) spdlog::warn("{} frame {}: {}", session.session_id, f, e.what());
      }
    }
    const auto scores = model.predict(crops);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      out.scores[static_cast<std::size_t>(frames[i])] = 0.5 * (scores[2 * i] + scores[2 * i + 1]);
    }
  }
  if (out.failed_frames > 0) {
    spdlog::warn("{}: {} of {} frames could not be scored", session.session_id, out.failed_frames, out.scores.size());
  }
  return out;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

Report render_report(std::span<const EvalMetrics> metrics, std::span<const ReportRow> baselines,
                     const std::string& method) {
  std::vector<ReportRow> rows;
  for (const auto& m : metrics) rows.push_back({method, capitalized(to_string(m.eye_side)), m.recall, m.precision, m.f1});
  rows.insert(rows.end(), baselines.begin(), baselines.end());

  Report report;
  for (const auto& r : rows) {
    const double expected = f1_score(r.precision, r.recall);
    if (std::abs(expected - r.f1) > 1e-4) {
      report.warnings.push_back("f1 of " + r.method + " (" + r.eye + ") is " + fixed4(r.f1) + " but 2PR/(P+R) = " +
                                fixed4(expected));
    }
  }

  const std::vector<std::string> header = {"Method", "Eye", "Recall", "Precision", "F1"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back({r.method, r.eye, fixed4(r.recall), fixed4(r.precision), fixed4(r.f1)});
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string s;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) s += "  ";
      s += row[c];
      if (c + 1 < row.size()) s.append(width[c] - row[c].size(), ' ');
    }
    return s + '\n';
  };
  report.text = line(header);
  for (const auto& row : cells) report.text += line(row);
  for (const auto& m : metrics) {
    report.text += "\n" + capitalized(to_string(m.eye_side)) + ": tp=" + std::to_string(m.tp) +
                   " fp=" + std::to_string(m.fp) + " fn=" + std::to_string(m.fn) + " tn=" + std::to_string(m.tn) +
                   " skipped=" + std::to_string(m.skipped);
  }
  if (!metrics.empty()) report.text += '\n';
  for (const auto& w : report.warnings) report.text += "warning: " + w + '\n';

  nlohmann::json doc;
  doc["rows"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    nlohmann::json row = {{"method", r.method},
                          {"eye", r.eye},
                          {"recall", r.recall},
                          {"precision", r.precision},
                          {"f1", r.f1},
                          {"baseline", i >= metrics.size()}};
    if (i < metrics.size()) {
      const auto& m = metrics[i];
      row["counts"] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}, {"skipped", m.skipped}};
    }
    doc["rows"].push_back(row);
  }
  doc["warnings"] = report.warnings;
  report.json = doc.dump(2) + '\n';
  return report;
}

std::vector<ReportRow> load_baselines(const fs::path& path) {
  const auto table = csv::read(path);
  std::vector<ReportRow> rows;
  if (table.header.empty()) return rows;
  csv::require_header(table, {"method", "eye", "recall", "precision", "f1"}, path.string());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    rows.push_back({r[0], r[1], csv::to_double(r[2], where), csv::to_double(r[3], where), csv::to_double(r[4], where)});
  }
  return rows;
}

}  // namespace blinkkit
