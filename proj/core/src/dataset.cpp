#include <algorithm>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "blinkkit/candidates.hpp"
#include "blinkkit/error.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/random.hpp"

namespace blinkkit {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t images_per_sample(std::size_t stream_count) {
  return static_cast<std::size_t>(kSampleFrames) * 2 * stream_count;
}

namespace {

FrameIndex usable_frames(const SessionManifest& m) {
  if (m.streams.empty()) return 0;
  FrameIndex n = m.streams.front().frame_count;
  for (const auto& s : m.streams) n = std::min(n, s.frame_count);
  return n;
}

// Splits `total` over sessions proportionally to capacity (largest remainder), never
// exceeding any session's capacity.
std::vector<std::size_t> allocate(std::size_t total, const std::vector<std::size_t>& capacity) {
  std::vector<std::size_t> out(capacity.size(), 0);
  std::size_t cap_sum = 0;
  for (auto c : capacity) cap_sum += c;
  if (cap_sum == 0) return out;
  total = std::min(total, cap_sum);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < capacity.size(); ++i) {
    const double exact = static_cast<double>(total) * capacity[i] / static_cast<double>(cap_sum);
    out[i] = std::min(capacity[i], static_cast<std::size_t>(exact));
    assigned += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  while (assigned < total) {
    bool progressed = false;
    for (const auto& [rem, i] : remainders) {
      if (assigned == total) break;
      if (out[i] < capacity[i]) {
        ++out[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return out;
}

json box_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

// Writes one sample; throws on any per-frame failure.
void write_sample(const LabeledSample& sample, const SessionManifest& session, const fs::path& dir,
                  const DatasetOptions& options) {
  json boxes = json::object();
  for (auto kind : sample.streams) {
    const auto* stream = session.stream(kind);
    const auto stream_dir = dir / std::string(directory_name(kind));
    fs::create_directories(stream_dir);
    json per_frame = json::array();
    for (FrameIndex offset = 0; offset < kSampleFrames; ++offset) {
      const FrameIndex frame = sample.frame_range.first + offset;
      const auto src = frame_path(*stream, frame);
      cv::Mat image = cv::imread(src.string(), cv::IMREAD_COLOR);
      if (image.empty()) throw Error(ErrorCode::MissingFile, src.string());
      const auto landmarks = detect_landmarks(*options.adapter, image);
      const auto [left, right] = eye_boxes_from_landmarks(landmarks, options.pad, image.size());
      const FrameRef ref{kind, frame};
      const auto left_crop = crop_and_resize(image, left, ref);
      const auto right_crop = crop_and_resize(image, right, ref);
      char name[32];
      std::snprintf(name, sizeof(name), "%02d.png", static_cast<int>(offset));
      fs::copy_file(src, stream_dir / (std::string("face_") + name), fs::copy_options::overwrite_existing);
      if (!cv::imwrite((stream_dir / (std::string("left_eye_") + name)).string(), to_bgr8(left_crop)) ||
          !cv::imwrite((stream_dir / (std::string("right_eye_") + name)).string(), to_bgr8(right_crop))) {
        throw Error(ErrorCode::IoError, "cannot write crops under " + stream_dir.string());
      }
      per_frame.push_back({{"frame", frame},
                           {"left", box_json(left.bbox)},
                           {"right", box_json(right.bbox)},
                           {"landmark_confidence", landmarks.confidence}});
    }
    boxes[std::string(directory_name(kind))] = per_frame;
  }
  json streams = json::array();
  for (auto kind : sample.streams) streams.push_back(to_string(kind));
  json doc = {{"sample_id", sample.sample_id},
              {"label", to_string(sample.label)},
              {"session_id", sample.session_id},
              {"frame_range", {sample.frame_range.first, sample.frame_range.last}},
              {"streams", streams},
              {"pad", options.pad},
              {"landmark_convention", "68-point; left = image-left (indices 36-41), right = 42-47"},
              {"eye_boxes", boxes}};
  if (!sample.candidate_id.empty()) {
    doc["candidate_id"] = sample.candidate_id;
    doc["center_frame"] = sample.frame_range.first + kSampleHalfWidth;
  }
  std::FILE* f = std::fopen((dir / "sample.json").c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot write sample.json in " + dir.string());
  const auto text = doc.dump(2) + "\n";
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

}  // namespace

DatasetSummary build_dataset(std::span<const SessionManifest> sessions,
                             std::span<const BlinkCandidate> candidates,
                             std::span<const DecisionRecord> decisions, const fs::path& output_dir,
                             const DatasetOptions& options) {
  if (!options.dry_run && options.adapter == nullptr) {
    throw Error(ErrorCode::ConfigViolation, "build_dataset needs a landmark adapter unless dry_run");
  }
  std::map<std::string, std::size_t> session_index;
  for (std::size_t i = 0; i < sessions.size(); ++i) session_index.emplace(sessions[i].session_id, i);

  const auto outcome = apply_decisions(candidates, decisions);
  for (const auto& id : outcome.unknown_ids) spdlog::warn("decision for unknown candidate {}", id);

  DatasetSummary summary;
  std::vector<std::vector<LabeledSample>> blinks(sessions.size());
  std::vector<std::vector<FrameRange>> blocked(sessions.size());

  for (const auto& c : outcome.candidates) {
    if (c.status == CandidateStatus::Rejected) continue;
    const auto it = session_index.find(c.session_id);
    if (it == session_index.end()) {
      if (c.status == CandidateStatus::Accepted) {
        summary.dropped.push_back({c.candidate_id, "unknown session " + c.session_id});
      }
      continue;
    }
    const auto& session = sessions[it->second];
    blocked[it->second].push_back({c.center_frame - kSampleHalfWidth, c.center_frame + kSampleHalfWidth});
    if (c.status != CandidateStatus::Accepted) continue;
    try {
      LabeledSample s;
      s.sample_id = c.candidate_id;
      s.label = SampleLabel::Blink;
      s.session_id = c.session_id;
      s.frame_range = extract_window(c.center_frame, usable_frames(session));
      for (const auto& stream : session.streams) s.streams.push_back(stream.kind);
      s.candidate_id = c.candidate_id;
      blinks[it->second].push_back(std::move(s));
    } catch (const Error& e) {
      spdlog::info("dropping candidate {}: {}", c.candidate_id, e.what());
      summary.dropped.push_back({c.candidate_id, e.what()});
    }
  }

  std::size_t blink_total = 0;
  std::vector<std::size_t> capacity(sessions.size(), 0), wanted(sessions.size(), 0);
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    blink_total += blinks[i].size();
    capacity[i] = negative_capacity(usable_frames(sessions[i]), blocked[i], options.margin_frames);
    wanted[i] = blinks[i].size();
  }
  std::vector<std::size_t> counts;
  if (options.per_session_balance) {
    counts.resize(sessions.size());
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      counts[i] = std::min(wanted[i], capacity[i]);
      if (counts[i] < wanted[i]) {
        spdlog::warn("session {}: only {} of {} no-blink windows available", sessions[i].session_id,
                     capacity[i], wanted[i]);
      }
    }
  } else {
    counts = allocate(blink_total, capacity);
  }

  std::vector<LabeledSample> planned;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    for (auto& s : blinks[i]) planned.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (counts[i] == 0) continue;
    NegativeSamplingRequest req;
    req.session_id = sessions[i].session_id;
    req.frame_count = usable_frames(sessions[i]);
    for (const auto& stream : sessions[i].streams) req.streams.push_back(stream.kind);
    req.blink_windows = blocked[i];
    req.count = counts[i];
    req.margin_frames = options.margin_frames;
    req.seed = rnd::mix(options.seed, i);
    for (auto& s : sample_negatives(req)) planned.push_back(std::move(s));
  }

  for (auto& s : planned) {
    if (!options.dry_run) {
      const auto& session = sessions[session_index.at(s.session_id)];
      const auto dir = output_dir / std::string(to_string(s.label)) / s.sample_id;
      try {
        write_sample(s, session, dir, options);
      } catch (const Error& e) {
        spdlog::warn("dropping sample {}: {}", s.sample_id, e.what());
        summary.dropped.push_back({s.sample_id, e.what()});
        std::error_code ec;
        fs::remove_all(dir, ec);
        continue;
      }
    }
    (s.label == SampleLabel::Blink ? summary.blink_count : summary.no_blink_count) += 1;
    summary.image_count += images_per_sample(s.streams.size());
    summary.samples.push_back(std::move(s));
  }

  if (!options.dry_run) {
    fs::create_directories(output_dir);
    json doc = {{"blink_count", summary.blink_count},
                {"no_blink_count", summary.no_blink_count},
                {"image_count", summary.image_count},
                {"dropped", json::array()}};
    for (const auto& d : summary.dropped) doc["dropped"].push_back({{"id", d.id}, {"reason", d.reason}});
    std::FILE* f = std::fopen((output_dir / "summary.json").c_str(), "wb");
    if (f) {
      const auto text = doc.dump(2) + "\n";
      std::fwrite(text.data(), 1, text.size(), f);
      std::fclose(f);
    }
  }
  return summary;
}

}  // namespace blinkkit
