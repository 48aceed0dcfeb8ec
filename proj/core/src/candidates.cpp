#include "blinkkit/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <unistd.h>

#include <spdlog/spdlog.h>

#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"
#include "blinkkit/random.hpp"

namespace blinkkit {

std::string_view to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::Pending: return "pending";
    case CandidateStatus::Accepted: return "accepted";
    case CandidateStatus::Rejected: return "rejected";
  }
  return "pending";
}

std::string_view to_string(Decision decision) {
  return decision == Decision::Accept ? "accept" : "reject";
}

std::string_view to_string(SampleLabel label) {
  return label == SampleLabel::Blink ? "blink" : "no_blink";
}

std::optional<CandidateStatus> parse_candidate_status(std::string_view text) {
  if (text == "pending") return CandidateStatus::Pending;
  if (text == "accepted") return CandidateStatus::Accepted;
  if (text == "rejected") return CandidateStatus::Rejected;
  return std::nullopt;
}

std::optional<Decision> parse_decision(std::string_view text) {
  if (text == "accept") return Decision::Accept;
  if (text == "reject") return Decision::Reject;
  return std::nullopt;
}

std::optional<SampleLabel> parse_sample_label(std::string_view text) {
  if (text == "blink") return SampleLabel::Blink;
  if (text == "no_blink") return SampleLabel::NoBlink;
  return std::nullopt;
}

std::vector<BlinkCandidate> extract_candidates(std::span<const EEGSample> eeg,
                                               const CandidateOptions& options) {
  if (eeg.empty()) throw Error(ErrorCode::EmptyTrace, "no EEG samples");
  if (!(options.min_strength_quantile > 0.0 && options.min_strength_quantile < 1.0)) {
    throw Error(ErrorCode::InvariantViolation, "min_strength_quantile must lie in (0, 1)");
  }

  std::vector<double> positive;
  for (const auto& s : eeg) {
    if (s.blink_strength > 0.0) positive.push_back(s.blink_strength);
  }
  if (positive.empty()) return {};
  std::sort(positive.begin(), positive.end());
  const auto rank = static_cast<std::size_t>(
      std::floor(options.min_strength_quantile * static_cast<double>(positive.size() - 1)));
  const double threshold = positive[rank];

  std::vector<BlinkCandidate> raw;
  for (std::size_t i = 0; i < eeg.size(); ++i) {
    const double v = eeg[i].blink_strength;
    if (!(v > 0.0) || v < threshold) continue;
    if (i > 0 && !(v > eeg[i - 1].blink_strength)) continue;
    if (i + 1 < eeg.size() && v < eeg[i + 1].blink_strength) continue;
    BlinkCandidate c;
    c.session_id = options.session_id;
    c.t_eeg = eeg[i].t;
    c.center_frame = time_to_frame(eeg[i].t, options.fps);
    c.strength = v;
    raw.push_back(std::move(c));
  }

  std::vector<BlinkCandidate> merged;
  for (auto& c : raw) {
    if (!merged.empty() && c.center_frame - merged.back().center_frame < options.merge_frames) {
      if (c.strength > merged.back().strength) merged.back() = std::move(c);
      continue;
    }
    merged.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < merged.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "_c%05zu", i + 1);
    merged[i].candidate_id = options.session_id + id;
  }
  return merged;
}

FrameRange extract_window(FrameIndex center_frame, FrameIndex frame_count) {
  if (center_frame < kSampleHalfWidth || center_frame + kSampleHalfWidth >= frame_count) {
    throw Error(ErrorCode::WindowOutOfBounds,
                "center " + std::to_string(center_frame) + " needs 10 frames either side within " +
                    std::to_string(frame_count) + " frames");
  }
  return {center_frame - kSampleHalfWidth, center_frame + kSampleHalfWidth};
}

DecisionOutcome apply_decisions(std::span<const BlinkCandidate> candidates,
                                std::span<const DecisionRecord> decisions) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < candidates.size(); ++i) index.emplace(candidates[i].candidate_id, i);

  std::map<std::string, const DecisionRecord*> latest;
  DecisionOutcome out;
  for (const auto& d : decisions) {
    if (!index.contains(d.candidate_id)) {
      if (std::find(out.unknown_ids.begin(), out.unknown_ids.end(), d.candidate_id) ==
          out.unknown_ids.end()) {
        out.unknown_ids.push_back(d.candidate_id);
      }
      continue;
    }
    auto& slot = latest[d.candidate_id];
    if (slot == nullptr || d.decided_at >= slot->decided_at) slot = &d;
  }

  out.candidates.assign(candidates.begin(), candidates.end());
  for (auto& c : out.candidates) {
    c.status = CandidateStatus::Pending;
    if (auto it = latest.find(c.candidate_id); it != latest.end()) {
      c.status = it->second->decision == Decision::Accept ? CandidateStatus::Accepted
                                                          : CandidateStatus::Rejected;
    }
  }
  return out;
}

namespace {

struct Segment {
  FrameIndex start = 0;
  FrameIndex length = 0;
};

std::vector<Segment> free_segments(FrameIndex frame_count, std::span<const FrameRange> blink_windows,
                                   FrameIndex margin_frames) {
  std::vector<FrameRange> blocked;
  for (const auto& w : blink_windows) {
    const FrameIndex lo = std::max<FrameIndex>(0, w.first - margin_frames);
    const FrameIndex hi = std::min<FrameIndex>(frame_count - 1, w.last + margin_frames);
    if (lo <= hi) blocked.push_back({lo, hi});
  }
  std::sort(blocked.begin(), blocked.end(),
            [](const FrameRange& a, const FrameRange& b) { return a.first < b.first; });
  std::vector<Segment> segments;
  FrameIndex cursor = 0;
  for (const auto& b : blocked) {
    if (b.first > cursor) segments.push_back({cursor, b.first - cursor});
    cursor = std::max(cursor, b.last + 1);
  }
  if (cursor < frame_count) segments.push_back({cursor, frame_count - cursor});
  return segments;
}

}  // namespace

std::size_t negative_capacity(FrameIndex frame_count, std::span<const FrameRange> blink_windows,
                              FrameIndex margin_frames) {
  std::size_t total = 0;
  for (const auto& s : free_segments(frame_count, blink_windows, margin_frames)) {
    total += static_cast<std::size_t>(s.length / kSampleFrames);
  }
  return total;
}

std::vector<LabeledSample> sample_negatives(const NegativeSamplingRequest& request) {
  if (request.margin_frames < 0) throw Error(ErrorCode::InvariantViolation, "margin_frames < 0");
  const auto segments = free_segments(request.frame_count, request.blink_windows, request.margin_frames);

  std::vector<std::size_t> slot_segment;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto cap = static_cast<std::size_t>(segments[i].length / kSampleFrames);
    slot_segment.insert(slot_segment.end(), cap, i);
  }
  if (request.count > slot_segment.size()) {
    throw Error(ErrorCode::InsufficientNegativeFootage,
                "session " + request.session_id + ": requested " + std::to_string(request.count) +
                    " no-blink windows, at most " + std::to_string(slot_segment.size()) +
                    " achievable");
  }

  rnd::Engine rng(request.seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform draw.
  for (std::size_t i = 0; i < request.count; ++i) {
    const auto j = i + rnd::index(rng, slot_segment.size() - i);
    std::swap(slot_segment[i], slot_segment[j]);
  }
  std::vector<std::size_t> per_segment(segments.size(), 0);
  for (std::size_t i = 0; i < request.count; ++i) ++per_segment[slot_segment[i]];

  std::vector<FrameIndex> starts;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto k = static_cast<FrameIndex>(per_segment[s]);
    if (k == 0) continue;
    const FrameIndex slack = segments[s].length - kSampleFrames * k;
    std::vector<FrameIndex> gaps(k);
    for (auto& g : gaps) g = rnd::integer(rng, 0, slack);
    std::sort(gaps.begin(), gaps.end());
    for (FrameIndex j = 0; j < k; ++j) starts.push_back(segments[s].start + kSampleFrames * j + gaps[j]);
  }
  std::sort(starts.begin(), starts.end());

  std::vector<LabeledSample> out;
  out.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_n%05zu", i + 1);
    LabeledSample s;
    s.sample_id = request.session_id + suffix;
    s.label = SampleLabel::NoBlink;
    s.session_id = request.session_id;
    s.frame_range = {starts[i], starts[i] + kSampleFrames - 1};
    s.streams = request.streams;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LabeledSample> sample_negatives(std::span<const LabeledSample> accepted,
                                            const SessionManifest& session, std::size_t count,
                                            FrameIndex margin_frames, std::uint64_t seed) {
  NegativeSamplingRequest req;
  req.session_id = session.session_id;
  req.frame_count = session.reference_frame_count();
  for (const auto& s : session.streams) req.streams.push_back(s.kind);
  for (const auto& a : accepted) {
    if (a.session_id == session.session_id) req.blink_windows.push_back(a.frame_range);
  }
  req.count = count;
  req.margin_frames = margin_frames;
  req.seed = seed;
  return sample_negatives(req);
}

std::vector<BlinkCandidate> load_candidates(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  std::vector<BlinkCandidate> out;
  if (table.header.empty()) return out;
  csv::require_header(table, {"candidate_id", "session_id", "t_eeg", "center_frame", "strength", "status"},
                      path.string());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    BlinkCandidate c;
    c.candidate_id = r[0];
    c.session_id = r[1];
    c.t_eeg = csv::to_double(r[2], where);
    c.center_frame = csv::to_int(r[3], where);
    c.strength = csv::to_double(r[4], where);
    const auto status = parse_candidate_status(r[5]);
    if (!status) throw Error(ErrorCode::MalformedCsv, where + ": bad status '" + r[5] + "'");
    c.status = *status;
    out.push_back(std::move(c));
  }
  return out;
}

void save_candidates(std::span<const BlinkCandidate> candidates, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  std::string text = "candidate_id,session_id,t_eeg,center_frame,strength,status\n";
  for (const auto& c : candidates) {
    text += csv::join({c.candidate_id, c.session_id, csv::format_double(c.t_eeg),
                       std::to_string(c.center_frame), csv::format_double(c.strength),
                       std::string(to_string(c.status))});
    text += '\n';
  }
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

std::vector<DecisionRecord> load_decisions(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  std::vector<DecisionRecord> out;
  if (table.header.empty()) return out;
  csv::require_header(table, {"candidate_id", "decision", "reviewer", "decided_at"}, path.string());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    DecisionRecord d;
    d.candidate_id = r[0];
    const auto decision = parse_decision(r[1]);
    if (!decision) throw Error(ErrorCode::MalformedCsv, where + ": bad decision '" + r[1] + "'");
    d.decision = *decision;
    d.reviewer = r[2];
    d.decided_at = parse_iso8601(r[3]);
    out.push_back(std::move(d));
  }
  return out;
}

std::string decision_csv_header() { return "candidate_id,decision,reviewer,decided_at\n"; }

std::string decision_csv_row(const DecisionRecord& record) {
  for (const auto* field : {&record.candidate_id, &record.reviewer}) {
    if (field->find_first_of(",\r\n") != std::string::npos) {
      throw Error(ErrorCode::InvariantViolation, "decision fields may not contain ',' or newlines");
    }
  }
  return csv::join({record.candidate_id, std::string(to_string(record.decision)), record.reviewer,
                    format_iso8601(record.decided_at)}) +
         "\n";
}

void append_decision(const DecisionRecord& record, const std::filesystem::path& path) {
  const std::string row = decision_csv_row(record);
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  std::string text = fresh ? decision_csv_header() + row : row;
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace blinkkit
