#include "blinkkit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"

namespace blinkkit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(StreamKind kind) {
  switch (kind) {
    case StreamKind::RGB: return "RGB";
    case StreamKind::NIR_LEFT: return "NIR_LEFT";
    case StreamKind::NIR_RIGHT: return "NIR_RIGHT";
  }
  return "RGB";
}

std::string_view directory_name(StreamKind kind) {
  switch (kind) {
    case StreamKind::RGB: return "rgb";
    case StreamKind::NIR_LEFT: return "nir_left";
    case StreamKind::NIR_RIGHT: return "nir_right";
  }
  return "rgb";
}

std::optional<StreamKind> parse_stream_kind(std::string_view text) {
  for (auto kind : {StreamKind::RGB, StreamKind::NIR_LEFT, StreamKind::NIR_RIGHT}) {
    if (text == to_string(kind) || text == directory_name(kind)) return kind;
  }
  return std::nullopt;
}

const StreamDescriptor* SessionManifest::stream(StreamKind kind) const {
  for (const auto& s : streams) {
    if (s.kind == kind) return &s;
  }
  return nullptr;
}

FrameIndex SessionManifest::reference_frame_count() const {
  if (const auto* rgb = stream(StreamKind::RGB)) return rgb->frame_count;
  return streams.empty() ? 0 : streams.front().frame_count;
}

void validate(const SessionManifest& manifest) {
  if (!(manifest.fps > 0.0) || !std::isfinite(manifest.fps)) {
    throw Error(ErrorCode::InvariantViolation, "fps must be > 0");
  }
  if (manifest.resolution.width <= 0 || manifest.resolution.height <= 0) {
    throw Error(ErrorCode::InvariantViolation, "resolution must be positive");
  }
  bool seen[3] = {false, false, false};
  for (const auto& s : manifest.streams) {
    auto& flag = seen[static_cast<int>(s.kind)];
    if (flag) {
      throw Error(ErrorCode::InvariantViolation,
                  "duplicate stream kind " + std::string(to_string(s.kind)));
    }
    flag = true;
    if (s.frame_count < 0) {
      throw Error(ErrorCode::InvariantViolation, "negative frame_count for stream " +
                                                     std::string(to_string(s.kind)));
    }
  }
}

namespace {

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw Error(ErrorCode::MalformedManifest, std::string("missing field '") + key + "'");
  }
  return doc.at(key);
}

template <typename T>
T field_as(const json& value, const char* key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedManifest, std::string("field '") + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

// Paths under the manifest directory are stored relative to it.
fs::path relativize(const fs::path& base, const fs::path& p) {
  const auto abs_base = fs::absolute(base.empty() ? fs::path(".") : base).lexically_normal();
  const auto abs_p = fs::absolute(p).lexically_normal();
  auto rel = abs_p.lexically_relative(abs_base);
  if (rel.empty() || *rel.begin() == "..") return p.is_relative() ? abs_p : p;
  return rel;
}

}  // namespace

SessionManifest load_session(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingFile, manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedManifest, manifest_path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedManifest, "manifest must be a JSON object");

  const auto base = manifest_path.parent_path();
  SessionManifest m;
  m.session_id = field_as<std::string>(require(doc, "session_id"), "session_id");
  m.subject_id = field_as<std::string>(require(doc, "subject_id"), "subject_id");
  m.wears_glasses = doc.contains("wears_glasses")
                        ? field_as<bool>(doc.at("wears_glasses"), "wears_glasses")
                        : false;
  m.eeg_path = resolve(base, field_as<std::string>(require(doc, "eeg_path"), "eeg_path"));
  if (doc.contains("fps")) m.fps = field_as<double>(doc.at("fps"), "fps");
  if (doc.contains("resolution")) {
    const auto res = field_as<std::vector<int>>(doc.at("resolution"), "resolution");
    if (res.size() != 2) throw Error(ErrorCode::MalformedManifest, "field 'resolution' must be [w, h]");
    m.resolution = {res[0], res[1]};
  }
  const auto& streams = require(doc, "streams");
  if (!streams.is_array()) throw Error(ErrorCode::MalformedManifest, "field 'streams' must be an array");
  for (const auto& s : streams) {
    StreamDescriptor d;
    const auto kind_text = field_as<std::string>(require(s, "kind"), "streams.kind");
    const auto kind = parse_stream_kind(kind_text);
    if (!kind) {
      throw Error(ErrorCode::InvariantViolation, "unknown stream kind '" + kind_text + "'");
    }
    d.kind = *kind;
    d.path = resolve(base, field_as<std::string>(require(s, "path"), "streams.path"));
    d.frame_count = field_as<FrameIndex>(require(s, "frame_count"), "streams.frame_count");
    m.streams.push_back(std::move(d));
  }
  validate(m);
  return m;
}

void save_session(const SessionManifest& manifest, const fs::path& manifest_path) {
  const auto base = manifest_path.parent_path();
  json streams = json::array();
  for (const auto& s : manifest.streams) {
    streams.push_back({{"kind", to_string(s.kind)},
                       {"path", relativize(base, s.path).generic_string()},
                       {"frame_count", s.frame_count}});
  }
  if (!base.empty()) fs::create_directories(base);
  json doc = {{"session_id", manifest.session_id},
              {"subject_id", manifest.subject_id},
              {"wears_glasses", manifest.wears_glasses},
              {"fps", manifest.fps},
              {"resolution", {manifest.resolution.width, manifest.resolution.height}},
              {"eeg_path", relativize(base, manifest.eeg_path).generic_string()},
              {"streams", streams}};
  std::ofstream out(manifest_path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + manifest_path.string());
  out << doc.dump(2) << '\n';
}

std::vector<EEGSample> load_eeg(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
  const auto table = csv::read(path);
  std::vector<EEGSample> samples;
  if (table.header.empty()) return samples;
  csv::require_header(table,
                      {"t", "alpha", "beta", "gamma", "delta", "theta", "blink_strength", "attention"},
                      path.string());
  samples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    EEGSample s;
    s.t = csv::to_double(r[0], where);
    s.alpha = csv::to_double(r[1], where);
    s.beta = csv::to_double(r[2], where);
    s.gamma = csv::to_double(r[3], where);
    s.delta = csv::to_double(r[4], where);
    s.theta = csv::to_double(r[5], where);
    s.blink_strength = csv::to_double(r[6], where);
    s.attention = csv::to_double(r[7], where);
    if (s.t < 0.0) throw Error(ErrorCode::NegativeTime, where + ": t < 0");
    if (!samples.empty() && !(s.t > samples.back().t)) {
      throw Error(ErrorCode::NonMonotonicTimestamps, where + ": t does not increase");
    }
    for (double band : {s.alpha, s.beta, s.gamma, s.delta, s.theta}) {
      if (band < 0.0) throw Error(ErrorCode::NegativeBandPower, where);
    }
    if (s.blink_strength < 0.0) {
      throw Error(ErrorCode::InvariantViolation, where + ": negative blink_strength");
    }
    if (s.attention < 0.0 || s.attention > 100.0) {
      spdlog::warn("{}: attention {} clipped to [0, 100]", where, s.attention);
      s.attention = std::clamp(s.attention, 0.0, 100.0);
    }
    samples.push_back(s);
  }
  return samples;
}

void save_eeg(std::span<const EEGSample> samples, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "t,alpha,beta,gamma,delta,theta,blink_strength,attention\n";
  for (const auto& s : samples) {
    out << csv::join({csv::format_double(s.t), csv::format_double(s.alpha),
                      csv::format_double(s.beta), csv::format_double(s.gamma),
                      csv::format_double(s.delta), csv::format_double(s.theta),
                      csv::format_double(s.blink_strength), csv::format_double(s.attention)})
        << '\n';
  }
}

FrameIndex time_to_frame(double t, double fps) {
  if (t < 0.0) throw Error(ErrorCode::NegativeTime, "t = " + std::to_string(t));
  if (!(fps > 0.0)) throw Error(ErrorCode::InvariantViolation, "fps must be > 0");
  return static_cast<FrameIndex>(std::llround(t * fps));
}

double frame_to_time(FrameIndex frame_index, double fps) {
  if (frame_index < 0) throw Error(ErrorCode::InvariantViolation, "negative frame index");
  if (!(fps > 0.0)) throw Error(ErrorCode::InvariantViolation, "fps must be > 0");
  return static_cast<double>(frame_index) / fps;
}

void validate(const FrameRef& ref, const SessionManifest& manifest) {
  const auto* stream = manifest.stream(ref.stream_kind);
  if (!stream) {
    throw Error(ErrorCode::InvariantViolation,
                "session has no " + std::string(to_string(ref.stream_kind)) + " stream");
  }
  if (ref.frame_index < 0 || ref.frame_index >= stream->frame_count) {
    throw Error(ErrorCode::InvariantViolation,
                "frame " + std::to_string(ref.frame_index) + " outside stream of " +
                    std::to_string(stream->frame_count) + " frames");
  }
}

fs::path frame_path(const StreamDescriptor& stream, FrameIndex frame_index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(frame_index));
  return stream.path / name;
}

}  // namespace blinkkit
