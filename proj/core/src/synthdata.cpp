#include "blinkkit/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "blinkkit/csv.hpp"
#include "blinkkit/error.hpp"
#include "blinkkit/evaluation.hpp"
#include "blinkkit/random.hpp"

namespace fs = std::filesystem;

namespace blinkkit {

std::string_view to_string(EyeState state) { return state == EyeState::Open ? "open" : "closed"; }

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Landmarks of a template face scaled so that `side`'s eye has half-width `b`
// and is centred at `center`.
LandmarkSet landmarks_for_eye(EyeSide side, cv::Point2d center, double b) {
  const double fw = b / 0.09;
  const double fh = kFaceAspect * fw;
  const double tx = side == EyeSide::Left ? 0.32 : 0.68;
  const cv::Point2d origin(center.x - tx * fw, center.y - 0.42 * fh);
  LandmarkSet lm;
  const auto& shape = face_template();
  for (int i = 0; i < kLandmarkCount; ++i) lm.points[i] = {origin.x + shape[i].x * fw, origin.y + shape[i].y * fh};
  return lm;
}

void add_noise(EyeCrop& crop, double sigma, rnd::Engine& rng) {
  if (sigma <= 0.0) return;
  auto& px = crop.pixels;
  const auto put = [&](std::size_t i, double n) { px[i] = std::clamp(static_cast<float>(px[i] + sigma * n), 0.0f, 1.0f); };
  std::size_t i = 0;
  for (; i + 1 < px.size(); i += 2) {
    const auto [a, b] = rnd::normal_pair(rng);
    put(i, a);
    put(i + 1, b);
  }
  if (i < px.size()) put(i, rnd::normal(rng));
}

}  // namespace

RenderedEye render_eye(const SyntheticEyeSpec& spec) {
  rnd::Engine rng(spec.seed);
  EyeDrawParams params;
  params.appearance = spec.appearance ? *spec.appearance : EyeAppearance::from_seed(spec.seed);
  params.openness = spec.openness ? *spec.openness
                    : spec.state == EyeState::Open ? rnd::uniform(rng, kOpenOpennessMin + 0.1, 1.0)
                                                   : rnd::uniform(rng, 0.0, kClosedOpennessMax - 0.02);
  params.iris_x = spec.iris_x;
  params.iris_y = spec.iris_y;
  params.illumination = spec.illumination;
  params.side = spec.side;

  // 12.5 matches an eye on a 140-pixel-wide face; the padded box spans the canvas.
  if (!(spec.half_width >= 4.0 && spec.half_width <= 64.0))
    throw Error(ErrorCode::InvariantViolation, "eye half width out of range");
  const double b = spec.half_width;
  const int side = static_cast<int>(std::ceil(4.0 * b));
  const cv::Point2d center(side / 2.0, side / 2.0);
  const auto skin = params.appearance.skin * params.illumination;
  cv::Mat canvas(side, side, CV_8UC3, cv::Scalar(skin[0], skin[1], skin[2]));
  draw_eye(canvas, center, b, params);

  const auto boxes = eye_boxes_from_landmarks(landmarks_for_eye(spec.side, center, b), 0.5, std::nullopt);
  RenderedEye out;
  out.crop = crop_and_resize(canvas, spec.side == EyeSide::Left ? boxes.first : boxes.second);
  add_noise(out.crop, spec.noise_level, rng);
  out.state = spec.state;
  return out;
}

double attention_at(std::span<const AttentionSegment> profile, double t) {
  if (profile.empty()) return 50.0;
  double value = profile.front().value;
  for (const auto& s : profile) {
    if (s.start <= t) value = s.value;
    else break;
  }
  return value;
}

double blink_intensity(std::span<const AttentionSegment> profile, double coupling, double t) {
  const double z = std::clamp((attention_at(profile, t) - 50.0) / 25.0, -1.0, 1.0);
  return std::max(0.05, 1.0 + coupling * z);
}

namespace {

std::vector<AttentionSegment> make_profile(double duration, rnd::Engine& rng) {
  std::vector<AttentionSegment> profile;
  for (double t = 0.0; t < duration;) {
    profile.push_back({t, std::round(rnd::uniform(rng, 20.0, 90.0))});
    t += rnd::uniform(rng, 20.0, 60.0);
  }
  return profile;
}

// Integrate-and-fire placement: blink k fires where the cumulative intensity
// reaches (k + 0.5 + jitter) / n of its total over [lo, hi].
std::vector<double> place_blinks(const SyntheticSessionSpec& spec, std::size_t n, rnd::Engine& rng) {
  if (n == 0) return {};
  const double lo = 1.0, hi = spec.duration - 1.0;
  if (hi <= lo) return {};
  constexpr double dt = 0.01;
  std::vector<double> grid{lo}, cum{0.0};
  for (double t = lo; t < hi;) {
    const double step = std::min(dt, hi - t);
    cum.push_back(cum.back() + step * blink_intensity(spec.attention_profile, spec.coupling, t + 0.5 * step));
    t += step;
    grid.push_back(t);
  }
  const double total = cum.back();
  std::vector<double> times;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = (static_cast<double>(k) + 0.5 + rnd::uniform(rng, -0.25, 0.25)) * total / n;
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    const auto i = static_cast<std::size_t>(std::clamp<long>(it - cum.begin(), 1, static_cast<long>(cum.size()) - 1));
    const double f = (target - cum[i - 1]) / std::max(1e-12, cum[i] - cum[i - 1]);
    times.push_back(grid[i - 1] + std::clamp(f, 0.0, 1.0) * (grid[i] - grid[i - 1]));
  }
  std::vector<double> kept;
  for (double t : times) {
    if (!kept.empty() && t - kept.back() < kMinBlinkSeparation) t = kept.back() + kMinBlinkSeparation;
    if (t > hi) continue;
    kept.push_back(t);
  }
  if (kept.size() < n) {
    spdlog::warn("synthetic session {}: {} of {} blinks fit with {} s separation", spec.session_id, kept.size(), n,
                 kMinBlinkSeparation);
  }
  return kept;
}

// Small deterministic per-frame variation in [-1, 1].
double wobble(std::uint64_t seed, FrameIndex frame, std::uint64_t salt) {
  return 2.0 * (static_cast<double>(rnd::mix(seed, static_cast<std::uint64_t>(frame) * 8 + salt) >> 11) * 0x1.0p-53) -
         1.0;
}

}  // namespace

SyntheticSession gen_session(const SyntheticSessionSpec& input) {
  if (!(input.duration > 0.0) || !(input.fps > 0.0)) {
    throw Error(ErrorCode::InvariantViolation, "duration and fps must be positive");
  }
  if (!(std::abs(input.coupling) <= 1.0)) throw Error(ErrorCode::InvariantViolation, "coupling must lie in [-1, 1]");
  SyntheticSession s;
  s.spec = input;
  auto& spec = s.spec;
  s.frame_count = static_cast<FrameIndex>(std::llround(spec.duration * spec.fps));
  if (s.frame_count < kMaxBlinkFrames) throw Error(ErrorCode::InvariantViolation, "session too short");

  if (spec.attention_profile.empty()) {
    rnd::Engine rng(rnd::mix(spec.seed, 1));
    spec.attention_profile = make_profile(spec.duration, rng);
  }
  if (spec.blink_times.empty()) {
    rnd::Engine rng(rnd::mix(spec.seed, 2));
    const auto n = spec.blink_count ? *spec.blink_count
                                    : static_cast<std::size_t>(std::llround(spec.base_rate_bpm * spec.duration / 60.0));
    spec.blink_times = place_blinks(spec, n, rng);
  } else {
    std::sort(spec.blink_times.begin(), spec.blink_times.end());
    for (double t : spec.blink_times) {
      if (!(t >= 0.0 && t < spec.duration)) {
        throw Error(ErrorCode::InvariantViolation, "blink time " + csv::format_double(t) + " outside the session");
      }
    }
    for (std::size_t i = 1; i < spec.blink_times.size(); ++i) {
      const auto a = time_to_frame(spec.blink_times[i - 1], spec.fps);
      const auto b = time_to_frame(spec.blink_times[i], spec.fps);
      if (b - a < kMaxBlinkFrames) {
        throw Error(ErrorCode::OverlappingBlinks, "blinks at " + csv::format_double(spec.blink_times[i - 1]) +
                                                      " s and " + csv::format_double(spec.blink_times[i]) +
                                                      " s collide on the frame grid");
      }
    }
  }

  rnd::Engine dur_rng(rnd::mix(spec.seed, 3));
  for (std::size_t i = 0; i < spec.blink_times.size(); ++i) {
    const auto d = static_cast<FrameIndex>(rnd::integer(dur_rng, 3, kMaxBlinkFrames));
    const FrameIndex c = time_to_frame(spec.blink_times[i], spec.fps);
    FrameIndex start = std::max<FrameIndex>(0, c - (d - 1) / 2);
    start = std::min(start, s.frame_count - d);
    char id[32];
    std::snprintf(id, sizeof id, "e%05zu", i);
    s.events.push_back({id, start, start + d - 1});
  }

  rnd::Engine eeg_rng(rnd::mix(spec.seed, 4));
  const auto n = static_cast<std::size_t>(std::ceil(spec.duration));
  s.eeg.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& e = s.eeg[k];
    e.t = static_cast<double>(k);
    const double att = attention_at(spec.attention_profile, e.t) + 3.0 * rnd::normal(eeg_rng);
    e.attention = std::clamp(std::round(att), 0.0, 100.0);
    e.alpha = std::round(2.0e4 * std::exp(0.5 * rnd::normal(eeg_rng)));
    e.beta = std::round(1.5e4 * std::exp(0.5 * rnd::normal(eeg_rng)));
    e.gamma = std::round(5.0e3 * std::exp(0.5 * rnd::normal(eeg_rng)));
    e.delta = std::round(8.0e4 * std::exp(0.5 * rnd::normal(eeg_rng)));
    e.theta = std::round(3.0e4 * std::exp(0.5 * rnd::normal(eeg_rng)));
  }
  rnd::Engine pulse_rng(rnd::mix(spec.seed, 5));
  for (double t : spec.blink_times) {
    const auto k = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::llround(t)));
    s.eeg[k].blink_strength = std::max(s.eeg[k].blink_strength, std::round(rnd::uniform(pulse_rng, 40.0, 100.0)));
  }
  // The headset integrates over about a second, so a blink also shows faintly in
  // the neighbouring readings.
  std::vector<double> shoulder(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double peak = s.eeg[k].blink_strength;
    if (peak <= 0.0) continue;
    if (k > 0) shoulder[k - 1] = std::max(shoulder[k - 1], std::round(0.15 * peak));
    if (k + 1 < n) shoulder[k + 1] = std::max(shoulder[k + 1], std::round(0.15 * peak));
  }
  for (std::size_t k = 0; k < n; ++k) s.eeg[k].blink_strength = std::max(s.eeg[k].blink_strength, shoulder[k]);
  if (spec.artifact_rate > 0.0) {
    rnd::Engine art_rng(rnd::mix(spec.seed, 6));
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const bool quiet = s.eeg[k - 1].blink_strength == 0 && s.eeg[k].blink_strength == 0 &&
                         s.eeg[k + 1].blink_strength == 0;
      if (rnd::unit(art_rng) < spec.artifact_rate && quiet) {
        s.eeg[k].blink_strength = std::round(rnd::uniform(art_rng, 1.0, 8.0));
      }
    }
  }
  return s;
}

double SyntheticSession::openness(FrameIndex frame, EyeSide side) const {
  const auto salt = side == EyeSide::Left ? 0 : 1;
  const auto it = std::upper_bound(events.begin(), events.end(), frame,
                                   [](FrameIndex f, const GroundTruthEvent& e) { return f < e.start_frame; });
  if (it != events.begin() && std::prev(it)->end_frame >= frame) {
    return 0.05 + 0.04 * wobble(spec.seed, frame, salt);
  }
  const double rest = EyeAppearance::from_seed(spec.seed).rest_openness;
  return std::clamp(rest + 0.04 * std::sin(kTwoPi * frame / 83.0) + 0.02 * wobble(spec.seed, frame, 2 + salt),
                    kOpenOpennessMin, 1.0);
}

SyntheticEyeSpec SyntheticSession::eye_spec(FrameIndex frame, EyeSide side, double noise_level) const {
  SyntheticEyeSpec e;
  e.openness = openness(frame, side);
  e.state = *e.openness <= kClosedOpennessMax ? EyeState::Closed : EyeState::Open;
  const double t = frame_to_time(frame, spec.fps);
  e.iris_x = 0.22 * std::sin(kTwoPi * t / 7.3) + 0.08 * std::sin(kTwoPi * t / 2.9);
  e.iris_y = 0.05 * std::sin(kTwoPi * t / 5.1);
  e.illumination = 1.0 + 0.05 * std::sin(kTwoPi * t / 31.0);
  e.noise_level = noise_level;
  e.side = side;
  e.appearance = EyeAppearance::from_seed(spec.seed);
  e.seed = rnd::mix(spec.seed, static_cast<std::uint64_t>(frame) * 2 + (side == EyeSide::Left ? 0 : 1));
  return e;
}

FaceFrameSpec SyntheticSession::face_spec(FrameIndex frame, cv::Size frame_size) const {
  FaceFrameSpec f;
  const auto left = eye_spec(frame, EyeSide::Left);
  const auto right = eye_spec(frame, EyeSide::Right);
  f.frame_size = frame_size;
  f.face_width = static_cast<int>(std::lround(0.6 * frame_size.height));
  const int fh = static_cast<int>(std::lround(kFaceAspect * f.face_width));
  const double t = frame_to_time(frame, spec.fps);
  const int sway_x = static_cast<int>(std::lround(3.0 * std::sin(kTwoPi * t / 5.0)));
  const int sway_y = static_cast<int>(std::lround(2.0 * std::sin(kTwoPi * t / 6.7)));
  f.face_origin = {(frame_size.width - f.face_width) / 2 + sway_x,
                   std::max(0, (frame_size.height - fh) / 2 + sway_y)};
  f.left_openness = *left.openness;
  f.right_openness = *right.openness;
  f.iris_x = left.iris_x;
  f.iris_y = left.iris_y;
  f.illumination = left.illumination;
  f.appearance = *left.appearance;
  f.seed = rnd::mix(spec.seed, static_cast<std::uint64_t>(frame) + 0x100000);
  return f;
}

std::vector<double> SyntheticSession::event_start_times() const {
  std::vector<double> out;
  for (const auto& e : events) out.push_back(frame_to_time(e.start_frame, spec.fps));
  return out;
}

void save_ground_truth(std::span<const GroundTruthEvent> events, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "event_id,start_frame,end_frame\n";
  for (const auto& e : events) out << e.event_id << ',' << e.start_frame << ',' << e.end_frame << '\n';
}

std::vector<GroundTruthEvent> load_ground_truth(const fs::path& path) {
  const auto table = csv::read(path);
  std::vector<GroundTruthEvent> events;
  if (table.header.empty()) return events;
  csv::require_header(table, {"event_id", "start_frame", "end_frame"}, path.string());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    events.push_back({table.rows[i][0], csv::to_int(table.rows[i][1], where), csv::to_int(table.rows[i][2], where)});
  }
  return events;
}

fs::path write_session(const SyntheticSession& session, const fs::path& dir, const SessionWriteOptions& options) {
  fs::create_directories(dir);
  SessionManifest m;
  m.session_id = session.spec.session_id;
  m.subject_id = "synthetic-" + std::to_string(session.spec.seed);
  m.fps = session.spec.fps;
  m.eeg_path = dir / "eeg.csv";
  m.resolution = {options.frame_size.width, options.frame_size.height};
  m.streams.push_back({StreamKind::RGB, dir / "rgb", session.frame_count});
  save_eeg(session.eeg, m.eeg_path);
  save_ground_truth(session.events, dir / "ground_truth.csv");
  if (options.render_frames) {
    fs::create_directories(dir / "rgb");
    for (FrameIndex f = 0; f < session.frame_count; ++f) {
      const auto face = render_face_frame(session.face_spec(f, options.frame_size));
      char name[32];
      std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(f));
      if (!cv::imwrite((dir / "rgb" / name).string(), face.image)) {
        throw Error(ErrorCode::IoError, "cannot write frame " + std::string(name));
      }
    }
  }
  const auto manifest_path = dir / "session.json";
  save_session(m, manifest_path);
  return manifest_path;
}

namespace {

struct FramePlan {
  double openness = 1.0;
  double iris_x = 0.0;
  double iris_y = 0.0;
};

struct SequencePlan {
  EyeAppearance appearance;
  double illumination = 1.0;
  std::vector<FramePlan> frames;
  std::vector<bool> closed;
};

SequencePlan plan_sequence(SampleLabel label, std::uint64_t seed, int frames) {
  rnd::Engine rng(rnd::mix(seed, 0x5e9));
  SequencePlan plan;
  plan.appearance = EyeAppearance::from_seed(seed);
  plan.illumination = rnd::uniform(rng, 0.75, 1.2);
  const double gx = rnd::uniform(rng, -0.3, 0.3), gy = rnd::uniform(rng, -0.08, 0.08);
  plan.frames.resize(static_cast<std::size_t>(frames));
  plan.closed.assign(static_cast<std::size_t>(frames), false);
  for (auto& f : plan.frames) {
    f.openness = std::clamp(plan.appearance.rest_openness + rnd::uniform(rng, -0.05, 0.05), kOpenOpennessMin, 1.0);
    f.iris_x = gx + rnd::uniform(rng, -0.03, 0.03);
    f.iris_y = gy + rnd::uniform(rng, -0.02, 0.02);
  }
  if (label == SampleLabel::Blink) {
    const int len = static_cast<int>(rnd::integer(rng, 3, std::min(7, frames)));
    const int mid_lo = std::max(0, (frames - len) / 2 - 2);
    const int mid_hi = std::min(frames - len, (frames - len) / 2 + 2);
    const int start = static_cast<int>(rnd::integer(rng, mid_lo, mid_hi));
    for (int k = start; k < start + len; ++k) {
      plan.frames[static_cast<std::size_t>(k)].openness = rnd::uniform(rng, 0.0, kClosedOpennessMax - 0.02);
      plan.closed[static_cast<std::size_t>(k)] = true;
    }
    // Half-shut transition frames either side of the closure.
    if (start > 0) plan.frames[static_cast<std::size_t>(start - 1)].openness = 0.4;
    if (start + len < frames) plan.frames[static_cast<std::size_t>(start + len)].openness = 0.45;
  }
  return plan;
}

}  // namespace

SyntheticSequence synthetic_sequence(SampleLabel label, EyeSide side, std::uint64_t seed, int frames,
                                     double noise_level) {
  const auto plan = plan_sequence(label, seed, frames);
  SyntheticSequence out;
  out.label = label;
  out.closed = plan.closed;
  for (int k = 0; k < frames; ++k) {
    const auto& f = plan.frames[static_cast<std::size_t>(k)];
    SyntheticEyeSpec spec;
    spec.state = plan.closed[static_cast<std::size_t>(k)] ? EyeState::Closed : EyeState::Open;
    spec.openness = f.openness;
    spec.iris_x = f.iris_x;
    spec.iris_y = f.iris_y;
    spec.illumination = plan.illumination;
    spec.appearance = plan.appearance;
    spec.noise_level = noise_level;
    spec.side = side;
    spec.seed = rnd::mix(seed, static_cast<std::uint64_t>(k) * 2 + (side == EyeSide::Left ? 0 : 1));
    out.crops.push_back(render_eye(spec).crop);
  }
  return out;
}

std::vector<LabeledCrop> synthetic_crop_dataset(std::size_t count, std::uint64_t seed, double noise_level) {
  std::vector<LabeledCrop> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    rnd::Engine rng(rnd::mix(seed, i));
    SyntheticEyeSpec spec;
    spec.state = i % 2 == 0 ? EyeState::Open : EyeState::Closed;
    spec.iris_x = rnd::uniform(rng, -0.3, 0.3);
    spec.iris_y = rnd::uniform(rng, -0.08, 0.08);
    spec.illumination = rnd::uniform(rng, 0.75, 1.2);
    spec.side = rnd::index(rng, 2) == 0 ? EyeSide::Left : EyeSide::Right;
    spec.half_width = rnd::uniform(rng, 8.0, 16.0);
    spec.noise_level = noise_level;
    spec.seed = rng();
    char group[32];
    std::snprintf(group, sizeof group, "c%06zu", i);
    out.push_back({render_eye(spec).crop, spec.state == EyeState::Closed, group});
  }
  return out;
}

void write_synthetic_benchmark(const fs::path& root, std::size_t blink_samples, std::size_t no_blink_samples,
                               std::uint64_t seed, const BenchmarkWriteOptions& options) {
  fs::create_directories(root);
  std::ofstream labels(root / "labels.csv", std::ios::binary);
  if (!labels) throw Error(ErrorCode::IoError, "cannot write " + (root / "labels.csv").string());
  labels << "sample_id,label\n";
  const std::size_t total = blink_samples + no_blink_samples;
  for (std::size_t j = 0; j < total; ++j) {
    const bool blink = j < blink_samples;
    const SampleLabel label = blink ? SampleLabel::Blink : SampleLabel::NoBlink;
    char id[32];
    std::snprintf(id, sizeof id, "%s%05zu", blink ? "b" : "n", blink ? j : j - blink_samples);
    const std::uint64_t sample_seed = rnd::mix(seed, j);
    const fs::path dir = root / std::string(to_string(label)) / id;
    labels << id << ',' << to_string(label) << '\n';

    if (options.eye_crops) {
      for (EyeSide side : {EyeSide::Left, EyeSide::Right}) {
        const auto seq = synthetic_sequence(label, side, sample_seed, kBenchmarkFrames, options.noise_level);
        fs::create_directories(dir / std::string(to_string(side)));
        for (int k = 0; k < kBenchmarkFrames; ++k) {
          char name[16];
          std::snprintf(name, sizeof name, "%02d.png", k);
          cv::imwrite((dir / std::string(to_string(side)) / name).string(),
                      to_bgr8(seq.crops[static_cast<std::size_t>(k)]));
        }
      }
      continue;
    }
    const auto plan = plan_sequence(label, sample_seed, kBenchmarkFrames);
    for (EyeSide side : {EyeSide::Left, EyeSide::Right}) fs::create_directories(dir / std::string(to_string(side)));
    rnd::Engine rng(rnd::mix(sample_seed, 0xface));
    const int fw = static_cast<int>(std::lround(0.6 * options.frame_size.height));
    const int fh = static_cast<int>(std::lround(kFaceAspect * fw));
    const cv::Point origin((options.frame_size.width - fw) / 2 + static_cast<int>(rnd::integer(rng, -6, 6)),
                           std::max(0, (options.frame_size.height - fh) / 2 + static_cast<int>(rnd::integer(rng, -3, 3))));
    for (int k = 0; k < kBenchmarkFrames; ++k) {
      const auto& f = plan.frames[static_cast<std::size_t>(k)];
      FaceFrameSpec spec;
      spec.frame_size = options.frame_size;
      spec.face_origin = origin;
      spec.face_width = fw;
      spec.left_openness = spec.right_openness = f.openness;
      spec.iris_x = f.iris_x;
      spec.iris_y = f.iris_y;
      spec.illumination = plan.illumination;
      spec.appearance = plan.appearance;
      spec.noise_level = options.noise_level * 255.0;
      spec.seed = rnd::mix(sample_seed, static_cast<std::uint64_t>(k));
      const auto face = render_face_frame(spec);
      char name[16];
      std::snprintf(name, sizeof name, "%02d.png", k);
      for (EyeSide side : {EyeSide::Left, EyeSide::Right}) {
        cv::imwrite((dir / std::string(to_string(side)) / name).string(), face.image);
      }
    }
  }
}

ThresholdResult oracle_eer(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw Error(ErrorCode::EmptyClass, "oracle needs both classes");
  std::set<double> distinct(pos.begin(), pos.end());
  distinct.insert(neg.begin(), neg.end());
  const std::vector<double> v(distinct.begin(), distinct.end());
  std::vector<double> candidates{v.front() - 1.0, v.back() + 1.0};
  for (std::size_t i = 0; i + 1 < v.size(); ++i) candidates.push_back((v[i] + v[i + 1]) / 2.0);

  const long long np = static_cast<long long>(pos.size()), nn = static_cast<long long>(neg.size());
  ThresholdResult best;
  long long best_gap = -1, best_total = 0;
  for (double t : candidates) {
    long long fp = 0, fn = 0;
    for (double s : neg) fp += s > t ? 1 : 0;
    for (double s : pos) fn += s > t ? 0 : 1;
    // |fp/nn - fn/np| and fp/nn + fn/np, both scaled by nn * np.
    const long long gap = std::llabs(fp * np - fn * nn);
    const long long total = fp * np + fn * nn;
    const bool better = best_gap < 0 || gap < best_gap || (gap == best_gap && total < best_total) ||
                        (gap == best_gap && total == best_total && t < best.threshold);
    if (better) {
      best_gap = gap;
      best_total = total;
      best.threshold = t;
      best.fpr = static_cast<double>(fp) / static_cast<double>(nn);
      best.fnr = static_cast<double>(fn) / static_cast<double>(np);
    }
  }
  best.n_pos = pos.size();
  best.n_neg = neg.size();
  return best;
}

TimeSeries oracle_bpm(std::span<const BlinkEvent> events, double fps, double window, double slide, double duration) {
  if (!(window > 0.0) || !(slide > 0.0)) throw Error(ErrorCode::InvariantViolation, "window and slide must be positive");
  TimeSeries out;
  out.meaning = SeriesMeaning::BlinkRateBpm;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * slide;
    if (t + window > duration + 1e-9) break;
    int count = 0;
    for (const auto& e : events) {
      const double start = frame_to_time(e.start_frame, fps);
      if (start >= t && start < t + window) ++count;
    }
    out.times.push_back(t);
    out.values.push_back(count * 60.0 / window);
  }
  return out;
}

}  // namespace blinkkit
