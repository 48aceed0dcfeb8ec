// One PASS/FAIL line per acceptance criterion. Tolerances and budgets are fixed here.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "blinkkit/attention.hpp"
#include "blinkkit/candidates.hpp"
#include "blinkkit/classifier.hpp"
#include "blinkkit/evaluation.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/ingest.hpp"
#include "blinkkit/random.hpp"
#include "blinkkit/synthdata.hpp"
#include "blinkkit/temporal.hpp"

namespace fs = std::filesystem;
using namespace blinkkit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Budgets (seconds).
constexpr double kCountingBudget = 1.0;
constexpr double kEerBudget = 10.0;
constexpr double kAggregationBudget = 10.0;
constexpr double kEndToEndBudget = 300.0;
constexpr double kRecoveryBudget = 30.0;
constexpr double kBpmBudget = 10.0;
constexpr double kCorrelationBudget = 120.0;

// Tolerances.
constexpr double kMetricTolerance = 1e-4;
constexpr double kMinEndToEndF1 = 0.95;
constexpr double kMinRecovery = 0.95;
constexpr FrameIndex kMatchFrames = 15;
constexpr double kMaxCorrelation = -0.5;
constexpr int kMinCorrelatedSessions = 18;
constexpr double kRoundTripTolerance = 1e-6;

// Shared across criteria: the end-to-end model and its threshold feed the
// correlation and round-trip checks.
struct Shared {
  fs::path work;
  std::optional<Checkpoint> model;
  double threshold = 0.5;
} shared;

std::string fmt_double(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// 1. Counting arithmetic --------------------------------------------------

Outcome counting_arithmetic() {
  const auto t0 = Clock::now();
  // 3,000 accepted candidates over 10 three-stream sessions; negatives balance them.
  std::vector<SessionManifest> sessions;
  std::vector<BlinkCandidate> candidates;
  std::vector<DecisionRecord> decisions;
  const auto accept = [&](const BlinkCandidate& c) {
    DecisionRecord d;
    d.candidate_id = c.candidate_id;
    d.decision = Decision::Accept;
    d.reviewer = "acceptance";
    decisions.push_back(d);
  };
  for (int s = 0; s < 10; ++s) {
    SessionManifest m;
    m.session_id = "s" + std::to_string(s);
    m.eeg_path = "unused.csv";
    for (auto kind : {StreamKind::RGB, StreamKind::NIR_LEFT, StreamKind::NIR_RIGHT}) {
      m.streams.push_back({kind, "unused", 60000});
    }
    for (int k = 0; k < 300; ++k) {
      BlinkCandidate c;
      c.session_id = m.session_id;
      c.candidate_id = m.session_id + "_c" + std::to_string(k);
      c.center_frame = 50 + 100 * k;
      c.t_eeg = c.center_frame / 30.0;
      c.strength = 50;
      accept(c);
      candidates.push_back(c);
    }
    sessions.push_back(std::move(m));
  }
  DatasetOptions options;
  options.dry_run = true;
  const auto big = build_dataset(sessions, candidates, decisions, {}, options);

  // A single one-stream sample with no room for a negative.
  SessionManifest one;
  one.session_id = "one";
  one.eeg_path = "unused.csv";
  one.streams.push_back({StreamKind::RGB, "unused", 21});
  BlinkCandidate c;
  c.session_id = "one";
  c.candidate_id = "one_c0";
  c.center_frame = 10;
  decisions.clear();
  accept(c);
  spdlog::set_level(spdlog::level::err);
  const auto small = build_dataset(std::span(&one, 1), std::span(&c, 1), decisions, {}, options);
  spdlog::set_level(spdlog::level::warn);
  const double elapsed = seconds_since(t0);

  const std::size_t samples = big.blink_count + big.no_blink_count;
  const bool pass = samples == 6000 && big.image_count == 756000 && small.image_count == 42 &&
                    images_per_sample(3) * 6000 == 756000 && images_per_sample(1) == 42 && elapsed < kCountingBudget;
  return {pass, std::to_string(samples) + " samples -> " + std::to_string(big.image_count) + " images; 1 sample, 1 stream -> " +
                    std::to_string(small.image_count) + " (" + fmt_double(elapsed, 3) + " s)"};
}

// 2. Blink-duration bounds --------------------------------------------------

Outcome blink_duration_bounds() {
  std::size_t events = 0, bad = 0;
  FrameIndex lo = 1000, hi = 0;
  spdlog::set_level(spdlog::level::err);
  for (std::uint64_t seed = 0; events < 10000; ++seed) {
    SyntheticSessionSpec spec;
    spec.seed = 7000 + seed;
    spec.duration = 600.0;
    spec.blink_count = 200;
    const auto session = gen_session(spec);
    for (const auto& e : session.events) {
      ++events;
      lo = std::min(lo, e.length());
      hi = std::max(hi, e.length());
      if (e.length() < 3 || e.length() > 13) ++bad;
    }
  }
  spdlog::set_level(spdlog::level::warn);
  return {bad == 0, std::to_string(events) + " events, lengths " + std::to_string(lo) + ".." + std::to_string(hi) +
                        " frames, " + std::to_string(bad) + " outside 3..13"};
}

// 3. EER oracle equivalence ---------------------------------------------------

std::vector<double> random_scores(rnd::Engine& rng, std::size_t n, bool coarse) {
  std::vector<double> v(n);
  for (auto& x : v) {
    x = rnd::unit(rng);
    if (coarse) x = std::round(x * 10.0) / 10.0;  // forces ties
  }
  return v;
}

Outcome eer_oracle_equivalence() {
  const auto t0 = Clock::now();
  rnd::Engine rng(20240601);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t total = 2 + rnd::index(rng, 99);  // 2..100
    const std::size_t n_pos = 1 + rnd::index(rng, total - 1);
    const bool coarse = trial % 3 == 0;
    auto pos = random_scores(rng, n_pos, coarse);
    auto neg = random_scores(rng, total - n_pos, coarse);
    if (trial % 10 == 0) neg = pos;  // identical classes
    const auto got = calibrate_threshold(pos, neg);
    const auto want = oracle_eer(pos, neg);
    if (!(got.threshold == want.threshold && got.fpr == want.fpr && got.fnr == want.fnr)) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && elapsed < kEerBudget,
          "1000 instances, " + std::to_string(mismatches) + " mismatches (" + fmt_double(elapsed, 2) + " s)"};
}

// 4. Max aggregation and metrics ----------------------------------------------

Outcome aggregation_and_metrics() {
  const auto t0 = Clock::now();
  rnd::Engine rng(99);
  int max_mismatch = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> scores(1 + rnd::index(rng, 40));
    for (auto& s : scores) s = rnd::unit(rng);
    double brute = scores[0];
    for (double s : scores) {
      if (s > brute) brute = s;
    }
    if (score_sample(scores) != brute) ++max_mismatch;
  }
  int metric_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t tp = rnd::index(rng, 50), fp = rnd::index(rng, 50), fn = rnd::index(rng, 50), tn = rnd::index(rng, 50);
    // Zero-denominator cases.
    if (trial % 10 == 0) tp = fp = 0;
    if (trial % 10 == 1) tp = fn = 0;
    if (trial % 10 == 2) tp = fp = fn = 0;
    const double p = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    const auto m = compute_metrics(EyeSide::Left, tp, fp, fn, tn);
    if (std::abs(m.precision - p) > kMetricTolerance || std::abs(m.recall - r) > kMetricTolerance ||
        std::abs(m.f1 - f) > kMetricTolerance || std::isnan(m.f1)) {
      ++metric_mismatch;
    }
  }
  const double elapsed = seconds_since(t0);
  return {max_mismatch == 0 && metric_mismatch == 0 && elapsed < kAggregationBudget,
          "max: 10000 lists, " + std::to_string(max_mismatch) + " mismatches; metrics: 100 counts, " +
              std::to_string(metric_mismatch) + " mismatches (" + fmt_double(elapsed, 2) + " s)"};
}

// 5. End-to-end synthetic detection -----------------------------------------

std::vector<double> sample_scores(const EvaluationResult& r, SampleLabel label) {
  std::vector<double> out;
  for (const auto& o : r.outcomes) {
    if (o.sample.label == label) out.push_back(o.scored.sample_score);
  }
  return out;
}

Outcome end_to_end_detection() {
  const auto t0 = Clock::now();
  const auto crops = synthetic_crop_dataset(2000, 2024);
  TrainConfig config;
  config.seed = 2024;
  auto model = train(crops, config);
  const double train_time = seconds_since(t0);

  TemplateLandmarkAdapter adapter;
  EvaluateOptions options;
  options.adapter = &adapter;

  // Calibration and test benchmarks are rendered from disjoint seeds.
  const auto cal_dir = shared.work / "bench_calibration";
  const auto test_dir = shared.work / "bench_test";
  write_synthetic_benchmark(cal_dir, 100, 100, 11);
  write_synthetic_benchmark(test_dir, 150, 150, 12);

  const auto cal_set = load_benchmark(cal_dir);
  const auto cal = evaluate(cal_set.samples, model, 0.5, options);
  const auto thr = calibrate_threshold(sample_scores(cal, SampleLabel::Blink), sample_scores(cal, SampleLabel::NoBlink));

  const auto test_set = load_benchmark(test_dir);
  const auto result = evaluate(test_set.samples, model, thr.threshold, options);
  const double elapsed = seconds_since(t0);

  shared.model = std::move(model);
  shared.threshold = thr.threshold;

  const auto& left = result.metrics.at(0);
  const auto& right = result.metrics.at(1);
  const bool pass = left.f1 >= kMinEndToEndF1 && right.f1 >= kMinEndToEndF1 && result.skipped.empty() &&
                    elapsed < kEndToEndBudget;
  return {pass, "F1 left " + fmt_double(left.f1) + ", right " + fmt_double(right.f1) + " on " +
                    std::to_string(test_set.samples.size()) + " held-out samples; EER threshold " +
                    fmt_double(thr.threshold, 6) + " (FPR " + fmt_double(thr.fpr) + "); train " +
                    fmt_double(train_time, 1) + " s, total " + fmt_double(elapsed, 1) + " s"};
}

// 6. Candidate recovery ----------------------------------------------------------

Outcome candidate_recovery() {
  const auto t0 = Clock::now();
  std::size_t total = 0, recovered = 0;
  double worst = 1.0;
  spdlog::set_level(spdlog::level::err);
  for (int s = 0; s < 20; ++s) {
    SyntheticSessionSpec spec;
    spec.seed = 300 + s;
    const auto session = gen_session(spec);
    CandidateOptions options;
    options.session_id = spec.session_id;
    const auto found = extract_candidates(session.eeg, options);
    std::vector<bool> used(found.size(), false);
    std::size_t hits = 0;
    for (const auto& e : session.events) {
      const double center = 0.5 * (e.start_frame + e.end_frame);
      for (std::size_t k = 0; k < found.size(); ++k) {
        if (!used[k] && std::abs(found[k].center_frame - center) <= kMatchFrames) {
          used[k] = true;
          ++hits;
          break;
        }
      }
    }
    total += session.events.size();
    recovered += hits;
    worst = std::min(worst, static_cast<double>(hits) / session.events.size());
  }
  spdlog::set_level(spdlog::level::warn);
  const double elapsed = seconds_since(t0);
  const double rate = static_cast<double>(recovered) / total;
  return {rate >= kMinRecovery && elapsed < kRecoveryBudget,
          std::to_string(recovered) + "/" + std::to_string(total) + " events recovered (" + fmt_double(100 * rate, 2) +
              "%, worst session " + fmt_double(100 * worst, 2) + "%) in " + fmt_double(elapsed, 2) + " s"};
}

// 7. bpm oracle equivalence --------------------------------------------------

Outcome bpm_oracle_equivalence() {
  const auto t0 = Clock::now();
  rnd::Engine rng(5150);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double duration = 10.0 + rnd::uniform(rng, 0.0, 290.0);
    const double fps = trial % 2 ? 30.0 : 25.0;
    const FrameIndex frames = static_cast<FrameIndex>(duration * fps);
    std::vector<BlinkEvent> events;
    const std::size_t n = rnd::index(rng, 80);
    for (std::size_t k = 0; k < n; ++k) {
      BlinkEvent e;
      e.start_frame = static_cast<FrameIndex>(rnd::index(rng, static_cast<std::uint64_t>(frames)));
      e.end_frame = e.start_frame + static_cast<FrameIndex>(rnd::index(rng, 13));
      events.push_back(e);
    }
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.start_frame < b.start_frame; });
    const double window = trial % 3 == 0 ? 10.0 : 5.0;
    const double slide = trial % 4 == 0 ? 2.5 : 5.0;
    const auto got = blink_rate_series(events, fps, duration, window, slide);
    const auto want = oracle_bpm(events, fps, window, slide, duration);
    if (got.times != want.times || got.values != want.values) ++mismatches;
  }
  BlinkEvent one;
  one.start_frame = 60;  // t = 2 s
  one.end_frame = 64;
  const auto single = blink_rate_series(std::span(&one, 1), 30.0, 5.0, 5.0, 5.0);
  const bool twelve = single.size() == 1 && single.values[0] == 12.0;
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && twelve && elapsed < kBpmBudget,
          "1000 event sets, " + std::to_string(mismatches) + " mismatches; 1 event in 5 s -> " +
              (single.size() ? fmt_double(single.values[0], 1) : std::string("none")) + " bpm (" +
              fmt_double(elapsed, 2) + " s)"};
}

// 8. Attention windowing -----------------------------------------------------

Outcome attention_windowing() {
  std::vector<EEGSample> eeg(240);
  for (int k = 0; k < 240; ++k) {
    eeg[k].t = k;
    eeg[k].attention = 63.0;
  }
  const auto series = attention_series(eeg, 20.0, 5.0);
  const bool constant = std::all_of(series.values.begin(), series.values.end(), [](double v) { return v == 63.0; });
  return {series.size() == 45 && constant,
          std::to_string(series.size()) + " points, " + (constant ? "all" : "not all") + " equal to 63"};
}

// 9. Correlation recovery ----------------------------------------------------

Outcome correlation_recovery() {
  if (!shared.model) return {false, "no trained model (end-to-end criterion did not run)"};
  const auto t0 = Clock::now();
  int negative = 0;
  double worst = -1.0;
  std::string rs;
  spdlog::set_level(spdlog::level::err);
  for (int s = 0; s < 20; ++s) {
    SyntheticSessionSpec spec;
    spec.seed = 1000 + s;
    spec.coupling = -0.8;
    spec.session_id = "corr" + std::to_string(s);
    const auto session = gen_session(spec);
    // Crop-level rendering of the left eye: the same drawing and cropping as a
    // face frame, without the full-frame raster.
    std::vector<EyeCrop> crops;
    crops.reserve(static_cast<std::size_t>(session.frame_count));
    for (FrameIndex f = 0; f < session.frame_count; ++f) {
      crops.push_back(render_eye(session.eye_spec(f, EyeSide::Left)).crop);
    }
    SessionAnalysisInput input;
    input.session_id = spec.session_id;
    input.eeg = session.eeg;
    input.fps = spec.fps;
    input.frame_scores = shared.model->predict(crops);
    input.threshold = shared.threshold;
    const auto analysis = analyze_session(input);
    const double r = analysis.r_attention_estimated.value_or(1.0);
    if (r <= kMaxCorrelation) ++negative;
    worst = std::max(worst, r);
    rs += (rs.empty() ? "" : " ") + fmt_double(r, 2);
  }
  spdlog::set_level(spdlog::level::warn);
  const double elapsed = seconds_since(t0);
  return {negative >= kMinCorrelatedSessions && elapsed < kCorrelationBudget,
          std::to_string(negative) + "/20 sessions with r <= -0.5 (max r " + fmt_double(worst, 3) + ") in " +
              fmt_double(elapsed, 1) + " s; r = [" + rs + "]"};
}

// 10. Report fidelity -----------------------------------------------------------

Outcome report_fidelity() {
  const std::vector<ReportRow> rows = {{"Ours", "Left", 0.9603, 0.6080, 0.7446},
                                       {"Ours", "Right", 0.7950, 0.7348, 0.7637}};
  const auto report = render_report({}, rows);
  const std::string expected =
      "Method  Eye    Recall  Precision  F1\n"
      "Ours    Left   0.9603  0.6080     0.7446\n"
      "Ours    Right  0.7950  0.7348     0.7637\n";
  const bool pass = report.text == expected && report.warnings.empty();
  return {pass, pass ? "table matches byte for byte" : "got:\n" + report.text};
}

// 11. Checkpoint round-trip --------------------------------------------------

Outcome checkpoint_round_trip() {
  if (!shared.model) return {false, "no trained model (end-to-end criterion did not run)"};
  rnd::Engine rng(77);
  std::vector<EyeCrop> crops;
  for (int k = 0; k < 100; ++k) {
    EyeCrop c;
    c.side = k % 2 ? EyeSide::Right : EyeSide::Left;
    if (k % 4 < 2) {
      for (auto& v : c.pixels) v = static_cast<float>(rnd::unit(rng));
    } else {
      SyntheticEyeSpec spec;
      spec.state = k % 8 < 4 ? EyeState::Open : EyeState::Closed;
      spec.side = c.side;
      spec.seed = 9000 + k;
      spec.noise_level = 0.05;
      c = render_eye(spec).crop;
    }
    crops.push_back(std::move(c));
  }
  const auto path = shared.work / "roundtrip.ckpt";
  const auto before = shared.model->predict(crops);
  shared.model->save(path);
  const auto after = Checkpoint::load(path).predict(crops);
  double worst = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) worst = std::max(worst, std::abs(before[i] - after[i]));
  return {worst <= kRoundTripTolerance, "100 crops, max |before - after| = " + std::to_string(worst)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  shared.work = fs::temp_directory_path() / ("blinkkit-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(shared.work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"counting arithmetic", counting_arithmetic},
      {"blink-duration bounds", blink_duration_bounds},
      {"EER oracle equivalence", eer_oracle_equivalence},
      {"max aggregation and metrics", aggregation_and_metrics},
      {"end-to-end synthetic detection", end_to_end_detection},
      {"candidate recovery", candidate_recovery},
      {"bpm oracle equivalence", bpm_oracle_equivalence},
      {"attention windowing", attention_windowing},
      {"correlation recovery", correlation_recovery},
      {"report fidelity", report_fidelity},
      {"checkpoint round-trip", checkpoint_round_trip},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(shared.work, ec);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
