#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "blinkkit/error.hpp"
#include "blinkkit/evaluation.hpp"
#include "blinkkit/synthdata.hpp"
#include "test_util.hpp"

using namespace blinkkit;
using blinkkit::testing::TempDir;

namespace {

// Untrained model whose output is sigmoid(bias) for every crop.
Checkpoint constant_model(float bias) {
  Checkpoint c;
  TrainedModel m;
  m.net = build_model(ModelConfig{}, 0);
  for (auto& v : m.net.parameters()) {
    if (v.name == "dense2.weight") std::fill(v.data, v.data + v.size(), 0.0f);
    if (v.name == "dense2.bias") v.data[0] = bias;
  }
  c.models.push_back(std::move(m));
  return c;
}

SampleOutcome outcome(EyeSide side, SampleLabel truth, SampleLabel predicted) {
  SampleOutcome o;
  o.sample.eye_side = side;
  o.sample.label = truth;
  o.predicted = predicted;
  return o;
}

}  // namespace

TEST(Metrics, HandComputed) {
  const auto m = compute_metrics(EyeSide::Left, 58, 38, 3, 0);
  EXPECT_NEAR(m.recall, 0.9508, 1e-4);
  EXPECT_NEAR(m.precision, 0.6042, 1e-4);
  EXPECT_NEAR(m.f1, 0.7389, 1e-4);
  const auto z = compute_metrics(EyeSide::Right, 0, 0, 5, 5);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  const auto e = compute_metrics(EyeSide::Right, 0, 0, 0, 0);
  EXPECT_EQ(e.f1, 0.0);
}

TEST(Metrics, RandomCountsAgainstFormulas) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t tp = rng() % 50, fp = rng() % 50, fn = rng() % 50, tn = rng() % 50;
    const auto m = compute_metrics(EyeSide::Left, tp, fp, fn, tn);
    const long double r = tp + fn ? (long double)tp / (tp + fn) : 0;
    const long double p = tp + fp ? (long double)tp / (tp + fp) : 0;
    const long double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
    ASSERT_NEAR(m.recall, (double)r, 1e-12);
    ASSERT_NEAR(m.precision, (double)p, 1e-12);
    ASSERT_NEAR(m.f1, (double)f, 1e-12);
  }
}

TEST(Metrics, PerfectPredictions) {
  std::vector<SampleOutcome> o;
  for (int i = 0; i < 10; ++i) {
    o.push_back(outcome(EyeSide::Left, SampleLabel::Blink, SampleLabel::Blink));
    o.push_back(outcome(EyeSide::Left, SampleLabel::NoBlink, SampleLabel::NoBlink));
  }
  const auto m = metrics_from_outcomes(o);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].recall, 1.0);
  EXPECT_EQ(m[0].precision, 1.0);
  EXPECT_EQ(m[0].f1, 1.0);
  EXPECT_EQ(m[1].tp + m[1].fp + m[1].fn + m[1].tn, 0u);
}

TEST(Metrics, CountIdentitiesAndPermutationInvariance) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<SampleOutcome> o;
    std::size_t pos[2] = {0, 0}, neg[2] = {0, 0};
    for (int i = 0; i < 60; ++i) {
      const auto side = rng() % 2 ? EyeSide::Left : EyeSide::Right;
      const auto truth = rng() % 2 ? SampleLabel::Blink : SampleLabel::NoBlink;
      (truth == SampleLabel::Blink ? pos : neg)[side == EyeSide::Left ? 0 : 1]++;
      o.push_back(outcome(side, truth, rng() % 3 ? truth : (rng() % 2 ? SampleLabel::Blink : SampleLabel::NoBlink)));
    }
    const auto m = metrics_from_outcomes(o);
    for (int s = 0; s < 2; ++s) {
      EXPECT_EQ(m[s].tp + m[s].fn, pos[s]);
      EXPECT_EQ(m[s].fp + m[s].tn, neg[s]);
      EXPECT_NEAR(f1_score(m[s].precision, m[s].recall), m[s].f1, 1e-12);
    }
    std::shuffle(o.begin(), o.end(), rng);
    const auto again = metrics_from_outcomes(o);
    for (int s = 0; s < 2; ++s) EXPECT_EQ(again[s].f1, m[s].f1);
  }
}

TEST(Report, PassThroughRowsAreVerbatim) {
  const std::vector<ReportRow> published = {{"Ours", "Left", 0.9603, 0.6080, 0.7446},
                                        {"Ours", "Right", 0.7950, 0.7348, 0.7637}};
  const auto r = render_report({}, published);
  EXPECT_EQ(r.text,
            "Method  Eye    Recall  Precision  F1\n"
            "Ours    Left   0.9603  0.6080     0.7446\n"
            "Ours    Right  0.7950  0.7348     0.7637\n");
  EXPECT_TRUE(r.warnings.empty());
  const auto doc = nlohmann::json::parse(r.json);
  EXPECT_EQ(doc["rows"].size(), 2u);
  EXPECT_TRUE(doc["rows"][0]["baseline"].get<bool>());
  EXPECT_EQ(doc["rows"][1]["f1"].get<double>(), 0.7637);
}

TEST(Report, EvaluatedRowsAndWarnings) {
  const std::vector<EvalMetrics> m = {compute_metrics(EyeSide::Left, 9, 1, 1, 9)};
  const auto r = render_report(m, {}, "blinkkit");
  EXPECT_EQ(r.text.rfind("Method    Eye   Recall  Precision  F1\nblinkkit  Left  0.9000  0.9000     0.9000\n", 0), 0u);
  EXPECT_NE(r.text.find("tp=9 fp=1 fn=1 tn=9"), std::string::npos);
  const std::vector<ReportRow> bad = {{"X", "Left", 0.5, 0.5, 0.9}};
  const auto w = render_report({}, bad);
  ASSERT_EQ(w.warnings.size(), 1u);
  EXPECT_NE(w.text.find("warning:"), std::string::npos);
  const std::vector<ReportRow> close = {{"Y", "Left", 0.5, 0.5, 0.50005}};
  EXPECT_TRUE(render_report({}, close).warnings.empty());
}

TEST(Report, BaselinesFile) {
  TempDir dir;
  blinkkit::testing::write_text(dir / "b.csv", "method,eye,recall,precision,f1\nPrior,Right,0.1,0.2,0.1333\n");
  const auto rows = load_baselines(dir / "b.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].eye, "Right");
  EXPECT_EQ(rows[0].f1, 0.1333);
}

TEST(LoadBenchmark, LayoutAndMalformedSamples) {
  TempDir dir;
  write_synthetic_benchmark(dir.path(), 3, 2, 5, {.eye_crops = true});
  auto set = load_benchmark(dir.path());
  EXPECT_EQ(set.count(SampleLabel::Blink), 6u);
  EXPECT_EQ(set.count(SampleLabel::NoBlink), 4u);
  EXPECT_EQ(set.count(SampleLabel::Blink, EyeSide::Right), 3u);
  EXPECT_TRUE(set.malformed.empty());
  for (const auto& s : set.samples) {
    ASSERT_EQ(s.frames.size(), 13u);
    EXPECT_EQ(s.frames[12].filename(), "12.png");
  }
  const auto victim = set.samples[0];
  std::filesystem::remove(victim.frames[12]);
  set = load_benchmark(dir.path());
  EXPECT_EQ(set.samples.size(), 9u);
  ASSERT_EQ(set.malformed.size(), 1u);
  EXPECT_EQ(set.malformed[0].sample_id, victim.sample_id);
  EXPECT_NE(set.malformed[0].reason.find("MalformedSample"), std::string::npos);
}

TEST(LoadBenchmark, LabelConflictAndEmptyRoot) {
  TempDir dir;
  write_synthetic_benchmark(dir.path(), 1, 1, 5, {.eye_crops = true});
  const auto set = load_benchmark(dir.path());
  const std::string blink_id = set.samples[0].sample_id;
  blinkkit::testing::write_text(dir / "labels.csv", "sample_id,label\n" + blink_id + ",no_blink\n");
  const auto conflict = load_benchmark(dir.path());
  EXPECT_EQ(conflict.count(SampleLabel::Blink), 0u);
  EXPECT_EQ(conflict.malformed.size(), 1u);
  EXPECT_TRUE(load_benchmark(dir / "missing").samples.empty());
  std::filesystem::create_directories(dir / "empty");
  EXPECT_TRUE(load_benchmark(dir / "empty").samples.empty());
}

TEST(Evaluate, ConstantModelCountsAndSkips) {
  TempDir dir;
  write_synthetic_benchmark(dir.path(), 2, 3, 8);
  auto set = load_benchmark(dir.path());
  // Replace one sample's frames with blank images so no face is found.
  const cv::Mat blank(180, 200, CV_8UC3, cv::Scalar(70, 45, 30));
  for (const auto& f : set.samples[0].frames) cv::imwrite(f.string(), blank);
  TemplateLandmarkAdapter adapter;
  EvaluateOptions o;
  o.adapter = &adapter;
  const auto all_blink = evaluate(set.samples, constant_model(2.0f), 0.5, o);
  ASSERT_EQ(all_blink.skipped.size(), 1u);
  EXPECT_EQ(all_blink.outcomes.size(), 9u);
  const auto& left = all_blink.metrics[0];
  EXPECT_EQ(left.skipped, all_blink.skipped[0].eye_side == EyeSide::Left ? 1u : 0u);
  std::size_t fn = 0, tn = 0;
  for (const auto& m : all_blink.metrics) {
    fn += m.fn;
    tn += m.tn;
  }
  EXPECT_EQ(fn + tn, 0u);
  for (const auto& out : all_blink.outcomes) {
    EXPECT_EQ(out.scored.frame_scores.size(), 13u);
    EXPECT_NEAR(out.scored.sample_score, 1.0 / (1.0 + std::exp(-2.0)), 1e-6);
  }
  const auto none = evaluate(set.samples, constant_model(-2.0f), 0.5, o);
  for (const auto& m : none.metrics) {
    EXPECT_EQ(m.tp + m.fp, 0u);
    EXPECT_EQ(m.precision, 0.0);
  }
  EvaluateOptions no_adapter;
  EXPECT_THROW(evaluate(set.samples, constant_model(0.0f), 0.5, no_adapter), Error);
}

TEST(ScoreVideo, MeanOfBothEyesAndFailedFrames) {
  TempDir dir;
  SyntheticSessionSpec spec;
  spec.session_id = "v";
  spec.duration = 1;
  spec.blink_times = {0.5};
  const auto manifest = load_session(write_session(gen_session(spec), dir / "v", {.render_frames = true}));
  const cv::Mat blank(240, 320, CV_8UC3, cv::Scalar(70, 45, 30));
  cv::imwrite(frame_path(manifest.streams[0], 3).string(), blank);
  TemplateLandmarkAdapter adapter;
  const auto s = score_video_frames(manifest, constant_model(1.0f), adapter);
  ASSERT_EQ(s.scores.size(), 30u);
  EXPECT_EQ(s.failed_frames, 1u);
  EXPECT_EQ(s.scores[3], 0.0);
  EXPECT_NEAR(s.scores[4], 1.0 / (1.0 + std::exp(-1.0)), 1e-6);
}
