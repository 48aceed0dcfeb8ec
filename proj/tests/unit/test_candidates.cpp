#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "blinkkit/candidates.hpp"
#include "blinkkit/classifier.hpp"
#include "blinkkit/error.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/synthdata.hpp"
#include "test_util.hpp"

using namespace blinkkit;
using blinkkit::testing::TempDir;

namespace {

std::vector<EEGSample> trace(const std::vector<double>& strengths) {
  std::vector<EEGSample> out;
  for (std::size_t i = 0; i < strengths.size(); ++i) {
    EEGSample s;
    s.t = static_cast<double>(i);
    s.blink_strength = strengths[i];
    s.attention = 50;
    out.push_back(s);
  }
  return out;
}

// Brute force: sorted copy, lower quantile rank, neighbour comparison.
std::vector<double> oracle_peak_times(const std::vector<double>& v, double q) {
  std::vector<double> pos;
  for (double x : v)
    if (x > 0) pos.push_back(x);
  if (pos.empty()) return {};
  std::sort(pos.begin(), pos.end());
  const double thr = pos[static_cast<std::size_t>(q * double(pos.size() - 1))];
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool left_ok = i == 0 || v[i] > v[i - 1];
    const bool right_ok = i + 1 == v.size() || v[i] >= v[i + 1];
    if (v[i] > 0 && v[i] >= thr && left_ok && right_ok) out.push_back(double(i));
  }
  return out;
}

Timestamp at(int seconds) { return Timestamp{std::chrono::seconds(1700000000 + seconds)}; }

bool overlaps(const FrameRange& a, const FrameRange& b, FrameIndex margin) {
  return !(a.last + margin < b.first || b.last + margin < a.first);
}

}  // namespace

TEST(ExtractCandidates, TwoPeaks) {
  CandidateOptions o;
  o.session_id = "s";
  const auto c = extract_candidates(trace({0, 0, 55, 0, 0, 80, 0}), o);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].t_eeg, 2.0);
  EXPECT_EQ(c[0].center_frame, 60);
  EXPECT_EQ(c[0].strength, 55.0);
  EXPECT_EQ(c[1].t_eeg, 5.0);
  EXPECT_EQ(c[0].status, CandidateStatus::Pending);
  EXPECT_NE(c[0].candidate_id, c[1].candidate_id);
}

TEST(ExtractCandidates, DegenerateTraces) {
  CandidateOptions o;
  EXPECT_TRUE(extract_candidates(trace({0, 0, 0, 0}), o).empty());
  const auto one = extract_candidates(trace({100}), o);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].strength, 100.0);
  EXPECT_THROW(extract_candidates(std::vector<EEGSample>{}, o), Error);
  o.min_strength_quantile = 1.0;
  EXPECT_THROW(extract_candidates(trace({1}), o), Error);
}

TEST(ExtractCandidates, PlateauYieldsOnePeak) {
  const auto c = extract_candidates(trace({0, 30, 30, 0}), CandidateOptions{});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].t_eeg, 1.0);
}

TEST(ExtractCandidates, CloseReadingsMergeToStronger) {
  std::vector<EEGSample> eeg;
  for (int i = 0; i < 6; ++i) eeg.push_back({i * 0.2, 0, 0, 0, 0, 0, i == 1 ? 20.0 : i == 3 ? 50.0 : 0.0, 50});
  const auto c = extract_candidates(eeg, CandidateOptions{});
  ASSERT_EQ(c.size(), 1u);  // 6 frames apart at 30 fps
  EXPECT_EQ(c[0].strength, 50.0);
}

TEST(ExtractCandidates, MatchesBruteForceOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 200);
    std::vector<double> v(n);
    for (auto& x : v) x = rng() % 3 == 0 ? double(rng() % 100) : 0.0;
    const double q = 0.05 + 0.9 * double(rng() % 1000) / 1000.0;
    CandidateOptions o;
    o.min_strength_quantile = q;
    std::vector<double> got;
    for (const auto& c : extract_candidates(trace(v), o)) got.push_back(c.t_eeg);
    ASSERT_EQ(got, oracle_peak_times(v, q)) << "trial " << trial;
  }
}

TEST(ExtractCandidates, ScaleInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(120);
    for (auto& x : v) x = rng() % 4 == 0 ? double(1 + rng() % 1000) : 0.0;
    auto scaled = v;
    const double k = 0.001 * double(1 + rng() % 100000);
    for (auto& x : scaled) x *= k;
    const auto a = extract_candidates(trace(v), CandidateOptions{});
    const auto b = extract_candidates(trace(scaled), CandidateOptions{});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].center_frame, b[i].center_frame);
  }
}

TEST(ExtractWindow, Bounds) {
  EXPECT_EQ(extract_window(100, 1000), (FrameRange{90, 110}));
  EXPECT_EQ(extract_window(100, 1000).size(), 21);
  EXPECT_EQ(extract_window(10, 21), (FrameRange{0, 20}));
  try {
    extract_window(5, 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowOutOfBounds);
  }
  EXPECT_THROW(extract_window(999, 1005), Error);
  EXPECT_THROW(extract_window(11, 21), Error);
}

TEST(ApplyDecisions, Examples) {
  std::vector<BlinkCandidate> c(3);
  c[0].candidate_id = "c1";
  c[1].candidate_id = "c2";
  c[2].candidate_id = "c3";
  std::vector<DecisionRecord> d = {{"c1", Decision::Accept, "r", at(0)}, {"c2", Decision::Reject, "r", at(0)}};
  auto out = apply_decisions(c, d);
  EXPECT_EQ(out.candidates[0].status, CandidateStatus::Accepted);
  EXPECT_EQ(out.candidates[1].status, CandidateStatus::Rejected);
  EXPECT_EQ(out.candidates[2].status, CandidateStatus::Pending);
  EXPECT_TRUE(out.unknown_ids.empty());

  d = {{"c1", Decision::Accept, "r", at(2)}, {"c1", Decision::Reject, "r", at(1)}};
  EXPECT_EQ(apply_decisions(c, d).candidates[0].status, CandidateStatus::Accepted);

  d = {{"c99", Decision::Accept, "r", at(0)}};
  out = apply_decisions(c, d);
  EXPECT_EQ(out.unknown_ids, std::vector<std::string>{"c99"});
  for (const auto& x : out.candidates) EXPECT_EQ(x.status, CandidateStatus::Pending);
}

TEST(ApplyDecisions, EqualTimestampsTakeLaterRow) {
  std::vector<BlinkCandidate> c(1);
  c[0].candidate_id = "c1";
  std::vector<DecisionRecord> d = {{"c1", Decision::Accept, "a", at(5)}, {"c1", Decision::Reject, "b", at(5)}};
  EXPECT_EQ(apply_decisions(c, d).candidates[0].status, CandidateStatus::Rejected);
}

TEST(ApplyDecisions, Idempotent) {
  std::mt19937_64 rng(8);
  std::vector<BlinkCandidate> c(30);
  for (std::size_t i = 0; i < c.size(); ++i) c[i].candidate_id = "c" + std::to_string(i);
  std::vector<DecisionRecord> d;
  for (int i = 0; i < 80; ++i) {
    d.push_back({"c" + std::to_string(rng() % 35), rng() % 2 ? Decision::Accept : Decision::Reject, "r",
                 at(static_cast<int>(rng() % 20))});
  }
  const auto once = apply_decisions(c, d);
  const auto twice = apply_decisions(once.candidates, d);
  EXPECT_EQ(once.candidates, twice.candidates);
}

TEST(SampleNegatives, DisjointAndMarginSeparated) {
  std::vector<FrameRange> blinks;
  for (int i = 0; i < 10; ++i) blinks.push_back(extract_window(500 + i * 1000, 10000));
  NegativeSamplingRequest req;
  req.session_id = "s";
  req.frame_count = 10000;
  req.streams = {StreamKind::RGB};
  req.blink_windows = blinks;
  req.count = 10;
  req.seed = 4;
  const auto neg = sample_negatives(req);
  ASSERT_EQ(neg.size(), 10u);
  for (std::size_t i = 0; i < neg.size(); ++i) {
    EXPECT_EQ(neg[i].label, SampleLabel::NoBlink);
    EXPECT_EQ(neg[i].frame_range.size(), kSampleFrames);
    EXPECT_GE(neg[i].frame_range.first, 0);
    EXPECT_LT(neg[i].frame_range.last, 10000);
    for (const auto& b : blinks) EXPECT_FALSE(overlaps(neg[i].frame_range, b, req.margin_frames));
    for (std::size_t j = i + 1; j < neg.size(); ++j) EXPECT_FALSE(overlaps(neg[i].frame_range, neg[j].frame_range, 0));
  }
  const auto again = sample_negatives(req);
  for (std::size_t i = 0; i < neg.size(); ++i) EXPECT_EQ(neg[i].frame_range, again[i].frame_range);
}

TEST(SampleNegatives, RandomLayoutsRespectMargins) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const FrameIndex frames = 200 + static_cast<FrameIndex>(rng() % 3000);
    std::vector<FrameRange> blinks;
    for (int k = 0; k < static_cast<int>(rng() % 8); ++k) {
      const FrameIndex c = 10 + static_cast<FrameIndex>(rng() % (frames - 20));
      blinks.push_back({c - 10, c + 10});
    }
    const FrameIndex margin = static_cast<FrameIndex>(rng() % 40);
    const auto cap = negative_capacity(frames, blinks, margin);
    NegativeSamplingRequest req;
    req.frame_count = frames;
    req.blink_windows = blinks;
    req.margin_frames = margin;
    req.count = cap;
    req.seed = rng();
    const auto neg = sample_negatives(req);
    ASSERT_EQ(neg.size(), cap);
    std::vector<bool> used(static_cast<std::size_t>(frames), false);
    for (const auto& n : neg) {
      for (const auto& b : blinks) ASSERT_FALSE(overlaps(n.frame_range, b, margin));
      for (FrameIndex f = n.frame_range.first; f <= n.frame_range.last; ++f) {
        ASSERT_FALSE(used[static_cast<std::size_t>(f)]);
        used[static_cast<std::size_t>(f)] = true;
      }
    }
    req.count = cap + 1;
    ASSERT_THROW(sample_negatives(req), Error);
  }
}

TEST(SampleNegatives, InsufficientFootage) {
  NegativeSamplingRequest req;
  req.frame_count = 30;
  req.count = 5;
  req.margin_frames = 30;
  try {
    sample_negatives(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientNegativeFootage);
  }
}

TEST(SampleNegatives, BalancedAgainstAccepted) {
  SessionManifest m;
  m.session_id = "s";
  m.streams = {{StreamKind::RGB, "rgb", 5000}};
  std::vector<LabeledSample> accepted;
  for (int i = 0; i < 12; ++i) {
    LabeledSample s;
    s.label = SampleLabel::Blink;
    s.session_id = "s";
    s.frame_range = extract_window(100 + 400 * i, 5000);
    accepted.push_back(s);
  }
  const auto neg = sample_negatives(accepted, m, accepted.size(), 15, 1);
  EXPECT_EQ(neg.size(), accepted.size());
}

TEST(CandidateFiles, RoundTrip) {
  TempDir dir;
  std::vector<BlinkCandidate> c = {{"s_c00001", "s", 2.5, 75, 40.25, CandidateStatus::Pending},
                                   {"s_c00002", "s", 9, 270, 0.1 + 0.2, CandidateStatus::Accepted}};
  save_candidates(c, dir / "c.csv");
  EXPECT_EQ(load_candidates(dir / "c.csv"), c);
  EXPECT_EQ(blinkkit::testing::read_text(dir / "c.csv").substr(0, 52),
            "candidate_id,session_id,t_eeg,center_frame,strength,");
}

TEST(DecisionFiles, AppendAndReload) {
  TempDir dir;
  const auto path = dir / "d.csv";
  append_decision({"c1", Decision::Accept, "ana", at(0)}, path);
  append_decision({"c2", Decision::Reject, "bo", at(1)}, path);
  const auto text = blinkkit::testing::read_text(path);
  EXPECT_EQ(text, decision_csv_header() + "c1,accept,ana,2023-11-14T22:13:20.000Z\n" +
                      "c2,reject,bo,2023-11-14T22:13:21.000Z\n");
  const auto d = load_decisions(path);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[1].decision, Decision::Reject);
  EXPECT_EQ(d[1].decided_at, at(1));
  EXPECT_THROW(load_decisions(dir / "absent.csv"), Error);
}

TEST(Dataset, CountingArithmetic) {
  EXPECT_EQ(images_per_sample(3), 126u);
  EXPECT_EQ(6000 * images_per_sample(3), 756000u);
  EXPECT_EQ(images_per_sample(1), 42u);
}

TEST(Dataset, ZeroAcceptedIsEmpty) {
  SessionManifest m;
  m.session_id = "s";
  m.streams = {{StreamKind::RGB, "rgb", 1000}};
  std::vector<BlinkCandidate> c = {{"s_c1", "s", 5, 150, 10, CandidateStatus::Pending}};
  DatasetOptions o;
  o.dry_run = true;
  const auto sum = build_dataset(std::span(&m, 1), c, {}, "unused", o);
  EXPECT_EQ(sum.blink_count, 0u);
  EXPECT_EQ(sum.no_blink_count, 0u);
  EXPECT_EQ(sum.image_count, 0u);
}

TEST(Dataset, PendingAndRejectedHandling) {
  SessionManifest m;
  m.session_id = "s";
  m.streams = {{StreamKind::RGB, "rgb", 400}, {StreamKind::NIR_LEFT, "nl", 400}};
  std::vector<BlinkCandidate> c = {{"a", "s", 0, 100, 10, CandidateStatus::Pending},
                                   {"b", "s", 0, 5, 10, CandidateStatus::Pending},
                                   {"r", "s", 0, 300, 10, CandidateStatus::Pending}};
  std::vector<DecisionRecord> d = {{"a", Decision::Accept, "x", at(0)},
                                   {"b", Decision::Accept, "x", at(0)},
                                   {"r", Decision::Reject, "x", at(0)}};
  DatasetOptions o;
  o.dry_run = true;
  const auto sum = build_dataset(std::span(&m, 1), c, d, "unused", o);
  EXPECT_EQ(sum.blink_count, 1u);
  EXPECT_EQ(sum.no_blink_count, 1u);
  EXPECT_EQ(sum.image_count, 2 * images_per_sample(2));
  ASSERT_EQ(sum.dropped.size(), 1u);
  EXPECT_EQ(sum.dropped[0].id, "b");
  for (const auto& s : sum.samples) {
    EXPECT_EQ(s.frame_range.size(), kSampleFrames);
    if (s.label == SampleLabel::Blink) EXPECT_EQ(s.frame_range.first + kSampleHalfWidth, 100);
  }
}

TEST(Dataset, WritesLayoutFromRenderedSession) {
  TempDir dir;
  SyntheticSessionSpec spec;
  spec.session_id = "syn";
  spec.duration = 8;
  spec.blink_times = {2.0, 5.0};
  spec.seed = 3;
  const auto session = gen_session(spec);
  SessionWriteOptions wo;
  wo.render_frames = true;
  const auto manifest = load_session(write_session(session, dir / "syn", wo));
  CandidateOptions co;
  co.session_id = "syn";
  const auto cand = extract_candidates(load_eeg(manifest.eeg_path), co);
  ASSERT_EQ(cand.size(), 2u);
  std::vector<DecisionRecord> d;
  for (const auto& c : cand) d.push_back({c.candidate_id, Decision::Accept, "t", at(0)});
  TemplateLandmarkAdapter adapter;
  DatasetOptions o;
  o.adapter = &adapter;
  o.seed = 9;
  const auto sum = build_dataset(std::span(&manifest, 1), cand, d, dir / "ds", o);
  EXPECT_EQ(sum.blink_count, 2u);
  EXPECT_EQ(sum.no_blink_count, 2u);
  EXPECT_TRUE(sum.dropped.empty());
  EXPECT_EQ(sum.image_count, 4 * images_per_sample(1));
  const auto sample_dir = dir / "ds" / "blink" / cand[0].candidate_id;
  EXPECT_TRUE(std::filesystem::exists(sample_dir / "sample.json"));
  for (const char* f : {"face_00.png", "left_eye_10.png", "right_eye_20.png"}) {
    EXPECT_TRUE(std::filesystem::exists(sample_dir / "rgb" / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "ds" / "summary.json"));

  const auto crops = load_dataset_crops(dir / "ds");
  // 2 blink samples x 3 centre frames x 2 eyes + 2 no-blink x 21 x 2
  EXPECT_EQ(crops.size(), 2u * 3 * 2 + 2u * 21 * 2);
  EXPECT_EQ(std::count_if(crops.begin(), crops.end(), [](const LabeledCrop& c) { return c.closed; }), 12);
}
