#include <gtest/gtest.h>

#include <random>

#include <opencv2/imgproc.hpp>

#include "blinkkit/error.hpp"
#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/synthdata.hpp"
#include "test_util.hpp"

using namespace blinkkit;

namespace {

LandmarkSet eyes_at(cv::Rect2d left, cv::Rect2d right) {
  LandmarkSet l;
  for (auto& p : l.points) p = {left.x, left.y};
  auto fill = [&](int first, cv::Rect2d r) {
    const cv::Point2d pts[6] = {{r.x, r.y + r.height / 2},     {r.x + r.width / 3, r.y},
                                {r.x + 2 * r.width / 3, r.y},  {r.x + r.width, r.y + r.height / 2},
                                {r.x + 2 * r.width / 3, r.y + r.height}, {r.x + r.width / 3, r.y + r.height}};
    for (int i = 0; i < 6; ++i) l.points[first + i] = pts[i];
  };
  fill(kLeftEyeFirst, left);
  fill(kRightEyeFirst, right);
  return l;
}

// Independent box rule: hull grown by pad * longest side.
Box oracle_box(cv::Rect2d r, double pad) {
  const double m = pad * std::max(r.width, r.height);
  return {r.x - m, r.y - m, r.x + r.width + m, r.y + r.height + m};
}

class FixedAdapter : public LandmarkAdapter {
 public:
  explicit FixedAdapter(std::optional<RawLandmarks> out) : out_(std::move(out)) {}
  std::optional<RawLandmarks> locate(const cv::Mat&) const override { return out_; }
  std::string name() const override { return "fixed"; }

 private:
  std::optional<RawLandmarks> out_;
};

}  // namespace

TEST(EyeBoxes, PaddingRule) {
  const auto l = eyes_at({100, 100, 40, 15}, {200, 100, 40, 15});
  const auto [left, right] = eye_boxes_from_landmarks(l, 0.5);
  EXPECT_EQ(left.bbox, (Box{80, 80, 160, 135}));
  EXPECT_EQ(left.side, EyeSide::Left);
  EXPECT_EQ(right.side, EyeSide::Right);
  const auto [l0, r0] = eye_boxes_from_landmarks(l, 0.0);
  EXPECT_EQ(l0.bbox, (Box{100, 100, 140, 115}));
}

TEST(EyeBoxes, ClampedToFrame) {
  const auto l = eyes_at({2, 3, 40, 15}, {100, 100, 40, 15});
  const auto [left, right] = eye_boxes_from_landmarks(l, 0.5, cv::Size(130, 120));
  EXPECT_EQ(left.bbox.x0, 0);
  EXPECT_EQ(left.bbox.y0, 0);
  EXPECT_EQ(right.bbox.x1, 130);
  EXPECT_EQ(right.bbox.y1, 120);
}

TEST(EyeBoxes, Errors) {
  LandmarkSet flat = eyes_at({100, 100, 40, 15}, {200, 100, 40, 15});
  for (int i = 0; i < 6; ++i) flat.points[kLeftEyeFirst + i] = {120, 107};
  try {
    eye_boxes_from_landmarks(flat, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateBox);
  }
  const auto far = eyes_at({1000, 1000, 40, 15}, {1100, 1000, 40, 15});
  try {
    eye_boxes_from_landmarks(far, 0.5, cv::Size(320, 240));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyIntersection);
  }
}

TEST(EyeBoxes, MatchesOracleAndIsTranslationEquivariant) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 300.0), s(2.0, 60.0), pad(0.0, 1.0), shift(-50.0, 50.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const cv::Rect2d lr{u(rng), u(rng), s(rng), s(rng)}, rr{u(rng) + 400, u(rng), s(rng), s(rng)};
    const double p = pad(rng);
    const auto [a, b] = eye_boxes_from_landmarks(eyes_at(lr, rr), p);
    const auto ol = oracle_box(lr, p), orr = oracle_box(rr, p);
    EXPECT_NEAR(a.bbox.x0, ol.x0, 1e-9);
    EXPECT_NEAR(a.bbox.y1, ol.y1, 1e-9);
    EXPECT_NEAR(b.bbox.x1, orr.x1, 1e-9);
    EXPECT_NEAR(b.bbox.y0, orr.y0, 1e-9);
    const double dx = shift(rng), dy = shift(rng);
    const auto [a2, b2] = eye_boxes_from_landmarks(
        eyes_at({lr.x + dx, lr.y + dy, lr.width, lr.height}, {rr.x + dx, rr.y + dy, rr.width, rr.height}), p);
    EXPECT_NEAR(a2.bbox.x0 - a.bbox.x0, dx, 1e-9);
    EXPECT_NEAR(b2.bbox.y1 - b.bbox.y1, dy, 1e-9);
  }
}

TEST(EyeBoxes, DisjointWhenPadFitsGap) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> s(5.0, 40.0), gap(1.0, 80.0);
  for (int trial = 0; trial < 500; ++trial) {
    const cv::Rect2d lr{100, 100, s(rng), s(rng)};
    const double g = gap(rng);
    const cv::Rect2d rr{lr.x + lr.width + g, 100, s(rng), s(rng)};
    const double longest = std::max({lr.width, lr.height, rr.width, rr.height});
    const double p = std::min(0.5, 0.49 * g / longest);
    const auto [a, b] = eye_boxes_from_landmarks(eyes_at(lr, rr), p);
    EXPECT_LT(a.bbox.x1, b.bbox.x0);
  }
}

TEST(CropAndResize, ConstantGray) {
  cv::Mat img(200, 200, CV_8UC3, cv::Scalar(128, 128, 128));
  const auto crop = crop_and_resize(img, {EyeSide::Right, {50, 50, 100, 100}});
  EXPECT_EQ(crop.side, EyeSide::Right);
  ASSERT_EQ(crop.pixels.size(), static_cast<std::size_t>(EyeCrop::kValues));
  for (float v : crop.pixels) EXPECT_FLOAT_EQ(v, 128.0f / 255.0f);
}

TEST(CropAndResize, DownsamplesAndKeepsSource) {
  cv::Mat img(300, 300, CV_8UC3);
  cv::randu(img, 0, 255);
  const auto crop = crop_and_resize(img, {EyeSide::Left, {0, 0, 100, 100}}, FrameRef{StreamKind::NIR_LEFT, 7});
  EXPECT_NO_THROW(validate(crop));
  EXPECT_EQ(crop.source.frame_index, 7);
  EXPECT_EQ(crop.source.stream_kind, StreamKind::NIR_LEFT);
}

TEST(CropAndResize, OutsideFrame) {
  cv::Mat img(100, 100, CV_8UC3, cv::Scalar::all(10));
  try {
    crop_and_resize(img, {EyeSide::Left, {200, 200, 240, 230}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyIntersection);
  }
}

TEST(CropAndResize, ShapeAndRangeForAnyGeometry) {
  std::mt19937_64 rng(6);
  cv::Mat img(120, 160, CV_8UC3);
  cv::randu(img, 0, 256);
  std::uniform_real_distribution<double> pos(-30.0, 170.0), size(0.5, 200.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double x = pos(rng), y = pos(rng);
    const Box b{x, y, x + size(rng), y + size(rng)};
    if (b.x1 <= 0 || b.y1 <= 0 || b.x0 >= 160 || b.y0 >= 120) continue;
    const auto crop = crop_and_resize(img, {EyeSide::Left, b});
    ASSERT_NO_THROW(validate(crop));
  }
}

TEST(EyeCropValidation, RejectsOutOfRange) {
  EyeCrop c;
  EXPECT_NO_THROW(validate(c));
  c.pixels[5] = 1.2f;
  EXPECT_THROW(validate(c), Error);
  c.pixels[5] = std::nanf("");
  EXPECT_THROW(validate(c), Error);
  c.pixels.resize(10);
  EXPECT_THROW(validate(c), Error);
}

TEST(EyeCrop, MirrorTwiceIsIdentity) {
  SyntheticEyeSpec spec;
  spec.seed = 4;
  spec.iris_x = 0.25;
  const auto c = render_eye(spec).crop;
  const auto m = mirror_horizontal(c);
  EXPECT_EQ(m.at(3, 0, 1), c.at(3, 49, 1));
  EXPECT_EQ(mirror_horizontal(m).pixels, c.pixels);
  const auto back = from_image(to_bgr8(c), EyeSide::Left);
  for (std::size_t i = 0; i < c.pixels.size(); ++i) ASSERT_NEAR(back.pixels[i], c.pixels[i], 0.5 / 255 + 1e-6);
}

TEST(DetectLandmarks, SyntheticFaceEyesInsideBoxes) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FaceFrameSpec spec;
    spec.seed = seed;
    spec.face_origin = {60 + static_cast<int>(seed) * 5, 20};
    spec.face_width = 130 + static_cast<int>(seed) * 3;
    spec.appearance = EyeAppearance::from_seed(seed);
    const auto face = render_face_frame(spec);
    TemplateLandmarkAdapter adapter;
    const auto found = detect_landmarks(adapter, face.image);
    const auto [fl, fr] = eye_boxes_from_landmarks(found, 0.5, face.image.size());
    for (int i = 0; i < kEyePointCount; ++i) {
      const auto& pl = face.landmarks.points[kLeftEyeFirst + i];
      const auto& pr = face.landmarks.points[kRightEyeFirst + i];
      EXPECT_TRUE(pl.x > fl.bbox.x0 && pl.x < fl.bbox.x1 && pl.y > fl.bbox.y0 && pl.y < fl.bbox.y1) << seed;
      EXPECT_TRUE(pr.x > fr.bbox.x0 && pr.x < fr.bbox.x1 && pr.y > fr.bbox.y0 && pr.y < fr.bbox.y1) << seed;
    }
    const auto again = detect_landmarks(adapter, face.image);
    EXPECT_EQ(again.points, found.points);
  }
}

TEST(DetectLandmarks, BlankImageHasNoFace) {
  cv::Mat blank(240, 320, CV_8UC3, cv::Scalar(70, 45, 30));
  TemplateLandmarkAdapter adapter;
  try {
    detect_landmarks(adapter, blank);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFaceFound);
  }
}

TEST(DetectLandmarks, AdapterContract) {
  cv::Mat img(10, 10, CV_8UC3, cv::Scalar::all(0));
  RawLandmarks bad;
  bad.points.assign(67, {1, 1});
  try {
    detect_landmarks(FixedAdapter(bad), img);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AdapterFailure);
  }
  bad.points.assign(68, {1, 1});
  bad.points[3].x = std::numeric_limits<double>::infinity();
  EXPECT_THROW(detect_landmarks(FixedAdapter(bad), img), Error);
  EXPECT_THROW(detect_landmarks(FixedAdapter(std::nullopt), img), Error);
  RawLandmarks good;
  good.points.assign(68, {1, 1});
  good.confidence = 0.7;
  EXPECT_DOUBLE_EQ(detect_landmarks(FixedAdapter(good), img).confidence, 0.7);
}

TEST(LandmarkJson, Parsing) {
  std::string pts = "[";
  for (int i = 0; i < 68; ++i) pts += (i ? "," : "") + std::string("[") + std::to_string(i) + ",2.5]";
  pts += "]";
  const auto parsed = parse_landmark_json(R"({"points": )" + pts + R"(, "confidence": 0.9})");
  ASSERT_TRUE(parsed);
  EXPECT_EQ(parsed->points.size(), 68u);
  EXPECT_DOUBLE_EQ(parsed->points[67].x, 67);
  EXPECT_DOUBLE_EQ(parsed->confidence, 0.9);
  EXPECT_FALSE(parse_landmark_json("null"));
  EXPECT_FALSE(parse_landmark_json(R"({"points": []})"));
  EXPECT_THROW(parse_landmark_json("{oops"), Error);
}

TEST(LandmarkAdapterFactory, Specs) {
  EXPECT_EQ(make_landmark_adapter("template")->name(), "template");
  EXPECT_EQ(make_landmark_adapter("command:/bin/true")->name(), "command:/bin/true");
  EXPECT_THROW(make_landmark_adapter("dlib"), Error);
}

TEST(CommandAdapter, RunsExecutable) {
  blinkkit::testing::TempDir dir;
  std::string pts;
  for (int i = 0; i < 68; ++i) pts += (i ? "," : "") + std::string("[") + std::to_string(i) + "," + std::to_string(i + 1) + "]";
  const auto script = dir / "lm.sh";
  blinkkit::testing::write_text(script, "#!/bin/sh\ntest -f \"$1\" || exit 3\necho '{\"points\": [" + pts + "], \"confidence\": 0.8}'\n");
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  cv::Mat img(20, 20, CV_8UC3, cv::Scalar::all(0));
  const auto l = detect_landmarks(CommandLandmarkAdapter(script.string()), img);
  EXPECT_DOUBLE_EQ(l.points[10].y, 11);
  EXPECT_DOUBLE_EQ(l.confidence, 0.8);

  const auto none = dir / "none.sh";
  blinkkit::testing::write_text(none, "#!/bin/sh\necho null\n");
  std::filesystem::permissions(none, std::filesystem::perms::owner_all);
  try {
    detect_landmarks(CommandLandmarkAdapter(none.string()), img);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFaceFound);
  }
  const auto fail = dir / "fail.sh";
  blinkkit::testing::write_text(fail, "#!/bin/sh\nexit 1\n");
  std::filesystem::permissions(fail, std::filesystem::perms::owner_all);
  try {
    detect_landmarks(CommandLandmarkAdapter(fail.string()), img);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AdapterFailure);
  }
}
