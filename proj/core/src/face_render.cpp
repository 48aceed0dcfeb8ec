#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "blinkkit/random.hpp"
#include "blinkkit/synthdata.hpp"

namespace blinkkit {

EyeAppearance EyeAppearance::from_seed(std::uint64_t seed) {
  rnd::Engine rng(rnd::mix(seed, 0xa11));
  EyeAppearance a;
  const cv::Vec3d light(170, 190, 225), dark(70, 95, 135);
  const double tone = rnd::unit(rng);
  for (int c = 0; c < 3; ++c) a.skin[c] = light[c] + (dark[c] - light[c]) * tone + rnd::uniform(rng, -8, 8);
  static const cv::Vec3d irises[] = {{30, 60, 100}, {150, 110, 60}, {80, 120, 70}, {25, 35, 50}, {110, 100, 90}};
  a.iris = irises[rnd::index(rng, std::size(irises))];
  for (int c = 0; c < 3; ++c) a.iris[c] = std::clamp(a.iris[c] + rnd::uniform(rng, -12, 12), 0.0, 255.0);
  const double brow = rnd::uniform(rng, 25, 70);
  a.brow = {brow, brow * 1.1, brow * 1.2};
  a.rest_openness = rnd::uniform(rng, 0.8, 1.0);
  return a;
}

namespace {

// Coverage of a shape edge given a signed distance (negative inside) and the pixel size.
double cover(double d, double px) { return std::clamp(0.5 - d / px, 0.0, 1.0); }

void blend(cv::Vec3d& dst, const cv::Vec3d& src, double alpha) {
  if (alpha > 0.0) dst = dst * (1.0 - alpha) + src * alpha;
}

}  // namespace

void draw_eye(cv::Mat& canvas, cv::Point2d center, double half_width, const EyeDrawParams& p) {
  CV_Assert(canvas.type() == CV_8UC3 && half_width > 0.0);
  const double b = half_width;
  const double px = 1.0 / b;
  const double o = std::clamp(p.openness, 0.0, 1.0);
  // Inner corner points towards the nose: image-right for the image-left eye.
  const double inner = p.side == EyeSide::Left ? 1.0 : -1.0;
  const auto& look = p.appearance;
  const cv::Vec3d sclera(222, 226, 230), pupil(18, 18, 22), glint(250, 250, 250), lash(28, 28, 34);
  const cv::Vec3d caruncle(135, 135, 205);

  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - 1.5 * b)));
  const int x1 = std::min(canvas.cols, static_cast<int>(std::ceil(center.x + 1.5 * b)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - 2.1 * b)));
  const int y1 = std::min(canvas.rows, static_cast<int>(std::ceil(center.y + 1.0 * b)));
  for (int y = y0; y < y1; ++y) {
    auto* row = canvas.ptr<cv::Vec3b>(y);
    for (int x = x0; x < x1; ++x) {
      const double u = (x + 0.5 - center.x) / b;
      const double v = (y + 0.5 - center.y) / b;
      const double arch = std::max(0.0, 1.0 - u * u);
      const double y_lo = 0.32 * arch;
      const double y_up = (0.32 - 0.84 * o) * arch;

      cv::Vec3d col = look.skin;
      // Brow.
      const double v_brow = -1.65 + 0.12 * u * u;
      const double brow_taper = std::clamp((1.35 - std::abs(u)) / 0.25, 0.0, 1.0);
      blend(col, look.brow, brow_taper * cover(std::abs(v - v_brow) - 0.15, px));
      // Eyelid skin and crease (fixed, so lid motion only changes the opening).
      const double v_crease = -0.62 + 0.25 * u * u;
      if (v > v_crease && v < y_up && std::abs(u) < 1.0) blend(col, look.skin * 0.93, 1.0);
      const double crease_taper = std::clamp((1.15 - std::abs(u)) / 0.3, 0.0, 1.0);
      blend(col, look.skin * 0.72, crease_taper * cover(std::abs(v - v_crease) - 0.04, px));
      // Opening: sclera, iris, pupil, glint, caruncle.
      const double d_open = std::max({y_up - v, v - y_lo, std::abs(u) - 1.0});
      const double a_open = cover(d_open, px);
      if (a_open > 0.0) {
        cv::Vec3d eye = sclera;
        const double d_iris = std::hypot(u - p.iris_x, v - p.iris_y);
        blend(eye, look.iris, cover(d_iris - 0.42, px));
        blend(eye, look.iris * 0.6, cover(std::abs(d_iris - 0.40) - 0.03, px));
        blend(eye, pupil, cover(d_iris - 0.17, px));
        blend(eye, glint, cover(std::hypot(u - p.iris_x - 0.12, v - p.iris_y + 0.14) - 0.07, px));
        blend(eye, caruncle, cover(std::hypot(u - 0.9 * inner, v - 0.06) - 0.1, px));
        blend(col, eye, a_open);
      }
      // Lid margins: lashes on the upper lid (heavier towards the outer corner), a faint lower line.
      if (std::abs(u) < 1.05) {
        const double outer = std::clamp(-u * inner, 0.0, 1.0);
        blend(col, lash, cover(std::abs(v - y_up) - (0.05 + 0.05 * outer), px));
        blend(col, look.skin * 0.75, 0.6 * cover(std::abs(v - y_lo) - 0.03, px));
      }
      col *= p.illumination;
      row[x] = cv::Vec3b(cv::saturate_cast<uchar>(col[0]), cv::saturate_cast<uchar>(col[1]),
                         cv::saturate_cast<uchar>(col[2]));
    }
  }
}

RenderedFace render_face_frame(const FaceFrameSpec& spec) {
  CV_Assert(spec.frame_size.width > 0 && spec.frame_size.height > 0 && spec.face_width > 0);
  RenderedFace out;
  cv::Mat img(spec.frame_size, CV_8UC3, cv::Scalar(spec.background[0], spec.background[1], spec.background[2]));
  const int fw = spec.face_width;
  const int fh = static_cast<int>(std::lround(kFaceAspect * fw));
  const cv::Vec3d skin = spec.appearance.skin * spec.illumination;
  const cv::Rect face = cv::Rect(spec.face_origin, cv::Size(fw, fh)) & cv::Rect(cv::Point(), spec.frame_size);
  img(face).setTo(cv::Scalar(skin[0], skin[1], skin[2]));

  const auto at = [&](double tx, double ty) {
    return cv::Point2d(spec.face_origin.x + tx * fw, spec.face_origin.y + ty * fh);
  };
  const auto& shape = face_template();
  for (int i = 0; i < kLandmarkCount; ++i) out.landmarks.points[i] = at(shape[i].x, shape[i].y);
  out.landmarks.confidence = 1.0;

  // Nose and mouth, then the eyes.
  const cv::Vec3d shade = skin * 0.78;
  cv::line(img, at(0.5, 0.46), at(0.5, 0.65), cv::Scalar(shade[0], shade[1], shade[2]), std::max(1, fw / 60),
           cv::LINE_AA);
  const cv::Point2d mouth = at(0.5, 0.8);
  cv::ellipse(img, mouth, cv::Size2d(0.15 * fw, 0.035 * fh), 0, 0, 360,
              cv::Scalar(skin[0] * 0.6, skin[1] * 0.55, skin[2] * 0.85), cv::FILLED, cv::LINE_AA);

  const double half_width = 0.09 * fw;
  EyeDrawParams params;
  params.iris_x = spec.iris_x;
  params.iris_y = spec.iris_y;
  params.illumination = spec.illumination;
  params.appearance = spec.appearance;
  params.side = EyeSide::Left;
  params.openness = spec.left_openness;
  draw_eye(img, at(0.32, 0.42), half_width, params);
  params.side = EyeSide::Right;
  params.openness = spec.right_openness;
  draw_eye(img, at(0.68, 0.42), half_width, params);

  if (spec.noise_level > 0.0) {
    rnd::Engine rng(rnd::mix(spec.seed, 0xf4ce));
    for (int y = 0; y < img.rows; ++y) {
      auto* row = img.ptr<uchar>(y);
      for (int i = 0; i < img.cols * 3; ++i) {
        row[i] = cv::saturate_cast<uchar>(row[i] + spec.noise_level * rnd::normal(rng));
      }
    }
  }
  out.image = img;
  return out;
}

}  // namespace blinkkit
