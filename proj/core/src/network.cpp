#include "blinkkit/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "blinkkit/error.hpp"

namespace blinkkit {

namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

constexpr float kAdamBeta1 = 0.9f;
constexpr float kAdamBeta2 = 0.999f;
constexpr float kAdamEpsilon = 1e-8f;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;
  Mat v;

  Param() = default;
  Param(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        m(Mat::Zero(rows, cols)),
        v(Mat::Zero(rows, cols)) {}
};

// Same-padded 3x3 patches: row (b, y, x), columns (ky, kx, c).
template <int C>
void im2col_fixed(const float* in, int batch, int h, int w, int c, float* out) {
  const int cc = C > 0 ? C : c;
  const Eigen::Index row_len = 9 * cc;
  for (int b = 0; b < batch; ++b) {
    const float* img = in + static_cast<Eigen::Index>(b) * h * w * cc;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float* row = out + ((static_cast<Eigen::Index>(b) * h + y) * w + x) * row_len;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            float* dst = row + (ky * 3 + kx) * cc;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              for (int k = 0; k < cc; ++k) dst[k] = 0.0f;
            } else {
              const float* src = img + (static_cast<Eigen::Index>(sy) * w + sx) * cc;
              for (int k = 0; k < cc; ++k) dst[k] = src[k];
            }
          }
        }
      }
    }
  }
}

void im2col(const float* in, int batch, int h, int w, int c, Mat& cols) {
  cols.resize(static_cast<Eigen::Index>(batch) * h * w, 9 * c);
  switch (c) {
    case 3: im2col_fixed<3>(in, batch, h, w, c, cols.data()); break;
    case 32: im2col_fixed<32>(in, batch, h, w, c, cols.data()); break;
    default: im2col_fixed<0>(in, batch, h, w, c, cols.data()); break;
  }
}

// act = max(0, act + bias), one pass.
void bias_relu(Mat& act, const Mat& bias) {
  const Eigen::Index rows = act.rows(), cols = act.cols();
  const float* b = bias.data();
  for (Eigen::Index r = 0; r < rows; ++r) {
    float* a = act.data() + r * cols;
    for (Eigen::Index k = 0; k < cols; ++k) a[k] = std::max(a[k] + b[k], 0.0f);
  }
}

void col2im(const Mat& dcols, int batch, int h, int w, int c, Mat& din) {
  din.setZero(static_cast<Eigen::Index>(batch) * h * w, c);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float* row = dcols.data() + ((static_cast<Eigen::Index>(b) * h + y) * w + x) * 9 * c;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= w) continue;
            float* dst = din.data() + ((static_cast<Eigen::Index>(b) * h + sy) * w + sx) * c;
            const float* src = row + (ky * 3 + kx) * c;
            for (int k = 0; k < c; ++k) dst[k] += src[k];
          }
        }
      }
    }
  }
}

// 2x2 stride-2 max pooling, odd trailing row/column dropped.
void maxpool(const Mat& in, int batch, int h, int w, int c, Mat& out, std::vector<int>* argmax) {
  const int oh = h / 2, ow = w / 2;
  out.resize(static_cast<Eigen::Index>(batch) * oh * ow, c);
  if (!argmax) {
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          float* dst = out.data() + ((static_cast<Eigen::Index>(b) * oh + y) * ow + x) * c;
          const float* p00 = in.data() + ((static_cast<Eigen::Index>(b) * h + 2 * y) * w + 2 * x) * c;
          const float* p01 = p00 + c;
          const float* p10 = p00 + static_cast<Eigen::Index>(w) * c;
          const float* p11 = p10 + c;
          for (int k = 0; k < c; ++k) dst[k] = std::max(std::max(p00[k], p01[k]), std::max(p10[k], p11[k]));
        }
      }
    }
    return;
  }
  argmax->resize(static_cast<std::size_t>(out.size()));
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const Eigen::Index orow = (static_cast<Eigen::Index>(b) * oh + y) * ow + x;
        float* dst = out.data() + orow * c;
        int* arg = argmax ? argmax->data() + orow * c : nullptr;
        const Eigen::Index r00 = (static_cast<Eigen::Index>(b) * h + 2 * y) * w + 2 * x;
        const Eigen::Index rows[4] = {r00, r00 + 1, r00 + w, r00 + w + 1};
        for (int k = 0; k < c; ++k) {
          float best = in.data()[rows[0] * c + k];
          Eigen::Index best_row = rows[0];
          for (int q = 1; q < 4; ++q) {
            const float v = in.data()[rows[q] * c + k];
            if (v > best) {
              best = v;
              best_row = rows[q];
            }
          }
          dst[k] = best;
          if (arg) arg[k] = static_cast<int>(best_row * c + k);
        }
      }
    }
  }
}

void unpool(const Mat& dout, const std::vector<int>& argmax, Eigen::Index in_rows, int c, Mat& din) {
  din.setZero(in_rows, c);
  float* dst = din.data();
  const float* src = dout.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) dst[argmax[i]] += src[i];
}

double sigmoid_open(double z) {
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigViolation, what); };
  if (c.input_size != 50 || c.input_channels != 3) fail("input must be 50x50x3");
  if (c.kernel != 3) fail("convolution kernels must be 3x3");
  if (c.pool_stages != 3) fail("exactly 3 conv stages, each followed by one pooling stage");
  for (int f : c.conv_filters) {
    if (f <= 0) fail("conv filter counts must be positive");
  }
  if (c.dense_units <= 0) fail("dense_units must be positive");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  if (c.output_units != 1) fail("output must be a single sigmoid unit");
}

struct BlinkNet::Impl {
  ModelConfig config;
  // Spatial size and channel count entering each conv stage, and after the last pool.
  int size[4] = {50, 25, 12, 6};
  int channels[4] = {3, 32, 32, 64};
  Param conv_w[3];
  Param conv_b[3];
  Param dense1_w, dense1_b, dense2_w, dense2_b;
  long step = 0;

  // Training workspace, reused across steps.
  // Scratch buffers are never copied with the model.
  struct Workspace {
    Workspace() = default;
    Workspace(const Workspace&) {}
    Workspace& operator=(const Workspace&) { return *this; }

    Mat cols[3];
    Mat act[3];     // post-ReLU conv outputs
    Mat pooled[3];  // pool outputs
    std::vector<int> argmax[3];
    Mat hidden, dropped, mask, logit;
    Mat grad_a, grad_cols, grad_in, grad_hidden, grad_flat;
  } ws;

  explicit Impl(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
    validate(config);
    for (int i = 0; i < 3; ++i) channels[i + 1] = config.conv_filters[i];
    rnd::Engine rng(seed);
    for (int i = 0; i < 3; ++i) {
      const int fan_in = 9 * channels[i];
      conv_w[i] = Param("conv" + std::to_string(i + 1) + ".weight", fan_in, channels[i + 1]);
      conv_b[i] = Param("conv" + std::to_string(i + 1) + ".bias", 1, channels[i + 1]);
      he_init(conv_w[i].value, fan_in, rng);
    }
    const int flat = flat_size();
    dense1_w = Param("dense1.weight", flat, config.dense_units);
    dense1_b = Param("dense1.bias", 1, config.dense_units);
    he_init(dense1_w.value, flat, rng);
    dense2_w = Param("dense2.weight", config.dense_units, 1);
    dense2_b = Param("dense2.bias", 1, 1);
    const double limit = std::sqrt(6.0 / (config.dense_units + 1));
    for (Eigen::Index i = 0; i < dense2_w.value.size(); ++i) {
      dense2_w.value.data()[i] = static_cast<float>(rnd::uniform(rng, -limit, limit));
    }
  }

  int flat_size() const { return size[3] * size[3] * channels[3]; }

  static void he_init(Mat& w, int fan_in, rnd::Engine& rng) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rnd::normal(rng) * stddev);
  }

  std::vector<Param*> params() {
    return {&conv_w[0], &conv_b[0], &conv_w[1], &conv_b[1], &conv_w[2], &conv_b[2],
            &dense1_w,  &dense1_b,  &dense2_w,  &dense2_b};
  }

  // Conv stages into `ws`-like buffers; returns the flattened pooled features (batch x flat).
  void features(const float* input, int batch, Mat* cols, Mat* act, Mat* pooled,
                std::vector<int>* argmax) const {
    const float* in = input;
    for (int i = 0; i < 3; ++i) {
      const int s = size[i];
      im2col(in, batch, s, s, channels[i], cols[i]);
      act[i].noalias() = cols[i] * conv_w[i].value;
      bias_relu(act[i], conv_b[i].value);
      maxpool(act[i], batch, s, s, channels[i + 1], pooled[i], argmax ? &argmax[i] : nullptr);
      in = pooled[i].data();
    }
  }

  void infer_logits(const float* input, int batch, float* out) const {
    // Per-thread scratch; fresh buffers per chunk cost more in page faults than in compute.
    thread_local struct {
      Mat cols[3], act[3], pooled[3], hidden, logit;
    } s;
    features(input, batch, s.cols, s.act, s.pooled, nullptr);
    ConstMatMap flat(s.pooled[2].data(), batch, flat_size());
    auto& hidden = s.hidden;
    hidden.noalias() = flat * dense1_w.value;
    hidden.rowwise() += dense1_b.value.row(0);
    hidden = hidden.cwiseMax(0.0f);
    auto& logit = s.logit;
    logit.noalias() = hidden * dense2_w.value;
    for (int b = 0; b < batch; ++b) out[b] = logit(b, 0) + dense2_b.value(0, 0);
  }

  double train_step(const float* input, const float* labels, int batch, float lr, rnd::Engine& rng,
                    std::vector<double>* probs) {
    auto& w = ws;
    features(input, batch, w.cols, w.act, w.pooled, w.argmax);
    const int flat_n = flat_size();
    ConstMatMap flat(w.pooled[2].data(), batch, flat_n);

    w.hidden.noalias() = flat * dense1_w.value;
    w.hidden.rowwise() += dense1_b.value.row(0);
    w.hidden = w.hidden.cwiseMax(0.0f);

    const float keep = 1.0f - static_cast<float>(config.dropout_rate);
    w.mask.resize(batch, config.dense_units);
    for (Eigen::Index i = 0; i < w.mask.size(); ++i) {
      w.mask.data()[i] = rnd::unit(rng) < keep ? 1.0f / keep : 0.0f;
    }
    w.dropped = w.hidden.cwiseProduct(w.mask);
    w.logit.noalias() = w.dropped * dense2_w.value;

    Mat grad_logit(batch, 1);
    double loss = 0.0;
    if (probs) probs->resize(batch);
    for (int b = 0; b < batch; ++b) {
      const double z = static_cast<double>(w.logit(b, 0)) + dense2_b.value(0, 0);
      const double y = labels[b];
      loss += bce_with_logit(z, y);
      const double p = sigmoid_open(z);
      if (probs) (*probs)[b] = p;
      grad_logit(b, 0) = static_cast<float>((p - y) / batch);
    }

    dense2_w.grad.noalias() = w.dropped.transpose() * grad_logit;
    dense2_b.grad(0, 0) = grad_logit.sum();
    w.grad_hidden.noalias() = grad_logit * dense2_w.value.transpose();
    w.grad_hidden = w.grad_hidden.cwiseProduct(w.mask);
    w.grad_hidden = (w.hidden.array() > 0.0f).select(w.grad_hidden, 0.0f);

    dense1_w.grad.noalias() = flat.transpose() * w.grad_hidden;
    dense1_b.grad = w.grad_hidden.colwise().sum();
    w.grad_flat.noalias() = w.grad_hidden * dense1_w.value.transpose();

    // grad_flat is (batch x flat) == pooled[2] layout (batch*36 x c).
    Mat grad_pooled = MatMap(w.grad_flat.data(), w.pooled[2].rows(), w.pooled[2].cols());
    for (int i = 2; i >= 0; --i) {
      unpool(grad_pooled, w.argmax[i], w.act[i].rows(), channels[i + 1], w.grad_a);
      w.grad_a = (w.act[i].array() > 0.0f).select(w.grad_a, 0.0f);
      conv_w[i].grad.noalias() = w.cols[i].transpose() * w.grad_a;
      conv_b[i].grad = w.grad_a.colwise().sum();
      if (i > 0) {
        w.grad_cols.noalias() = w.grad_a * conv_w[i].value.transpose();
        col2im(w.grad_cols, batch, size[i], size[i], channels[i], grad_pooled);
      }
    }

    ++step;
    const float bias1 = 1.0f - std::pow(kAdamBeta1, static_cast<float>(step));
    const float bias2 = 1.0f - std::pow(kAdamBeta2, static_cast<float>(step));
    const float step_size = lr * std::sqrt(bias2) / bias1;
    for (Param* p : params()) {
      p->m = kAdamBeta1 * p->m + (1.0f - kAdamBeta1) * p->grad;
      p->v = kAdamBeta2 * p->v + (1.0f - kAdamBeta2) * p->grad.cwiseProduct(p->grad);
      p->value.array() -= step_size * p->m.array() /
                          (p->v.array().sqrt() + kAdamEpsilon * std::sqrt(bias2));
    }
    return loss / batch;
  }
};

BlinkNet::BlinkNet(const ModelConfig& config, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(config, seed)) {}
BlinkNet::BlinkNet(const BlinkNet& other) : impl_(std::make_unique<Impl>(*other.impl_)) {}
BlinkNet& BlinkNet::operator=(const BlinkNet& other) {
  if (this != &other) impl_ = std::make_unique<Impl>(*other.impl_);
  return *this;
}
BlinkNet::BlinkNet(BlinkNet&&) noexcept = default;
BlinkNet& BlinkNet::operator=(BlinkNet&&) noexcept = default;
BlinkNet::~BlinkNet() = default;

const ModelConfig& BlinkNet::config() const { return impl_->config; }

std::size_t BlinkNet::input_values() const {
  return static_cast<std::size_t>(impl_->config.input_size) * impl_->config.input_size *
         impl_->config.input_channels;
}

std::vector<float> BlinkNet::logits(std::span<const float> inputs, std::size_t count) const {
  if (inputs.size() != count * input_values()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(count) + " inputs of " +
                                              std::to_string(input_values()) + " values");
  }
  constexpr std::size_t kChunk = 8;
  std::vector<float> out(count);
  for (std::size_t start = 0; start < count; start += kChunk) {
    const std::size_t n = std::min(kChunk, count - start);
    impl_->infer_logits(inputs.data() + start * input_values(), static_cast<int>(n), out.data() + start);
  }
  return out;
}

std::vector<double> BlinkNet::predict(std::span<const float> inputs, std::size_t count) const {
  const auto z = logits(inputs, count);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid_open(z[i]);
  return out;
}

double BlinkNet::train_step(std::span<const float> inputs, std::span<const float> labels,
                            double learning_rate, rnd::Engine& rng, std::vector<double>* probabilities) {
  const std::size_t batch = labels.size();
  if (batch == 0 || inputs.size() != batch * input_values()) {
    throw Error(ErrorCode::ShapeMismatch, "mini-batch inputs and labels disagree");
  }
  return impl_->train_step(inputs.data(), labels.data(), static_cast<int>(batch),
                           static_cast<float>(learning_rate), rng, probabilities);
}

double BlinkNet::loss(std::span<const float> inputs, std::span<const float> labels) const {
  const auto z = logits(inputs, labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += bce_with_logit(z[i], labels[i]);
  return z.empty() ? 0.0 : total / static_cast<double>(z.size());
}

std::vector<ParameterView> BlinkNet::parameters() {
  std::vector<ParameterView> out;
  for (Param* p : impl_->params()) {
    out.push_back({p->name, static_cast<int>(p->value.rows()), static_cast<int>(p->value.cols()),
                   p->value.data()});
  }
  return out;
}

std::size_t BlinkNet::parameter_count() const {
  std::size_t n = 0;
  for (Param* p : impl_->params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::vector<std::string> BlinkNet::layer_summary() const {
  const auto& c = impl_->config;
  std::vector<std::string> out;
  for (int i = 0; i < 3; ++i) {
    out.push_back("conv3x3(" + std::to_string(c.conv_filters[i]) + ")+relu");
    out.push_back("maxpool2x2");
  }
  out.push_back("flatten");
  out.push_back("dense(" + std::to_string(c.dense_units) + ")+relu");
  std::ostringstream rate;
  rate << c.dropout_rate;
  out.push_back("dropout(" + rate.str() + ")");
  out.push_back("dense(1)+sigmoid");
  return out;
}

void BlinkNet::reset_optimizer() {
  impl_->step = 0;
  for (Param* p : impl_->params()) {
    p->m.setZero();
    p->v.setZero();
  }
}

}  // namespace blinkkit
