#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "blinkkit/random.hpp"

namespace blinkkit {

/// Architecture of the blink CNN. Only the filter counts, dense width and
/// dropout rate are tunable; the stage structure is fixed.
struct ModelConfig {
  int input_size = 50;
  int input_channels = 3;
  std::array<int, 3> conv_filters{32, 32, 64};
  int kernel = 3;
  int pool_stages = 3;
  int dense_units = 64;
  double dropout_rate = 0.5;
  int output_units = 1;

  bool operator==(const ModelConfig&) const = default;
};

/// Throws ConfigViolation when the config does not describe
/// conv+ReLU/pool x3, dense+ReLU, dropout, dense(1)+sigmoid over 50x50x3.
void validate(const ModelConfig& config);

/// View of one parameter tensor (row-major), used for serialization.
struct ParameterView {
  std::string name;
  int rows = 0;
  int cols = 0;
  float* data = nullptr;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// The blink classifier network:
///   conv3x3(32)+ReLU, maxpool2x2, conv3x3(32)+ReLU, maxpool2x2,
///   conv3x3(64)+ReLU, maxpool2x2, flatten, dense(64)+ReLU, dropout, dense(1)+sigmoid.
/// Convolutions use same padding; pooling has stride 2 and floors odd sizes
/// (50 -> 25 -> 12 -> 6).
class BlinkNet {
 public:
  explicit BlinkNet(const ModelConfig& config = {}, std::uint64_t seed = 0);
  BlinkNet(const BlinkNet& other);
  BlinkNet& operator=(const BlinkNet& other);
  BlinkNet(BlinkNet&&) noexcept;
  BlinkNet& operator=(BlinkNet&&) noexcept;
  ~BlinkNet();

  const ModelConfig& config() const;
  /// Number of floats per input (H * W * C, row-major HWC).
  std::size_t input_values() const;

  /// Inference (dropout disabled). `inputs` holds `count` HWC images back to back.
  /// Returns one probability per image, strictly inside (0, 1).
  std::vector<double> predict(std::span<const float> inputs, std::size_t count) const;
  /// Raw pre-sigmoid outputs, same layout as `predict`.
  std::vector<float> logits(std::span<const float> inputs, std::size_t count) const;

  /// One optimisation step of Adam on binary cross-entropy over a mini-batch.
  /// Returns the mean loss and writes per-sample probabilities (dropout active).
  double train_step(std::span<const float> inputs, std::span<const float> labels, double learning_rate,
                    rnd::Engine& rng, std::vector<double>* probabilities = nullptr);

  /// Mean binary cross-entropy in inference mode.
  double loss(std::span<const float> inputs, std::span<const float> labels) const;

  std::vector<ParameterView> parameters();
  std::size_t parameter_count() const;
  /// Human-readable layer list, e.g. "conv3x3(32)+relu".
  std::vector<std::string> layer_summary() const;
  /// Resets the Adam moments and step counter.
  void reset_optimizer();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace blinkkit
