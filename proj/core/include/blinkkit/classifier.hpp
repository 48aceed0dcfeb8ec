#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "blinkkit/eye_extraction.hpp"
#include "blinkkit/network.hpp"

namespace blinkkit {

inline constexpr int kCheckpointMajor = 1;
inline constexpr int kCheckpointMinor = 0;

struct TrainConfig {
  int batch_size = 50;
  double learning_rate = 0.001;
  int epochs = 30;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Epochs without validation-loss improvement before stopping; 0 disables.
  int early_stop_patience = 5;
  /// One model for both eyes, right-eye crops mirrored to the left orientation.
  /// When false, one model is trained per eye side.
  bool shared_eyes = true;
};

/// Throws ConfigViolation for impossible settings; logs a warning when batch
/// size or learning rate deviate from the reference 50 / 0.001.
void validate(const TrainConfig& config);

struct LabeledCrop {
  EyeCrop crop;
  /// Frame-level target: true = eye closed (blink).
  bool closed = false;
  /// Split unit (sample id); crops of one group never straddle train/validation.
  std::string group;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  /// Epoch whose weights were kept (1-based); 0 when no epoch ran.
  int best_epoch = 0;
};

struct TrainedModel {
  /// "shared", "left" or "right".
  std::string eye = "shared";
  BlinkNet net;
  TrainingHistory history;
};

struct Checkpoint {
  int format_major = kCheckpointMajor;
  int format_minor = kCheckpointMinor;
  ModelConfig model_config;
  TrainConfig train_config;
  std::string dataset_fingerprint;
  std::vector<TrainedModel> models;

  const TrainedModel& model_for(EyeSide side) const;

  /// One closed-eye probability per crop, in (0, 1). Dropout is off, so
  /// repeated calls are bit-identical. Errors: ShapeMismatch.
  std::vector<double> predict(std::span<const EyeCrop> crops) const;
  double predict(const EyeCrop& crop) const;

  /// Single ustar archive holding model.json and weights.bin.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Builds a freshly initialised network. Errors: ConfigViolation.
BlinkNet build_model(const ModelConfig& config, std::uint64_t seed = 0);

using EpochCallback = std::function<void(const std::string& eye, const EpochRecord&)>;

/// Trains from scratch with Adam on binary cross-entropy, keeping the weights of
/// the epoch with the lowest validation loss.
/// Errors: EmptyDataset, SingleClassDataset, ShapeMismatch, ConfigViolation.
Checkpoint train(std::span<const LabeledCrop> dataset, const TrainConfig& config,
                 const ModelConfig& model_config = {}, const EpochCallback& on_epoch = {});

/// Stable hash of labels, groups and pixels (hex).
std::string dataset_fingerprint(std::span<const LabeledCrop> dataset);

/// Reads eye crops of one stream from a built dataset directory. Blink samples
/// contribute their centre frame +-1 as closed and skip their other frames;
/// no-blink samples contribute all frames as open.
std::vector<LabeledCrop> load_dataset_crops(const std::filesystem::path& dataset_dir,
                                            StreamKind stream = StreamKind::RGB);

}  // namespace blinkkit
