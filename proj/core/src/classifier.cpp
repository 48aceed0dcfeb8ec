#include "blinkkit/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "blinkkit/archive.hpp"
#include "blinkkit/candidates.hpp"
#include "blinkkit/error.hpp"

namespace blinkkit {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "weights.bin is stored little-endian");

void validate(const TrainConfig& c) {
  if (c.batch_size <= 0) throw Error(ErrorCode::ConfigViolation, "batch_size must be positive");
  if (!(c.learning_rate > 0.0)) throw Error(ErrorCode::ConfigViolation, "learning rate must be positive");
  if (c.epochs < 0) throw Error(ErrorCode::ConfigViolation, "epochs must be >= 0");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigViolation, "validation_fraction must lie in [0, 1)");
  }
  if (c.early_stop_patience < 0) throw Error(ErrorCode::ConfigViolation, "patience must be >= 0");
  if (c.batch_size != 50) spdlog::warn("batch size {} deviates from the reference 50", c.batch_size);
  if (c.learning_rate != 0.001) {
    spdlog::warn("learning rate {} deviates from the reference 0.001", c.learning_rate);
  }
}

BlinkNet build_model(const ModelConfig& config, std::uint64_t seed) { return BlinkNet(config, seed); }

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Stratified by class at group level; a group's class is the label of its first crop.
Split split_groups(std::span<const LabeledCrop> data, double fraction, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> members;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [it, inserted] = members.try_emplace(data[i].group);
    if (inserted) order.push_back(data[i].group);
    it->second.push_back(i);
  }
  std::vector<std::string> by_class[2];
  for (const auto& g : order) by_class[data[members[g].front()].closed ? 1 : 0].push_back(g);

  rnd::Engine rng(rnd::mix(seed, 7));
  Split split;
  for (auto& groups : by_class) {
    for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[rnd::index(rng, i)]);
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(groups.size())));
    if (fraction > 0.0 && n_val == 0 && groups.size() >= 2) n_val = 1;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      auto& dst = i < n_val ? split.validation : split.train;
      const auto& m = members[groups[i]];
      dst.insert(dst.end(), m.begin(), m.end());
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

void gather(std::span<const LabeledCrop> data, std::span<const std::size_t> idx, std::vector<float>& x,
            std::vector<float>& y) {
  x.resize(idx.size() * EyeCrop::kValues);
  y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(x.data() + i * EyeCrop::kValues, data[idx[i]].crop.pixels.data(),
                sizeof(float) * EyeCrop::kValues);
    y[i] = data[idx[i]].closed ? 1.0f : 0.0f;
  }
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate_split(const BlinkNet& net, std::span<const LabeledCrop> data,
                          std::span<const std::size_t> idx) {
  if (idx.empty()) return {};
  std::vector<float> x, y;
  gather(data, idx, x, y);
  const auto z = net.logits(x, idx.size());
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    loss += std::max(zi, 0.0) - zi * y[i] + std::log1p(std::exp(-std::abs(zi)));
    correct += ((zi > 0.0) == (y[i] > 0.5f)) ? 1 : 0;
  }
  return {loss / static_cast<double>(z.size()), static_cast<double>(correct) / static_cast<double>(z.size())};
}

TrainedModel train_one(std::span<const LabeledCrop> data, const TrainConfig& config,
                       const ModelConfig& model_config, const std::string& eye,
                       const EpochCallback& on_epoch) {
  bool has[2] = {false, false};
  for (const auto& d : data) has[d.closed ? 1 : 0] = true;
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no crops for model '" + eye + "'");
  if (!has[0] || !has[1]) {
    throw Error(ErrorCode::SingleClassDataset, "model '" + eye + "' needs open and closed crops");
  }

  TrainedModel out{eye, build_model(model_config, rnd::mix(config.seed, 0)), {}};
  if (config.epochs == 0) return out;

  const auto split = split_groups(data, config.validation_fraction, config.seed);
  if (split.train.empty()) throw Error(ErrorCode::EmptyDataset, "validation split left no training crops");
  rnd::Engine rng(rnd::mix(config.seed, 1));

  BlinkNet best = out.net;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order = split.train;
  std::vector<float> x, y;
  std::vector<double> probs;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rnd::index(rng, i)]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - start);
      gather(data, std::span(order).subspan(start, n), x, y);
      loss_sum += out.net.train_step(x, y, config.learning_rate, rng, &probs) * static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) correct += ((probs[i] > 0.5) == (y[i] > 0.5f)) ? 1 : 0;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const auto val = evaluate_split(out.net, data, split.validation);
    rec.val_loss = split.validation.empty() ? rec.train_loss : val.loss;
    rec.val_accuracy = split.validation.empty() ? rec.train_accuracy : val.accuracy;
    out.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(eye, rec);

    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      best = out.net;
      out.history.best_epoch = epoch;
      since_best = 0;
    } else if (config.early_stop_patience > 0 && ++since_best >= config.early_stop_patience) {
      break;
    }
  }
  out.net = std::move(best);
  out.net.reset_optimizer();
  return out;
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

json to_json(const ModelConfig& c) {
  return {{"input_size", {c.input_size, c.input_size, c.input_channels}},
          {"conv_filters", c.conv_filters},
          {"kernel", {c.kernel, c.kernel}},
          {"pools", c.pool_stages},
          {"dense_units", c.dense_units},
          {"dropout_rate", c.dropout_rate},
          {"output", {{"units", c.output_units}, {"activation", "sigmoid"}}}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  const auto input = j.at("input_size").get<std::vector<int>>();
  if (input.size() != 3) throw Error(ErrorCode::CorruptCheckpoint, "bad input_size");
  c.input_size = input[0];
  c.input_channels = input[2];
  c.conv_filters = j.at("conv_filters").get<std::array<int, 3>>();
  c.kernel = j.at("kernel").at(0).get<int>();
  c.pool_stages = j.at("pools").get<int>();
  c.dense_units = j.at("dense_units").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.output_units = j.at("output").at("units").get<int>();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"optimizer", {{"name", "adam"}, {"learning_rate", c.learning_rate}, {"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}}},
          {"loss", "binary_cross_entropy"},
          {"epochs", c.epochs},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"early_stop_patience", c.early_stop_patience},
          {"shared_eyes", c.shared_eyes}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("optimizer").at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.shared_eyes = j.at("shared_eyes").get<bool>();
  return c;
}

}  // namespace

std::string dataset_fingerprint(std::span<const LabeledCrop> dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& d : dataset) {
    const unsigned char meta[2] = {static_cast<unsigned char>(d.closed),
                                   static_cast<unsigned char>(d.crop.side == EyeSide::Right)};
    fnv(h, meta, sizeof(meta));
    fnv(h, d.group.data(), d.group.size());
    fnv(h, d.crop.pixels.data(), d.crop.pixels.size() * sizeof(float));
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Checkpoint train(std::span<const LabeledCrop> dataset, const TrainConfig& config,
                 const ModelConfig& model_config, const EpochCallback& on_epoch) {
  validate(config);
  validate(model_config);
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
  for (const auto& d : dataset) validate(d.crop);

  Checkpoint ckpt;
  ckpt.model_config = model_config;
  ckpt.train_config = config;
  ckpt.dataset_fingerprint = dataset_fingerprint(dataset);

  if (config.shared_eyes) {
    std::vector<LabeledCrop> oriented(dataset.begin(), dataset.end());
    for (auto& d : oriented) {
      if (d.crop.side == EyeSide::Right) d.crop = mirror_horizontal(d.crop);
    }
    bool has[2] = {false, false};
    for (const auto& d : oriented) has[d.closed ? 1 : 0] = true;
    if (!has[0] || !has[1]) throw Error(ErrorCode::SingleClassDataset, "dataset holds a single class");
    ckpt.models.push_back(train_one(oriented, config, model_config, "shared", on_epoch));
  } else {
    for (auto side : {EyeSide::Left, EyeSide::Right}) {
      std::vector<LabeledCrop> subset;
      for (const auto& d : dataset) {
        if (d.crop.side == side) subset.push_back(d);
      }
      ckpt.models.push_back(train_one(subset, config, model_config, std::string(to_string(side)), on_epoch));
    }
  }
  return ckpt;
}

const TrainedModel& Checkpoint::model_for(EyeSide side) const {
  if (models.empty()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint holds no model");
  const std::string wanted(to_string(side));
  for (const auto& m : models) {
    if (m.eye == "shared" || m.eye == wanted) return m;
  }
  throw Error(ErrorCode::CorruptCheckpoint, "checkpoint has no model for the " + wanted + " eye");
}

std::vector<double> Checkpoint::predict(std::span<const EyeCrop> crops) const {
  for (const auto& c : crops) validate(c);
  std::vector<double> scores(crops.size());
  for (auto side : {EyeSide::Left, EyeSide::Right}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < crops.size(); ++i) {
      if (crops[i].side == side) idx.push_back(i);
    }
    if (idx.empty()) continue;
    const auto& model = model_for(side);
    const bool mirror = model.eye == "shared" && side == EyeSide::Right;
    std::vector<float> x(idx.size() * EyeCrop::kValues);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& src = mirror ? mirror_horizontal(crops[idx[k]]).pixels : crops[idx[k]].pixels;
      std::memcpy(x.data() + k * EyeCrop::kValues, src.data(), sizeof(float) * EyeCrop::kValues);
    }
    const auto p = model.net.predict(x, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) scores[idx[k]] = p[k];
  }
  return scores;
}

double Checkpoint::predict(const EyeCrop& crop) const { return predict(std::span(&crop, 1)).front(); }

void Checkpoint::save(const fs::path& path) const {
  json doc;
  doc["format_version"] = std::to_string(format_major) + "." + std::to_string(format_minor);
  doc["model_config"] = to_json(model_config);
  doc["train_config"] = to_json(train_config);
  doc["dataset_fingerprint"] = dataset_fingerprint;
  doc["input_normalization"] = "pixel / 255 -> [0, 1], RGB, no mean subtraction";
  doc["eye_convention"] = "left = image-left; shared model sees right crops mirrored";
  std::string weights;
  json models_json = json::array();
  for (const auto& m : models) {
    auto net = m.net;  // parameters() needs a mutable view
    json params = json::array();
    for (const auto& p : net.parameters()) {
      params.push_back({{"name", p.name}, {"shape", {p.rows, p.cols}}, {"offset", weights.size()}});
      weights.append(reinterpret_cast<const char*>(p.data), p.size() * sizeof(float));
    }
    json history = json::array();
    for (const auto& e : m.history.epochs) {
      history.push_back({{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"train_accuracy", e.train_accuracy},
                         {"val_loss", e.val_loss},
                         {"val_accuracy", e.val_accuracy}});
    }
    models_json.push_back({{"eye", m.eye},
                           {"layers", net.layer_summary()},
                           {"parameters", params},
                           {"history", history},
                           {"best_epoch", m.history.best_epoch}});
  }
  doc["models"] = models_json;
  const std::vector<archive::Entry> entries = {{"model.json", doc.dump(2) + "\n"}, {"weights.bin", weights}};
  archive::write_tar(path, entries);
}

Checkpoint Checkpoint::load(const fs::path& path) {
  const auto entries = archive::read_tar(path);
  const std::string* model_json = nullptr;
  const std::string* weights = nullptr;
  for (const auto& e : entries) {
    if (e.name == "model.json") model_json = &e.data;
    if (e.name == "weights.bin") weights = &e.data;
  }
  if (!model_json || !weights) throw Error(ErrorCode::CorruptCheckpoint, "archive lacks model.json or weights.bin");
  Checkpoint ckpt;
  try {
    const auto doc = json::parse(*model_json);
    const auto version = doc.at("format_version").get<std::string>();
    int major = 0, minor = 0;
    if (std::sscanf(version.c_str(), "%d.%d", &major, &minor) != 2 || major != kCheckpointMajor) {
      throw Error(ErrorCode::CorruptCheckpoint, "unsupported checkpoint version " + version);
    }
    ckpt.format_major = major;
    ckpt.format_minor = minor;
    ckpt.model_config = model_config_from_json(doc.at("model_config"));
    ckpt.train_config = train_config_from_json(doc.at("train_config"));
    ckpt.dataset_fingerprint = doc.value("dataset_fingerprint", "");
    for (const auto& mj : doc.at("models")) {
      TrainedModel m{mj.at("eye").get<std::string>(), BlinkNet(ckpt.model_config), {}};
      std::map<std::string, json> stored;
      for (const auto& p : mj.at("parameters")) stored[p.at("name").get<std::string>()] = p;
      for (auto& p : m.net.parameters()) {
        const auto it = stored.find(p.name);
        if (it == stored.end()) throw Error(ErrorCode::CorruptCheckpoint, "missing parameter " + p.name);
        const auto shape = it->second.at("shape").get<std::vector<int>>();
        const auto offset = it->second.at("offset").get<std::size_t>();
        if (shape.size() != 2 || shape[0] != p.rows || shape[1] != p.cols ||
            offset + p.size() * sizeof(float) > weights->size()) {
          throw Error(ErrorCode::CorruptCheckpoint, "parameter " + p.name + " has the wrong shape");
        }
        std::memcpy(p.data, weights->data() + offset, p.size() * sizeof(float));
      }
      for (const auto& e : mj.at("history")) {
        m.history.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                                    e.at("train_accuracy").get<double>(), e.at("val_loss").get<double>(),
                                    e.at("val_accuracy").get<double>()});
      }
      m.history.best_epoch = mj.value("best_epoch", 0);
      ckpt.models.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("model.json: ") + e.what());
  }
  if (ckpt.models.empty()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint holds no model");
  return ckpt;
}

std::vector<LabeledCrop> load_dataset_crops(const fs::path& dataset_dir, StreamKind stream) {
  if (!fs::is_directory(dataset_dir)) throw Error(ErrorCode::MissingFile, dataset_dir.string());
  std::vector<LabeledCrop> out;
  for (auto label : {SampleLabel::Blink, SampleLabel::NoBlink}) {
    const auto class_dir = dataset_dir / std::string(to_string(label));
    if (!fs::is_directory(class_dir)) continue;
    std::vector<fs::path> samples;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (entry.is_directory()) samples.push_back(entry.path());
    }
    std::sort(samples.begin(), samples.end());
    for (const auto& sample_dir : samples) {
      const auto stream_dir = sample_dir / std::string(directory_name(stream));
      if (!fs::is_directory(stream_dir)) continue;
      for (int offset = 0; offset < kSampleFrames; ++offset) {
        const bool near_center = std::abs(offset - static_cast<int>(kSampleHalfWidth)) <= 1;
        if (label == SampleLabel::Blink && !near_center) continue;
        for (auto side : {EyeSide::Left, EyeSide::Right}) {
          char name[32];
          std::snprintf(name, sizeof(name), "%s_eye_%02d.png", side == EyeSide::Left ? "left" : "right",
                        offset);
          const auto file = stream_dir / name;
          cv::Mat img = cv::imread(file.string(), cv::IMREAD_COLOR);
          if (img.empty()) throw Error(ErrorCode::MissingFile, file.string());
          LabeledCrop lc;
          lc.crop = from_image(img, side, {stream, offset});
          lc.closed = label == SampleLabel::Blink;
          lc.group = sample_dir.filename().string();
          out.push_back(std::move(lc));
        }
      }
    }
  }
  return out;
}

}  // namespace blinkkit
