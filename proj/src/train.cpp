#include "sodyolo/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sodyolo/checkpoint.hpp"
#include "sodyolo/errors.hpp"
#include "sodyolo/rng.hpp"

namespace sodyolo {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr_peak > 0.0)) throw std::invalid_argument("train: lr_peak must be positive");
  if (warmup_epochs > epochs) {
    throw std::invalid_argument("train: warmup_epochs (" + std::to_string(warmup_epochs) +
                                ") exceeds epochs (" + std::to_string(epochs) + ")");
  }
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("train: momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(final_lr_factor > 0.0 && final_lr_factor <= 1.0)) {
    throw std::invalid_argument("train: final_lr_factor must lie in (0, 1]");
  }
}

void TrainConfig::apply(const KeyValueConfig& kv) {
  lr_peak = kv.get_double("train.lr_peak", lr_peak);
  warmup_epochs = static_cast<std::size_t>(kv.get_int("train.warmup_epochs", warmup_epochs));
  momentum = kv.get_double("train.momentum", momentum);
  weight_decay = kv.get_double("train.weight_decay", weight_decay);
  epochs = static_cast<std::size_t>(kv.get_int("train.epochs", epochs));
  batch_size = static_cast<std::size_t>(kv.get_int("train.batch_size", batch_size));
  final_lr_factor = kv.get_double("train.final_lr_factor", final_lr_factor);
  seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(seed)));
  checkpoint_every =
      static_cast<std::size_t>(kv.get_int("train.checkpoint_every", checkpoint_every));
  checkpoint_dir = kv.get_string("train.checkpoint_dir", checkpoint_dir);
}

void TrainConfig::store(KeyValueConfig& kv) const {
  kv.set("train.lr_peak", format_double(lr_peak));
  kv.set("train.warmup_epochs", std::to_string(warmup_epochs));
  kv.set("train.momentum", format_double(momentum));
  kv.set("train.weight_decay", format_double(weight_decay));
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.final_lr_factor", format_double(final_lr_factor));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.checkpoint_every", std::to_string(checkpoint_every));
  kv.set("train.checkpoint_dir", checkpoint_dir);
}

double lr_schedule(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg) {
  const double peak = cfg.lr_peak;
  const std::size_t warmup = cfg.warmup_epochs * steps_per_epoch;
  if (step < warmup) {
    const double start = peak / 1000.0;
    return start + (peak - start) * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const std::size_t total = cfg.epochs * steps_per_epoch;
  if (total == 0 || total - 1 <= warmup) return peak;
  const double floor = peak * cfg.final_lr_factor;
  const double p = std::min(1.0, static_cast<double>(step - warmup) /
                                     static_cast<double>(total - 1 - warmup));
  return floor + (peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
  return (dataset_size + batch_size - 1) / batch_size;
}

std::uint64_t resolve_seed(std::uint64_t configured) {
  const char* env = std::getenv("SODYOLO_SEED");
  if (env == nullptr || *env == '\0') return configured;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw std::invalid_argument(std::string("SODYOLO_SEED is not an integer: ") + env);
  return v;
}

Sgd::Sgd(Model& model, double momentum, double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  model.visit([this](const std::string&, Tensor& t, bool decay) {
    slots_.push_back({&t, decay, std::vector<double>(t.numel(), 0.0)});
  });
}

void Sgd::zero_grad() {
  for (auto& s : slots_) s.param->zero_grad();
}

void Sgd::step(double lr) {
  for (auto& s : slots_) {
    if (!s.param->has_grad()) continue;
    auto p = s.param->data();
    auto g = s.param->grad();
    const double wd = s.decay ? weight_decay_ : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      s.velocity[i] = momentum_ * s.velocity[i] + g[i] + wd * p[i];
      p[i] -= lr * s.velocity[i];
    }
  }
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string describe(const LossComponents& c) {
  std::ostringstream os;
  os << "total=" << c.total << " objectness=" << c.objectness
     << " classification=" << c.classification << " box=" << c.box;
  return os.str();
}

}  // namespace

std::vector<EpochLog> train(Model& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                            const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty() && cfg.epochs > 0) throw std::invalid_argument("train: empty dataset");
  const std::size_t spe = steps_per_epoch(data.size(), cfg.batch_size);
  Sgd opt(model, cfg.momentum, cfg.weight_decay);
  std::vector<EpochLog> logs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < spe; ++b, ++step) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(data.size(), lo + cfg.batch_size);
      std::vector<const Image*> imgs;
      std::vector<std::vector<GroundTruth>> gts;
      for (std::size_t i = lo; i < hi; ++i) {
        imgs.push_back(&data[order[i]].image);
        gts.push_back(data[order[i]].gts);
      }
      const double lr = lr_schedule(step, spe, cfg);
      opt.zero_grad();
      const RawHeadOutput raw = model.forward_train(images_to_tensor(imgs));
      const LossResult loss = detection_loss(raw, gts, model.config);
      if (!std::isfinite(loss.components.total)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (" +
                           describe(loss.components) + ")");
      }
      backward(loss.total);
      opt.step(lr);
      log.lr = lr;
      log.mean.objectness += loss.components.objectness;
      log.mean.classification += loss.components.classification;
      log.mean.box += loss.components.box;
      log.mean.total += loss.components.total;
      log.mean.positives += loss.components.positives;
      ++log.steps;
    }
    if (log.steps > 0) {
      const double inv = 1.0 / static_cast<double>(log.steps);
      log.mean.objectness *= inv;
      log.mean.classification *= inv;
      log.mean.box *= inv;
      log.mean.total *= inv;
    }
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (!cfg.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0) {
      fs::create_directories(cfg.checkpoint_dir);
      save_checkpoint(model, (fs::path(cfg.checkpoint_dir) /
                              ("epoch_" + std::to_string(epoch + 1) + ".ckpt"))
                                 .string());
    }
  }
  return logs;
}

std::vector<std::vector<Detection>> detect(const Model& model, const std::vector<Sample>& data,
                                           const SuppressionConfig& suppression,
                                           std::size_t batch_size) {
  NoGradGuard no_grad;
  std::vector<std::vector<Detection>> out;
  for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
    const std::size_t hi = std::min(data.size(), lo + batch_size);
    std::vector<const Image*> imgs;
    for (std::size_t i = lo; i < hi; ++i) imgs.push_back(&data[i].image);
    const auto decoded = decode(model.forward(images_to_tensor(imgs)), model.config);
    for (const auto& d : decoded) out.push_back(suppress(d, suppression));
  }
  return out;
}

std::vector<ImageRecord> to_records(const std::vector<Sample>& data,
                                    const std::vector<std::vector<Detection>>& dets) {
  if (data.size() != dets.size()) {
    throw std::invalid_argument("to_records: " + std::to_string(dets.size()) +
                                " detection lists for " + std::to_string(data.size()) + " images");
  }
  std::vector<ImageRecord> records;
  for (std::size_t i = 0; i < data.size(); ++i) records.push_back({data[i].id, dets[i], data[i].gts});
  return records;
}

EvalReport evaluate(const Model& model, const std::vector<Sample>& data,
                    const std::vector<std::string>& class_names,
                    const SuppressionConfig& suppression, const EvalOptions& opts) {
  const std::size_t k = model.config.num_classes;
  if (class_names.size() != k) {
    throw std::invalid_argument("evaluate: model has " + std::to_string(k) +
                                " classes, dataset names " + std::to_string(class_names.size()));
  }
  for (const auto& s : data)
    for (const auto& g : s.gts)
      if (g.class_id >= static_cast<int>(k)) {
        throw std::invalid_argument("evaluate: image " + s.id + " has class " +
                                    std::to_string(g.class_id) + " but the model has " +
                                    std::to_string(k) + " classes");
      }
  EvalOptions o = opts;
  o.suppression = to_string(suppression.mode);
  return evaluate_records(to_records(data, detect(model, data, suppression)), class_names, o);
}

std::vector<Sample> load_samples(const DatasetIndex& index, std::size_t input_size) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < index.entries.size(); ++i) out.push_back(load_sample(index, i, input_size));
  return out;
}

}  // namespace sodyolo
