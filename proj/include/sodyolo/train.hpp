#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sodyolo/config.hpp"
#include "sodyolo/data.hpp"
#include "sodyolo/evaluation.hpp"
#include "sodyolo/loss.hpp"
#include "sodyolo/model.hpp"
#include "sodyolo/postprocess.hpp"

namespace sodyolo {

struct TrainConfig {
  double lr_peak = 0.005;
  std::size_t warmup_epochs = 3;
  double momentum = 0.937;
  double weight_decay = 0.0005;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double final_lr_factor = 0.01;
  std::uint64_t seed = 0;
  // Save a checkpoint every N epochs when checkpoint_dir is set; 0 disables.
  std::size_t checkpoint_every = 0;
  std::string checkpoint_dir;

  void validate() const;
  // Keys under "train.".
  void apply(const KeyValueConfig& kv);
  void store(KeyValueConfig& kv) const;
};

// Linear warmup from lr_peak / 1000 reaching lr_peak at step
// warmup_epochs * steps_per_epoch, then cosine down to
// lr_peak * final_lr_factor at the last step (epochs * steps_per_epoch - 1).
double lr_schedule(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg);

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);

// SODYOLO_SEED, when set, replaces the configured seed.
std::uint64_t resolve_seed(std::uint64_t configured);

// SGD with momentum: v = mu * v + g (+ wd * p for decayed tensors), p -= lr * v.
class Sgd {
 public:
  Sgd(Model& model, double momentum, double weight_decay);
  void step(double lr);
  void zero_grad();

 private:
  struct Slot {
    Tensor* param;
    bool decay;
    std::vector<double> velocity;
  };
  std::vector<Slot> slots_;
  double momentum_;
  double weight_decay_;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double lr = 0.0;
  LossComponents mean;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains in place; batches are drawn in a per-epoch shuffled order derived
// from cfg.seed. Throws NumericError on a non-finite loss.
std::vector<EpochLog> train(Model& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

// Inference + decode + suppression, one list per sample.
std::vector<std::vector<Detection>> detect(const Model& model, const std::vector<Sample>& data,
                                           const SuppressionConfig& suppression,
                                           std::size_t batch_size = 8);

std::vector<ImageRecord> to_records(const std::vector<Sample>& data,
                                    const std::vector<std::vector<Detection>>& dets);

// Throws std::invalid_argument when the data holds classes the model lacks.
EvalReport evaluate(const Model& model, const std::vector<Sample>& data,
                    const std::vector<std::string>& class_names,
                    const SuppressionConfig& suppression, const EvalOptions& opts = {});

std::vector<Sample> load_samples(const DatasetIndex& index, std::size_t input_size);

}  // namespace sodyolo
