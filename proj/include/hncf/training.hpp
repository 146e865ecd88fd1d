#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hncf/data.hpp"
#include "hncf/model.hpp"

namespace hncf {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 8;
  std::size_t epochs = 25;
  double validation_split = 0.20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;  // throws InvalidConfig
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

// One bias-corrected Adam update over every parameter that requires grad.
// Gradients are checked first; a non-finite one aborts the whole step with
// NonFiniteGradient naming the parameter.
void adam_step(const ParameterList& params, AdamState& state, const TrainConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_recall;
  double seconds = 0.0;
};

// Single JSON line: {"epoch","train_loss","val_loss","val_recall","seconds"}.
std::string epoch_json(const EpochMetrics& m);

// Seeded shuffle; the last ceil(fraction * n) rows become validation.
std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset, double fraction,
                                                   std::uint64_t seed);

/// Epoch-at-a-time training loop (Adam + mean BCE). Holds the optimizer state
/// and RNG streams, so successive run_epoch() calls continue one run.
class Trainer {
 public:
  Trainer(HncfModel& model, const InputEncoder& encoder, const Dataset& train,
          const Dataset& validation, TrainConfig cfg);

  EpochMetrics run_epoch();
  const AdamState& adam_state() const { return adam_; }
  std::size_t epochs_run() const { return epoch_; }

 private:
  struct Row {
    ModelInput input;
    double label;
  };
  std::vector<Row> encode_rows(const Dataset& d) const;

  HncfModel& model_;
  const InputEncoder& encoder_;
  TrainConfig cfg_;
  ParameterList params_;
  AdamState adam_;
  std::vector<Row> train_, validation_;
  std::vector<std::size_t> order_;
  Rng shuffle_rng_, dropout_rng_;
  ConvFeatureCache cache_;
  std::size_t epoch_ = 0;
};

/// Splits `dataset` per cfg.validation_split, then runs cfg.epochs epochs.
/// on_epoch, when set, sees each epoch's metrics as they are produced.
std::vector<EpochMetrics> fit(HncfModel& model, const InputEncoder& encoder, const Dataset& dataset,
                              const TrainConfig& cfg,
                              const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace hncf
