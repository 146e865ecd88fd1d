#include "hncf/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "hncf/error.hpp"
#include "hncf/evaluation.hpp"

namespace hncf {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (batch_size < 1) fail(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  if (!(validation_split >= 0.0 && validation_split < 1.0)) {
    fail(ErrorKind::InvalidConfig, "validation_split must lie in [0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::InvalidConfig, "adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) fail(ErrorKind::InvalidConfig, "adam eps must be > 0");
}

void adam_step(const ParameterList& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
  }
  if (state.m.size() != params.size()) {
    fail(ErrorKind::ShapeMismatch, "adam state tracks " + std::to_string(state.m.size()) +
                                       " parameters, got " + std::to_string(params.size()));
  }
  // Validate everything first so a bad gradient leaves all parameters untouched.
  for (const auto& p : params) {
    if (!p.tensor.requires_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) fail(ErrorKind::NonFiniteGradient, "non-finite gradient in " + p.name);
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor w = params[i].tensor;
    if (!w.requires_grad()) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    if (m.size() != w.size()) fail(ErrorKind::ShapeMismatch, "adam buffer size differs for " + params[i].name);
    const auto g = w.grad();
    auto x = w.mutable_values();
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      x[j] -= cfg.learning_rate * (m[j] / correct1) / (std::sqrt(v[j] / correct2) + cfg.eps);
    }
  }
}

std::string epoch_json(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["val_loss"] = m.val_loss ? nlohmann::ordered_json(*m.val_loss) : nlohmann::ordered_json(nullptr);
  j["val_recall"] = m.val_recall ? nlohmann::ordered_json(*m.val_recall) : nlohmann::ordered_json(nullptr);
  j["seconds"] = m.seconds;
  return j.dump();
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset, double fraction,
                                                   std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    fail(ErrorKind::InvalidParam, "validation fraction must lie in [0, 1)");
  }
  std::vector<InteractionRecord> rows = dataset.records();
  Rng rng(seed);
  rng.shuffle(rows);
  // Small tolerance so 0.2 * 10 stays 2 despite rounding.
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows.size()) - 1e-9));
  std::vector<InteractionRecord> val(rows.end() - static_cast<std::ptrdiff_t>(n_val), rows.end());
  rows.resize(rows.size() - n_val);
  return {dataset.with_records(std::move(rows)), dataset.with_records(std::move(val))};
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t derive_seed(std::uint64_t seed, int stream) {
  Rng r(seed);
  std::uint64_t s = 0;
  for (int i = 0; i <= stream; ++i) s = r.next_seed();
  return s;
}

}  // namespace

Trainer::Trainer(HncfModel& model, const InputEncoder& encoder, const Dataset& train,
                 const Dataset& validation, TrainConfig cfg)
    : model_(model),
      encoder_(encoder),
      cfg_(cfg),
      params_(model.parameters()),
      shuffle_rng_(derive_seed(cfg.seed, 0)),
      dropout_rng_(derive_seed(cfg.seed, 1)) {
  cfg_.validate();
  if (train.empty()) fail(ErrorKind::EmptyDataset, "training set is empty");
  train_ = encode_rows(train);
  validation_ = encode_rows(validation);
  order_.resize(train_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  adam_.m.resize(params_.size());
  adam_.v.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].tensor.requires_grad()) continue;
    adam_.m[i].assign(params_[i].tensor.size(), 0.0);
    adam_.v[i].assign(params_[i].tensor.size(), 0.0);
  }
}

std::vector<Trainer::Row> Trainer::encode_rows(const Dataset& d) const {
  std::vector<Row> rows;
  rows.reserve(d.size());
  for (const auto& r : d.records()) rows.push_back({encoder_.encode(r), static_cast<double>(r.interaction)});
  return rows;
}

EpochMetrics Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  ++epoch_;
  const bool frozen = model_.config().uses_image() && model_.config().image.frozen_conv;
  ConvFeatureCache* cache = frozen ? &cache_ : nullptr;

  if (cfg_.shuffle) shuffle_rng_.shuffle(order_);
  double loss_sum = 0.0;
  std::vector<ModelInput> batch;
  std::vector<double> labels;
  for (std::size_t start_row = 0, b = 0; start_row < order_.size(); start_row += cfg_.batch_size, ++b) {
    const std::size_t end = std::min(order_.size(), start_row + cfg_.batch_size);
    batch.clear();
    labels.clear();
    for (std::size_t i = start_row; i < end; ++i) {
      batch.push_back(train_[order_[i]].input);
      labels.push_back(train_[order_[i]].label);
    }
    Tape tape;
    const Tensor probs = model_.forward_batch(tape, batch, ops::Mode::Train, &dropout_rng_, cache);
    const Tensor loss = ops::bce_loss(tape, probs, Tensor({batch.size(), 1}, labels));
    tape.backward(loss);
    try {
      adam_step(params_, adam_, cfg_);
    } catch (const Error& e) {
      fail(e.kind(), "epoch " + std::to_string(epoch_) + " batch " + std::to_string(b + 1) + ": " + e.what());
    }
    for (const auto& p : params_) {
      if (p.tensor.requires_grad()) Tensor(p.tensor).zero_grad();
    }
    loss_sum += loss.item() * static_cast<double>(batch.size());
  }

  EpochMetrics m;
  m.epoch = epoch_;
  m.train_loss = loss_sum / static_cast<double>(train_.size());
  if (!validation_.empty()) {
    std::vector<ModelInput> rows;
    std::vector<double> val_labels;
    std::vector<int> int_labels;
    for (const auto& r : validation_) {
      rows.push_back(r.input);
      val_labels.push_back(r.label);
      int_labels.push_back(static_cast<int>(r.label));
    }
    const std::vector<double> p = predict_batch(model_, rows, cache);
    Tape tape = Tape::inference();
    m.val_loss = ops::bce_loss(tape, Tensor({p.size(), 1}, p), Tensor({p.size(), 1}, val_labels)).item();
    m.val_recall = recall_metric(confusion(p, int_labels, 0.5));
  }
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return m;
}

std::vector<EpochMetrics> fit(HncfModel& model, const InputEncoder& encoder, const Dataset& dataset,
                              const TrainConfig& cfg,
                              const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  if (dataset.empty()) fail(ErrorKind::EmptyDataset, "cannot fit on an empty dataset");
  std::vector<EpochMetrics> out;
  if (cfg.epochs == 0) return out;
  auto [train, validation] = split_train_validation(dataset, cfg.validation_split, cfg.seed);
  if (train.empty()) fail(ErrorKind::EmptyDataset, "validation split leaves no training rows");
  Trainer trainer(model, encoder, train, validation, cfg);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    out.push_back(trainer.run_epoch());
    if (on_epoch) on_epoch(out.back());
  }
  return out;
}

}  // namespace hncf
