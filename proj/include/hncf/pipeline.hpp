#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "hncf/checkpoint.hpp"
#include "hncf/config_json.hpp"

// The end-to-end workflow behind the CLI subcommands, usable from code.
namespace hncf {

struct PrepareOptions {
  double sample_fraction = 1.0;
  std::size_t neg_ratio = 4;
  std::uint64_t seed = 0;
  std::size_t max_vocab = 5000;
};

// Ingest -> sample -> clean text -> negatives; writes the canonical CSV and
// vocab.txt to `out_dir`. Relative image paths are rewritten to stay valid
// from `out_dir`.
Dataset prepare(const std::filesystem::path& interactions, const std::filesystem::path& out_dir,
                const PrepareOptions& opts);

/// A prepared data directory loaded for one model config.
struct DataBundle {
  Dataset full;
  std::shared_ptr<const Vocabulary> vocab;
  std::unique_ptr<ImageStore> images;  // set for the hybrid variant

  // Final positive per user held out for evaluation; the rest trains.
  Dataset train, test;
};

DataBundle load_data(const std::filesystem::path& dir, const DataConfig& data, const HncfConfig& model);

// The model config with table sizes and vocabulary filled in from the data.
HncfConfig sized_config(HncfConfig cfg, const DataBundle& data);

struct TrainResult {
  HncfModel model;
  std::vector<EpochMetrics> epochs;
  nlohmann::json metadata;  // stored in the checkpoint
};

TrainResult train_run(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::function<void(const EpochMetrics&)>& on_epoch = {});

// Re-derives the training-time split from `data_dir` and evaluates on the
// held-out positives. k / n_negatives override the checkpoint's protocol.
MetricReport evaluate_run(const Checkpoint& ck, const std::filesystem::path& data_dir,
                          std::optional<std::size_t> k = {}, std::optional<std::size_t> n_negatives = {});

// Top-k unseen items for a raw user id, as raw item ids.
std::vector<std::pair<std::int64_t, double>> recommend_run(const Checkpoint& ck,
                                                           const std::filesystem::path& data_dir,
                                                           std::int64_t user, std::size_t k);

}  // namespace hncf
