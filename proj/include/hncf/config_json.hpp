#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hncf/evaluation.hpp"
#include "hncf/model.hpp"
#include "hncf/training.hpp"

namespace hncf {

struct DataConfig {
  std::string interactions = "interactions.csv";  // relative to the data directory
  std::string vocabulary = "vocab.txt";
  std::size_t max_vocab = 5000;  // used when the vocabulary file is absent
};

/// Everything a `train` run needs. The top-level seed overrides the model,
/// train and eval seeds so one number reproduces a run.
struct RunConfig {
  std::uint64_t seed = 0;
  HncfConfig model;
  TrainConfig train;
  EvalProtocol eval;
  DataConfig data;
};

// Unknown keys are rejected at every level with InvalidConfig; missing keys
// keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

// Model section only. Embedding table sizes and the vocabulary are data-derived
// and appear under "user_count"/"item_count" when `with_sizes` is set.
nlohmann::json model_config_to_json(const HncfConfig& cfg, bool with_sizes = false);
HncfConfig model_config_from_json(const nlohmann::json& j, bool with_sizes = false);

nlohmann::ordered_json to_json(const MetricReport& r);

// Human-readable schema printed with usage errors.
const std::string& run_config_schema();

}  // namespace hncf
