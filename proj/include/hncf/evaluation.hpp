#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "hncf/data.hpp"
#include "hncf/model.hpp"

namespace hncf {

struct ConfusionCounts {
  std::size_t true_positive = 0;
  std::size_t false_negative = 0;
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;

  std::size_t total() const { return true_positive + false_negative + true_negative + false_positive; }
  bool operator==(const ConfusionCounts&) const = default;
};

// A prediction >= threshold counts as positive.
ConfusionCounts confusion(std::span<const double> predictions, std::span<const int> labels,
                          double threshold);

// TP / (TP + FN); 0 with a warning when the denominator is 0.
double recall_metric(const ConfusionCounts& c);

struct EvalProtocol {
  std::size_t k = 10;
  std::size_t n_negatives = 99;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LeaveOneOutCase {
  std::size_t user;      // dense
  std::size_t positive;  // dense item held out
  std::vector<std::size_t> negatives;
};

struct LeaveOneOutSet {
  std::vector<LeaveOneOutCase> cases;
  std::size_t skipped_users = 0;  // candidate pool smaller than n_negatives
};

// Index of the user's "final" positive among `records`: greatest timestamp,
// greatest item id on ties or when timestamps are absent.
std::size_t final_positive(std::span<const InteractionRecord* const> positives);

/// One case per user with at least one positive in `dataset`: the final
/// positive plus n_negatives items drawn without replacement from catalogue
/// items outside the user's positive history. History is the positives in
/// `dataset` plus those in `history` when given.
LeaveOneOutSet build_leave_one_out(const Dataset& dataset, const EvalProtocol& protocol,
                                   const Dataset* history = nullptr);

// Moves each user's final positive into the second dataset.
std::pair<Dataset, Dataset> split_leave_one_out(const Dataset& dataset);

using UserItem = std::pair<std::size_t, std::size_t>;
// Scores dense (user, item) pairs; higher means more likely to interact.
using PairScorer = std::function<std::vector<double>(std::span<const UserItem>)>;

PairScorer model_scorer(const HncfModel& model, const InputEncoder& encoder,
                        ConvFeatureCache* cache = nullptr);

// 1-based rank of `items[0]` among all items when sorted by descending score,
// ties broken by ascending item id.
std::size_t rank_of_first(std::span<const double> scores, std::span<const std::size_t> items);

struct HitRatio {
  std::size_t hits = 0;
  std::size_t users = 0;
  double ratio = 0.0;
};

HitRatio hit_ratio_at_k(const PairScorer& scorer, std::span<const LeaveOneOutCase> cases, std::size_t k);

struct MetricReport {
  double recall = 0.0;
  double hit_ratio_at_k = 0.0;
  std::size_t k = 10;
  std::size_t hits = 0;
  std::size_t users_evaluated = 0;
  std::size_t users_skipped = 0;
  ConfusionCounts confusion;

  bool operator==(const MetricReport&) const = default;
};

MetricReport evaluate(const PairScorer& scorer, const Dataset& test, const EvalProtocol& protocol,
                      const Dataset* history = nullptr);
MetricReport evaluate_model(const HncfModel& model, const InputEncoder& encoder, const Dataset& test,
                            const EvalProtocol& protocol, const Dataset* history = nullptr);

}  // namespace hncf
