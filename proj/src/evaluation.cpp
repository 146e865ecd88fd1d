#include "hncf/evaluation.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "hncf/error.hpp"
#include "hncf/log.hpp"
#include "hncf/rng.hpp"

namespace hncf {

ConfusionCounts confusion(std::span<const double> predictions, std::span<const int> labels,
                          double threshold) {
  if (predictions.size() != labels.size()) {
    fail(ErrorKind::ShapeMismatch, "confusion: " + std::to_string(predictions.size()) +
                                       " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = predictions[i] >= threshold;
    switch (labels[i]) {
      case 1: (predicted ? c.true_positive : c.false_negative)++; break;
      case 0: (predicted ? c.false_positive : c.true_negative)++; break;
      default:
        fail(ErrorKind::InvalidParam, "confusion: label " + std::to_string(labels[i]) + " at row " +
                                          std::to_string(i) + " is not 0 or 1");
    }
  }
  return c;
}

double recall_metric(const ConfusionCounts& c) {
  const std::size_t denom = c.true_positive + c.false_negative;
  if (denom == 0) {
    warn("DegenerateDenominator: recall has no positive labels, reporting 0");
    return 0.0;
  }
  return static_cast<double>(c.true_positive) / static_cast<double>(denom);
}

void EvalProtocol::validate() const {
  if (k < 1) fail(ErrorKind::InvalidConfig, "eval k must be >= 1");
  if (n_negatives < 1) fail(ErrorKind::InvalidConfig, "eval n_negatives must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorKind::InvalidConfig, "eval threshold must lie in (0, 1)");
  }
}

std::size_t final_positive(std::span<const InteractionRecord* const> positives) {
  if (positives.empty()) fail(ErrorKind::EmptyDataset, "user has no positives");
  std::size_t best = 0;
  for (std::size_t i = 1; i < positives.size(); ++i) {
    const auto& a = *positives[i];
    const auto& b = *positives[best];
    const auto ta = a.timestamp.value_or(0);
    const auto tb = b.timestamp.value_or(0);
    if (ta > tb || (ta == tb && a.item_id > b.item_id)) best = i;
  }
  return best;
}

namespace {

// Positives grouped by dense user, in dense user order.
std::map<std::size_t, std::vector<const InteractionRecord*>> positives_by_user(const Dataset& d) {
  std::map<std::size_t, std::vector<const InteractionRecord*>> out;
  for (const auto& r : d.records()) {
    if (r.interaction == 1) out[d.index().user(r.user_id)].push_back(&r);
  }
  return out;
}

}  // namespace

LeaveOneOutSet build_leave_one_out(const Dataset& dataset, const EvalProtocol& protocol,
                                   const Dataset* history) {
  protocol.validate();
  if (dataset.empty()) fail(ErrorKind::EmptyDataset, "leave-one-out needs a non-empty dataset");
  const IdIndex& index = dataset.index();
  const auto by_user = positives_by_user(dataset);

  // Full positive history keyed by raw ids, so `history` may use another index.
  std::map<std::int64_t, std::set<std::int64_t>> seen;
  for (const auto& [user, recs] : by_user) {
    for (const auto* r : recs) seen[r->user_id].insert(r->item_id);
  }
  if (history != nullptr) {
    for (const auto& r : history->records()) {
      if (r.interaction == 1) seen[r.user_id].insert(r.item_id);
    }
  }

  Rng rng(protocol.seed);
  LeaveOneOutSet out;
  for (const auto& [user, recs] : by_user) {
    const InteractionRecord& held = *recs[final_positive(recs)];
    const auto& hist = seen[held.user_id];
    std::vector<std::size_t> pool;
    for (std::size_t item = 0; item < index.item_count(); ++item) {
      if (!hist.contains(index.raw_item(item))) pool.push_back(item);
    }
    if (pool.size() < protocol.n_negatives) {
      ++out.skipped_users;
      continue;
    }
    out.cases.push_back({user, index.item(held.item_id), rng.sample(std::move(pool), protocol.n_negatives)});
  }
  if (out.skipped_users > 0) {
    warn("leave-one-out: skipped " + std::to_string(out.skipped_users) + " user(s) with fewer than " +
         std::to_string(protocol.n_negatives) + " negative candidates");
  }
  return out;
}

std::pair<Dataset, Dataset> split_leave_one_out(const Dataset& dataset) {
  const auto by_user = positives_by_user(dataset);
  std::set<const InteractionRecord*> held;
  for (const auto& [user, recs] : by_user) held.insert(recs[final_positive(recs)]);
  std::vector<InteractionRecord> train, test;
  for (const auto& r : dataset.records()) {
    (held.contains(&r) ? test : train).push_back(r);
  }
  return {dataset.with_records(std::move(train)), dataset.with_records(std::move(test))};
}

PairScorer model_scorer(const HncfModel& model, const InputEncoder& encoder, ConvFeatureCache* cache) {
  return [&model, &encoder, cache](std::span<const UserItem> pairs) {
    std::vector<ModelInput> rows;
    rows.reserve(pairs.size());
    for (const auto& [u, i] : pairs) rows.push_back(encoder.encode(u, i));
    return predict_batch(model, rows, cache);
  };
}

std::size_t rank_of_first(std::span<const double> scores, std::span<const std::size_t> items) {
  if (scores.size() != items.size() || scores.empty()) {
    fail(ErrorKind::ShapeMismatch, "rank_of_first: scores and items must be equal-length and non-empty");
  }
  std::size_t ahead = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[0] || (scores[j] == scores[0] && items[j] < items[0])) ++ahead;
  }
  return ahead + 1;
}

HitRatio hit_ratio_at_k(const PairScorer& scorer, std::span<const LeaveOneOutCase> cases, std::size_t k) {
  if (cases.empty()) fail(ErrorKind::EmptyCases, "hit ratio needs at least one case");
  if (k < 1) fail(ErrorKind::InvalidParam, "k must be >= 1");
  // Score every case in one call so batching can span users.
  std::vector<UserItem> pairs;
  std::vector<std::size_t> offsets;
  for (const auto& c : cases) {
    offsets.push_back(pairs.size());
    pairs.emplace_back(c.user, c.positive);
    for (std::size_t n : c.negatives) pairs.emplace_back(c.user, n);
  }
  const std::vector<double> scores = scorer(pairs);
  if (scores.size() != pairs.size()) fail(ErrorKind::ShapeMismatch, "scorer returned the wrong count");

  HitRatio hr;
  std::vector<std::size_t> items;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const std::size_t n = 1 + cases[c].negatives.size();
    items.clear();
    for (std::size_t j = 0; j < n; ++j) items.push_back(pairs[offsets[c] + j].second);
    if (rank_of_first(std::span(scores).subspan(offsets[c], n), items) <= k) ++hr.hits;
  }
  hr.users = cases.size();
  hr.ratio = static_cast<double>(hr.hits) / static_cast<double>(hr.users);
  return hr;
}

MetricReport evaluate(const PairScorer& scorer, const Dataset& test, const EvalProtocol& protocol,
                      const Dataset* history) {
  protocol.validate();
  if (test.empty()) fail(ErrorKind::EmptyDataset, "evaluation needs a non-empty test dataset");

  std::vector<UserItem> pairs;
  std::vector<int> labels;
  for (const auto& r : test.records()) {
    pairs.emplace_back(test.index().user(r.user_id), test.index().item(r.item_id));
    labels.push_back(r.interaction);
  }
  const std::vector<double> scores = scorer(pairs);

  MetricReport report;
  report.k = protocol.k;
  report.confusion = confusion(scores, labels, protocol.threshold);
  report.recall = recall_metric(report.confusion);

  const LeaveOneOutSet loo = build_leave_one_out(test, protocol, history);
  const HitRatio hr = hit_ratio_at_k(scorer, loo.cases, protocol.k);
  report.hits = hr.hits;
  report.users_evaluated = hr.users;
  report.users_skipped = loo.skipped_users;
  report.hit_ratio_at_k = hr.ratio;
  return report;
}

MetricReport evaluate_model(const HncfModel& model, const InputEncoder& encoder, const Dataset& test,
                            const EvalProtocol& protocol, const Dataset* history) {
  if (&test.index() != &encoder.index()) {
    fail(ErrorKind::InvalidParam, "test dataset and input encoder must share one id index");
  }
  std::optional<ConvFeatureCache> cache;
  if (model.config().uses_image() && model.config().image.frozen_conv) cache.emplace();
  return evaluate(model_scorer(model, encoder, cache ? &*cache : nullptr), test, protocol, history);
}

}  // namespace hncf
