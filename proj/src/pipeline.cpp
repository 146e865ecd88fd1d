#include "hncf/pipeline.hpp"

#include <set>

#include "hncf/error.hpp"

namespace hncf {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVocabFile = "vocab.txt";

std::vector<std::string> catalogue_texts(const Dataset& d) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < d.index().item_count(); ++i) texts.push_back(d.index().item_info(i).features_text);
  return texts;
}

}  // namespace

Dataset prepare(const fs::path& interactions, const fs::path& out_dir, const PrepareOptions& opts) {
  Dataset data = load_interactions(interactions);
  if (opts.sample_fraction < 1.0) data = sample_fraction(data, opts.sample_fraction, opts.seed);
  data = preprocess_dataset(data);

  std::vector<InteractionRecord> rows = data.records();
  const fs::path src_dir = fs::absolute(interactions).parent_path();
  fs::create_directories(out_dir);
  const fs::path dst_dir = fs::absolute(out_dir);
  for (auto& r : rows) {
    if (r.image_path.empty() || fs::path(r.image_path).is_absolute()) continue;
    r.image_path = (src_dir / r.image_path).lexically_normal().lexically_relative(dst_dir).generic_string();
  }
  data = Dataset(std::move(rows));
  if (opts.neg_ratio > 0) data = generate_negatives(data, opts.neg_ratio, opts.seed);

  save_interactions(data, out_dir / kInteractionsFile);
  const auto texts = catalogue_texts(data);
  build_vocab(texts, opts.max_vocab).save(out_dir / kVocabFile);
  return data;
}

DataBundle load_data(const fs::path& dir, const DataConfig& data, const HncfConfig& model) {
  DataBundle b;
  b.full = load_interactions(dir / data.interactions);
  if (model.uses_text()) {
    const fs::path vocab_path = dir / data.vocabulary;
    if (fs::exists(vocab_path)) {
      b.vocab = std::make_shared<Vocabulary>(Vocabulary::load(vocab_path));
    } else {
      const auto texts = catalogue_texts(b.full);
      b.vocab = std::make_shared<Vocabulary>(build_vocab(texts, data.max_vocab));
    }
  }
  if (model.uses_image()) b.images = std::make_unique<ImageStore>(dir, model.image.height, model.image.width);
  std::tie(b.train, b.test) = split_leave_one_out(b.full);
  return b;
}

HncfConfig sized_config(HncfConfig cfg, const DataBundle& data) {
  cfg.user.vocab_size = data.full.index().user_count();
  cfg.item.vocab_size = data.full.index().item_count();
  if (data.vocab) cfg.text.vocab = data.vocab;
  return cfg;
}

TrainResult train_run(const RunConfig& cfg, const fs::path& data_dir,
                      const std::function<void(const EpochMetrics&)>& on_epoch) {
  const DataBundle data = load_data(data_dir, cfg.data, cfg.model);
  if (data.train.empty()) fail(ErrorKind::EmptyDataset, "no training rows left after holding out test items");
  const HncfConfig model_cfg = sized_config(cfg.model, data);
  TrainResult result{HncfModel(model_cfg), {}, {}};
  const InputEncoder encoder(model_cfg, data.full.shared_index(), data.images.get());
  result.epochs = fit(result.model, encoder, data.train, cfg.train, on_epoch);
  result.metadata = {{"run_config", to_json(cfg)}, {"train_rows", data.train.size()}, {"test_rows", data.test.size()}};
  return result;
}

namespace {

struct Loaded {
  DataConfig data;
  DataBundle bundle;
};

Loaded load_for(const Checkpoint& ck, const fs::path& data_dir) {
  RunConfig run;
  if (ck.training.contains("run_config")) run = run_config_from_json(ck.training.at("run_config"));
  Loaded l{run.data, load_data(data_dir, run.data, ck.model.config())};
  if (l.bundle.full.index().raw_users() != ck.users || l.bundle.full.index().raw_items() != ck.items) {
    fail(ErrorKind::MissingInput, "data in " + data_dir.string() + " does not match the checkpoint's users/items");
  }
  return l;
}

EvalProtocol protocol_of(const Checkpoint& ck) {
  if (!ck.training.contains("run_config")) return {};
  return run_config_from_json(ck.training.at("run_config")).eval;
}

}  // namespace

MetricReport evaluate_run(const Checkpoint& ck, const fs::path& data_dir, std::optional<std::size_t> k,
                          std::optional<std::size_t> n_negatives) {
  const Loaded l = load_for(ck, data_dir);
  EvalProtocol protocol = protocol_of(ck);
  if (k) protocol.k = *k;
  if (n_negatives) protocol.n_negatives = *n_negatives;
  if (l.bundle.test.empty()) fail(ErrorKind::EmptyDataset, "no held-out positives to evaluate");
  const InputEncoder encoder(ck.model.config(), l.bundle.full.shared_index(), l.bundle.images.get());
  return evaluate_model(ck.model, encoder, l.bundle.test, protocol, &l.bundle.full);
}

std::vector<std::pair<std::int64_t, double>> recommend_run(const Checkpoint& ck, const fs::path& data_dir,
                                                           std::int64_t user, std::size_t k) {
  const Loaded l = load_for(ck, data_dir);
  const IdIndex& index = l.bundle.full.index();
  const std::size_t u = index.user(user);
  std::set<std::int64_t> seen;
  for (const auto& r : l.bundle.full.records()) {
    if (r.user_id == user && r.interaction == 1) seen.insert(r.item_id);
  }
  const InputEncoder encoder(ck.model.config(), l.bundle.full.shared_index(), l.bundle.images.get());
  std::vector<ModelInput> candidates;
  for (std::size_t i = 0; i < index.item_count(); ++i) {
    if (!seen.contains(index.raw_item(i))) candidates.push_back(encoder.encode(u, i));
  }
  std::optional<ConvFeatureCache> cache;
  if (ck.model.config().uses_image() && ck.model.config().image.frozen_conv) cache.emplace();
  std::vector<std::pair<std::int64_t, double>> out;
  for (const auto& s : recommend_top_k(ck.model, candidates, k, cache ? &*cache : nullptr)) {
    out.emplace_back(index.raw_item(s.item), s.score);
  }
  return out;
}

}  // namespace hncf
