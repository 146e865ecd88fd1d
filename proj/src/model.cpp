#include "hncf/model.hpp"

#include <algorithm>
#include <iostream>

#include "hncf/error.hpp"
#include "hncf/log.hpp"

namespace hncf {

namespace {
WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}
}  // namespace

void set_warning_sink(WarningSink sink) { warning_sink() = std::move(sink); }

void warn(std::string_view message) {
  if (warning_sink()) {
    warning_sink()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::Ncf: return "ncf";
    case ModelVariant::TextNcf: return "text_ncf";
    case ModelVariant::Hybrid: return "hybrid";
  }
  return "hybrid";
}

ModelVariant parse_variant(std::string_view name) {
  if (name == "ncf") return ModelVariant::Ncf;
  if (name == "text_ncf") return ModelVariant::TextNcf;
  if (name == "hybrid") return ModelVariant::Hybrid;
  fail(ErrorKind::InvalidConfig, "unknown model variant '" + std::string(name) +
                                     "' (expected ncf, text_ncf or hybrid)");
}

void HncfConfig::validate() const {
  try {
    user.validate();
    item.validate();
    if (uses_text()) text.validate();
    if (uses_image()) image.validate();
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, e.what());
  }
  if (fusion_widths.empty()) fail(ErrorKind::InvalidConfig, "fusion_widths must not be empty");
  if (std::any_of(fusion_widths.begin(), fusion_widths.end(), [](std::size_t w) { return w == 0; })) {
    fail(ErrorKind::InvalidConfig, "fusion widths must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail(ErrorKind::InvalidConfig, "dropout_rate must lie in [0, 1)");
  }
}

// ---------------------------------------------------------------------------

Tensor ConvFeatureCache::features(const ImageEncoder& encoder, const Tensor& image) {
  {
    std::lock_guard lock(mutex_);
    if (const auto it = entries_.find(image.id()); it != entries_.end()) return it->second.second;
  }
  Tape tape = Tape::inference();
  Tensor f = encoder.conv_features(tape, image);
  std::lock_guard lock(mutex_);
  entries_.emplace(image.id(), std::make_pair(image, f));
  return f;
}

std::size_t ConvFeatureCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------

HncfModel::HncfModel(HncfConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  user_ = IdEncoder(cfg_.user, rng);
  item_ = IdEncoder(cfg_.item, rng);
  std::size_t width = cfg_.user.dim + cfg_.item.dim;
  if (cfg_.uses_text()) {
    text_.emplace(cfg_.text, rng);
    width += cfg_.text.hidden;
  }
  if (cfg_.uses_image()) {
    image_.emplace(cfg_.image, rng);
    width += cfg_.image.head_dim;
  }
  for (std::size_t w : cfg_.fusion_widths) {
    fusion_.push_back(DenseLayer::create(width, w, rng));
    width = w;
  }
  output_ = DenseLayer::create(width, 1, rng);
}

HncfModel::HncfModel(const HncfModel& other) : HncfModel(other.cfg_) {
  const ParameterList mine = parameters(), theirs = other.parameters();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    Tensor dst = mine[i].tensor;
    const auto src = theirs[i].tensor.values();
    std::copy(src.begin(), src.end(), dst.mutable_values().begin());
  }
}

HncfModel& HncfModel::operator=(const HncfModel& other) {
  if (this != &other) *this = HncfModel(other);
  return *this;
}

ParameterList HncfModel::parameters() const {
  ParameterList out;
  user_.collect("user_embedding", out);
  item_.collect("item_embedding", out);
  if (text_) text_->collect("text", out);
  if (image_) image_->collect("image", out);
  for (std::size_t i = 0; i < fusion_.size(); ++i) fusion_[i].collect("fusion" + std::to_string(i), out);
  output_.collect("output", out);
  return out;
}

void HncfModel::check_inputs(std::span<const ModelInput> rows) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const ModelInput& in = rows[r];
    const std::string where = "row " + std::to_string(r) + ": ";
    if (in.user >= cfg_.user.vocab_size) {
      fail(ErrorKind::IndexOutOfRange, where + "user id " + std::to_string(in.user) + " >= " +
                                           std::to_string(cfg_.user.vocab_size));
    }
    if (in.item >= cfg_.item.vocab_size) {
      fail(ErrorKind::IndexOutOfRange, where + "item id " + std::to_string(in.item) + " >= " +
                                           std::to_string(cfg_.item.vocab_size));
    }
    if (cfg_.uses_text() && in.text.ids.empty()) {
      fail(ErrorKind::MissingInput, where + to_string(cfg_.variant).data() + std::string(" needs item text"));
    }
    if (cfg_.uses_image() && !in.image) {
      fail(ErrorKind::MissingInput, where + "hybrid variant needs an item image");
    }
  }
}

Tensor HncfModel::fused_features(Tape& tape, std::span<const ModelInput> rows,
                                 ConvFeatureCache* cache) const {
  if (rows.empty()) fail(ErrorKind::InvalidParam, "forward on an empty batch");
  check_inputs(rows);
  std::vector<std::size_t> users, items;
  for (const auto& r : rows) {
    users.push_back(r.user);
    items.push_back(r.item);
  }
  std::vector<Tensor> parts{user_.encode_batch(tape, users), item_.encode_batch(tape, items)};
  if (text_) {
    std::vector<Tensor> texts;
    texts.reserve(rows.size());
    for (const auto& r : rows) texts.push_back(text_->encode(tape, r.text));
    parts.push_back(ops::concat(tape, texts, 0));
  }
  if (image_) {
    const bool cacheable = cache != nullptr && image_->config().frozen_conv;
    std::vector<Tensor> feats;
    feats.reserve(rows.size());
    for (const auto& r : rows) {
      feats.push_back(cacheable ? cache->features(*image_, *r.image)
                                : image_->conv_features(tape, *r.image));
    }
    parts.push_back(image_->apply_head(tape, ops::concat(tape, feats, 0)));
  }
  return ops::concat(tape, parts, 1);
}

Tensor HncfModel::forward_batch(Tape& tape, std::span<const ModelInput> rows, ops::Mode mode,
                                Rng* dropout_rng, ConvFeatureCache* cache) const {
  Tensor x = fused_features(tape, rows, cache);
  for (const DenseLayer& layer : fusion_) {
    x = ops::dropout(tape, ops::relu(tape, layer.apply(tape, x)), cfg_.dropout_rate, mode, dropout_rng);
  }
  return ops::sigmoid(tape, output_.apply(tape, x));
}

HncfModel build_model(const HncfConfig& cfg) { return HncfModel(cfg); }

double forward(const HncfModel& model, const ModelInput& input, ops::Mode mode, Rng* dropout_rng) {
  Tape tape = Tape::inference();
  return model.forward_batch(tape, std::span(&input, 1), mode, dropout_rng).item();
}

std::vector<double> predict_batch(const HncfModel& model, std::span<const ModelInput> rows,
                                  ConvFeatureCache* cache) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto chunk = rows.subspan(start, std::min(kChunk, rows.size() - start));
    Tape tape = Tape::inference();
    try {
      const Tensor p = model.forward_batch(tape, chunk, ops::Mode::Eval, nullptr, cache);
      out.insert(out.end(), p.values().begin(), p.values().end());
    } catch (const Error& e) {
      if (start == 0) throw;
      fail(e.kind(), "batch offset " + std::to_string(start) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ScoredItem> recommend_top_k(const HncfModel& model, std::span<const ModelInput> candidates,
                                        std::size_t k, ConvFeatureCache* cache) {
  if (candidates.empty()) fail(ErrorKind::EmptyCandidates, "no candidate items to rank");
  if (k < 1) fail(ErrorKind::InvalidParam, "k must be >= 1");
  const std::vector<double> scores = predict_batch(model, candidates, cache);
  std::vector<ScoredItem> ranked;
  ranked.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) ranked.push_back({candidates[i].item, scores[i]});
  std::sort(ranked.begin(), ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  ranked.resize(std::min(k, ranked.size()));
  return ranked;
}

// ---------------------------------------------------------------------------

InputEncoder::InputEncoder(const HncfConfig& cfg, std::shared_ptr<const IdIndex> index,
                           const ImageStore* images)
    : index_(std::move(index)), images_(images), text_(cfg.uses_text()), image_(cfg.uses_image()) {
  if (image_ && images_ == nullptr) fail(ErrorKind::MissingInput, "hybrid variant needs an image store");
  if (image_ && (images_->height() != cfg.image.height || images_->width() != cfg.image.width)) {
    fail(ErrorKind::ShapeMismatch, "image store shape differs from the image encoder input");
  }
  if (text_) {
    item_tokens_.reserve(index_->item_count());
    for (std::size_t i = 0; i < index_->item_count(); ++i) {
      item_tokens_.push_back(tokenize(index_->item_info(i).features_text, cfg.text));
    }
  }
}

ModelInput InputEncoder::encode(std::size_t user, std::size_t item) const {
  ModelInput in;
  in.user = user;
  in.item = item;
  if (text_) in.text = item_tokens_.at(item);
  if (image_) in.image = images_->get(index_->item_info(item).image_path);
  return in;
}

ModelInput InputEncoder::encode(const InteractionRecord& record) const {
  return encode(index_->user(record.user_id), index_->item(record.item_id));
}

}  // namespace hncf
