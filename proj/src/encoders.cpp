#include "hncf/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "hncf/error.hpp"

namespace hncf {

namespace {

constexpr double kMaskedLogit = -1e9;
constexpr double kEmbeddingInitRange = 0.05;

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i + kReserved).second) {
      fail(ErrorKind::InvalidParam, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::size_t Vocabulary::id_of(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) fail(ErrorKind::IoError, "failed writing vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FileNotFound, "vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_vocab) {
  if (corpus.empty()) fail(ErrorKind::EmptyCorpus, "cannot build a vocabulary from no documents");
  std::map<std::string, std::size_t, std::less<>> freq;
  for (const auto& doc : corpus)
    for (auto tok : split_whitespace(doc)) ++freq[std::string(tok)];

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // leaves ties in lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = max_vocab > Vocabulary::kReserved ? max_vocab - Vocabulary::kReserved : 0;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(std::move(tokens));
}

std::size_t TokenSequence::real_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

TokenSequence tokenize(std::string_view text, const TextEncoderConfig& cfg) {
  TokenSequence seq;
  seq.ids.assign(cfg.max_len, Vocabulary::kPad);
  seq.attention_mask.assign(cfg.max_len, 0);
  seq.ids[0] = Vocabulary::kCls;
  seq.attention_mask[0] = 1;
  std::size_t pos = 1;
  for (auto tok : split_whitespace(text)) {
    if (pos >= cfg.max_len) break;
    seq.ids[pos] = cfg.vocab->id_of(tok);
    seq.attention_mask[pos] = 1;
    ++pos;
  }
  return seq;
}

// ---------------------------------------------------------------------------
// config validation

void IdEmbeddingConfig::validate() const {
  if (vocab_size < 1 || dim < 1) {
    fail(ErrorKind::InvalidConfig, "id embedding needs vocab_size >= 1 and dim >= 1");
  }
}

void TextEncoderConfig::validate() const {
  if (hidden < 1 || heads < 1 || hidden % heads != 0) {
    fail(ErrorKind::InvalidConfig, "text encoder hidden size " + std::to_string(hidden) +
                                       " must be a positive multiple of heads " +
                                       std::to_string(heads));
  }
  if (max_len < 2) fail(ErrorKind::InvalidConfig, "text encoder max_len must be >= 2");
  if (!vocab) fail(ErrorKind::InvalidConfig, "text encoder has no vocabulary");
}

void ImageEncoderConfig::validate() const {
  if (height < 8 || width < 8) fail(ErrorKind::InvalidConfig, "image height and width must be >= 8");
  if (blocks.empty()) fail(ErrorKind::InvalidConfig, "image encoder needs at least one conv block");
  if (head_dim < 1) fail(ErrorKind::InvalidConfig, "image head_dim must be >= 1");
  std::size_t h = height, w = width;
  for (const auto& b : blocks) {
    if (b.channels < 1 || b.convs < 1) {
      fail(ErrorKind::InvalidConfig, "conv blocks need channels >= 1 and convs >= 1");
    }
    if (h < 2 || w < 2) fail(ErrorKind::InvalidConfig, "too many conv blocks for the image size");
    h /= 2;
    w /= 2;
  }
}

// ---------------------------------------------------------------------------
// IdEncoder

IdEncoder::IdEncoder(IdEmbeddingConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  table_ = init::uniform({cfg_.vocab_size, cfg_.dim}, -kEmbeddingInitRange, kEmbeddingInitRange, rng);
}

Tensor IdEncoder::encode(Tape& tape, std::size_t id) const {
  const std::size_t ids[] = {id};
  return ops::embedding_lookup(tape, table_, ids);
}

Tensor IdEncoder::encode_batch(Tape& tape, std::span<const std::size_t> ids) const {
  return ops::embedding_lookup(tape, table_, ids);
}

void IdEncoder::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".table", table_});
}

// ---------------------------------------------------------------------------
// TextEncoder

TextEncoder::TextEncoder(TextEncoderConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::size_t h = cfg_.hidden;
  token_embedding_ =
      init::uniform({cfg_.vocab->size(), h}, -kEmbeddingInitRange, kEmbeddingInitRange, rng);
  if (cfg_.use_positional) {
    position_embedding_ =
        init::uniform({cfg_.max_len, h}, -kEmbeddingInitRange, kEmbeddingInitRange, rng);
  }
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    EncoderBlock b;
    b.query = DenseLayer::create(h, h, rng);
    // No key bias: it adds the same q·b to every logit of a query, which
    // softmax cancels, so its gradient is identically zero.
    b.key = DenseLayer::create(h, h, rng, false);
    b.value = DenseLayer::create(h, h, rng);
    b.output = DenseLayer::create(h, h, rng);
    b.attention_norm = LayerNormParams::create(h);
    b.feed_forward_in = DenseLayer::create(h, 4 * h, rng);
    b.feed_forward_out = DenseLayer::create(4 * h, h, rng);
    b.output_norm = LayerNormParams::create(h);
    blocks_.push_back(std::move(b));
  }
  if (!cfg_.trainable) {
    ParameterList params;
    collect("", params);
    set_trainable(params, false);
  }
}

Tensor TextEncoder::attention(Tape& tape, const EncoderBlock& block, const Tensor& x,
                              const Tensor* mask_bias) const {
  const std::size_t dh = cfg_.hidden / cfg_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor q = block.query.apply(tape, x);
  const Tensor k = block.key.apply(tape, x);
  const Tensor v = block.value.apply(tape, x);
  std::vector<Tensor> heads;
  heads.reserve(cfg_.heads);
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const Tensor qh = ops::slice(tape, q, 1, h * dh, dh);
    const Tensor kh = ops::slice(tape, k, 1, h * dh, dh);
    const Tensor vh = ops::slice(tape, v, 1, h * dh, dh);
    Tensor scores = ops::scale(tape, ops::matmul(tape, qh, ops::transpose(tape, kh)), inv_sqrt);
    if (mask_bias) scores = ops::add(tape, scores, *mask_bias);
    heads.push_back(ops::matmul(tape, ops::softmax(tape, scores, 1), vh));
  }
  return block.output.apply(tape, ops::concat(tape, heads, 1));
}

Tensor TextEncoder::encode(Tape& tape, const TokenSequence& seq, bool skip_padding) const {
  if (seq.ids.size() != cfg_.max_len || seq.attention_mask.size() != cfg_.max_len) {
    fail(ErrorKind::ShapeMismatch, "token sequence length " + std::to_string(seq.ids.size()) +
                                       " does not match max_len " + std::to_string(cfg_.max_len));
  }
  const std::size_t n = skip_padding ? std::max<std::size_t>(seq.real_length(), 1) : cfg_.max_len;
  const std::span<const std::size_t> ids(seq.ids.data(), n);
  Tensor x = ops::embedding_lookup(tape, token_embedding_, ids);
  if (cfg_.use_positional) {
    std::vector<std::size_t> positions(n);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    x = ops::add(tape, x, ops::embedding_lookup(tape, position_embedding_, positions));
  }

  std::optional<Tensor> mask_bias;
  if (std::any_of(seq.attention_mask.begin(), seq.attention_mask.begin() + static_cast<std::ptrdiff_t>(n),
                  [](unsigned char m) { return m == 0; })) {
    std::vector<double> bias(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (seq.attention_mask[j] == 0) bias[i * n + j] = kMaskedLogit;
    mask_bias = Tensor({n, n}, std::move(bias));
  }

  for (const EncoderBlock& block : blocks_) {
    const Tensor attended = attention(tape, block, x, mask_bias ? &*mask_bias : nullptr);
    x = block.attention_norm.apply(tape, ops::add(tape, x, attended));
    const Tensor ff = block.feed_forward_out.apply(
        tape, ops::relu(tape, block.feed_forward_in.apply(tape, x)));
    x = block.output_norm.apply(tape, ops::add(tape, x, ff));
  }
  return ops::slice(tape, x, 0, 0, 1);
}

void TextEncoder::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".token_embedding", token_embedding_});
  if (cfg_.use_positional) out.push_back({prefix + ".position_embedding", position_embedding_});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = prefix + ".block" + std::to_string(l);
    const EncoderBlock& b = blocks_[l];
    b.query.collect(p + ".query", out);
    b.key.collect(p + ".key", out);
    b.value.collect(p + ".value", out);
    b.output.collect(p + ".attn_out", out);
    b.attention_norm.collect(p + ".attn_norm", out);
    b.feed_forward_in.collect(p + ".ff_in", out);
    b.feed_forward_out.collect(p + ".ff_out", out);
    b.output_norm.collect(p + ".out_norm", out);
  }
}

// ---------------------------------------------------------------------------
// ImageEncoder

ImageEncoder::ImageEncoder(ImageEncoderConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t in_c = ImageEncoderConfig::kChannels, h = cfg_.height, w = cfg_.width;
  for (const auto& block : cfg_.blocks) {
    for (std::size_t c = 0; c < block.convs; ++c) {
      ConvLayer layer{init::glorot_uniform({3, 3, in_c, block.channels}, 9 * in_c,
                                           9 * block.channels, rng),
                      Tensor::zeros({block.channels}, true)};
      convs_.push_back(std::move(layer));
      in_c = block.channels;
    }
    h /= 2;
    w /= 2;
  }
  feature_size_ = h * w * in_c;
  head_ = DenseLayer::create(feature_size_, cfg_.head_dim, rng);
  if (cfg_.frozen_conv) {
    ParameterList conv_params;
    collect_conv("", conv_params);
    set_trainable(conv_params, false);
  }
}

Tensor ImageEncoder::conv_features(Tape& tape, const Tensor& pixels) const {
  if (pixels.shape() != cfg_.input_shape()) {
    fail(ErrorKind::ShapeMismatch, "image " + shape_to_string(pixels.shape()) +
                                       " does not match encoder input " +
                                       shape_to_string(cfg_.input_shape()));
  }
  Tensor x = pixels;
  std::size_t layer = 0;
  for (const auto& block : cfg_.blocks) {
    for (std::size_t c = 0; c < block.convs; ++c, ++layer) {
      const ConvLayer& conv = convs_[layer];
      x = ops::relu(tape, ops::add_bias(tape, ops::conv2d(tape, x, conv.kernel, 1, 1), conv.bias));
    }
    x = ops::maxpool2d(tape, x, 2, 2);
  }
  return ops::reshape(tape, x, {1, feature_size_});
}

Tensor ImageEncoder::apply_head(Tape& tape, const Tensor& features) const {
  return ops::relu(tape, head_.apply(tape, features));
}

Tensor ImageEncoder::encode(Tape& tape, const Tensor& pixels) const {
  return apply_head(tape, conv_features(tape, pixels));
}

void ImageEncoder::collect_conv(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    out.push_back({p + ".kernel", convs_[i].kernel});
    out.push_back({p + ".bias", convs_[i].bias});
  }
}

void ImageEncoder::collect(const std::string& prefix, ParameterList& out) const {
  collect_conv(prefix, out);
  head_.collect(prefix + ".head", out);
}

}  // namespace hncf
