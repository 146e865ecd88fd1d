#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hncf/layers.hpp"

namespace hncf {

// ---------------------------------------------------------------------------
// vocabulary + tokenization

/// Token -> id map. Ids 0..2 are reserved for PAD, UNK and CLS; corpus tokens
/// start at id 3.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kReserved = 3;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return kReserved + tokens_.size(); }
  std::size_t id_of(std::string_view token) const;
  // Corpus tokens in id order (token i has id i + kReserved).
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line; line i (0-based) holds id i + 3.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Whitespace tokens ranked by descending frequency, ties lexicographic; keeps
// the top max_vocab - 3. Throws EmptyCorpus.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_vocab);

struct TokenSequence {
  std::vector<std::size_t> ids;             // length max_len, ids[0] == CLS
  std::vector<unsigned char> attention_mask;  // 1 over CLS + real tokens, then 0

  std::size_t real_length() const;
};

// ---------------------------------------------------------------------------
// configs

struct IdEmbeddingConfig {
  std::size_t vocab_size = 1;
  std::size_t dim = 32;

  void validate() const;
};

struct TextEncoderConfig {
  std::size_t layers = 2;   // stacked encoder blocks
  std::size_t hidden = 64;
  std::size_t heads = 2;
  std::size_t max_len = 64;  // includes the CLS slot
  std::shared_ptr<const Vocabulary> vocab = std::make_shared<Vocabulary>();
  bool use_positional = true;
  bool trainable = true;

  void validate() const;
};

struct ConvBlockSpec {
  std::size_t channels;
  std::size_t convs;
  bool operator==(const ConvBlockSpec&) const = default;
};

struct ImageEncoderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<ConvBlockSpec> blocks{{8, 2}, {16, 2}};
  bool frozen_conv = true;
  std::size_t head_dim = 32;

  static constexpr std::size_t kChannels = 3;
  Shape input_shape() const { return {height, width, kChannels}; }
  void validate() const;
};

TokenSequence tokenize(std::string_view text, const TextEncoderConfig& cfg);

// ---------------------------------------------------------------------------
// encoders

class IdEncoder {
 public:
  IdEncoder() = default;
  IdEncoder(IdEmbeddingConfig cfg, Rng& rng);

  const IdEmbeddingConfig& config() const { return cfg_; }
  const Tensor& table() const { return table_; }

  // [1×dim]
  Tensor encode(Tape& tape, std::size_t id) const;
  // [n×dim], one row per id
  Tensor encode_batch(Tape& tape, std::span<const std::size_t> ids) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  IdEmbeddingConfig cfg_;
  Tensor table_;
};

struct EncoderBlock {
  DenseLayer query, key, value, output;
  LayerNormParams attention_norm;
  DenseLayer feed_forward_in, feed_forward_out;
  LayerNormParams output_norm;
};

/// Transformer-style text encoder with CLS pooling.
///
/// Each block applies masked multi-head self-attention, a residual connection
/// and layer norm, then a relu feed-forward of width 4H with its own residual
/// and layer norm. Masked positions receive -1e9 attention logits.
///
/// With skip_padding set (the default) only the CLS + real-token prefix is
/// computed. Masked keys get exactly zero attention weight, so this produces
/// the same CLS vector as the full-length computation.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(TextEncoderConfig cfg, Rng& rng);

  const TextEncoderConfig& config() const { return cfg_; }
  const Tensor& token_embedding() const { return token_embedding_; }

  // [1×hidden]
  Tensor encode(Tape& tape, const TokenSequence& seq, bool skip_padding = true) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Tensor attention(Tape& tape, const EncoderBlock& block, const Tensor& x,
                   const Tensor* mask_bias) const;

  TextEncoderConfig cfg_;
  Tensor token_embedding_;     // [vocab×H]
  Tensor position_embedding_;  // [max_len×H], only when use_positional
  std::vector<EncoderBlock> blocks_;
};

struct ConvLayer {
  Tensor kernel;  // [3×3×Cin×Cout]
  Tensor bias;    // [Cout]
};

/// VGG-style image encoder: per block, (3×3 conv pad 1 + relu) × convs, then
/// 2×2/2 max pooling; the final maps are flattened into one dense relu head.
/// When frozen_conv is set the conv parameters never require grad.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ImageEncoderConfig cfg, Rng& rng);

  const ImageEncoderConfig& config() const { return cfg_; }
  const std::vector<ConvLayer>& conv_layers() const { return convs_; }
  const DenseLayer& head() const { return head_; }
  std::size_t feature_size() const { return feature_size_; }

  // Flattened conv-stack output, [1×feature_size].
  Tensor conv_features(Tape& tape, const Tensor& pixels) const;
  // Dense relu head over [n×feature_size] -> [n×head_dim].
  Tensor apply_head(Tape& tape, const Tensor& features) const;
  // [1×head_dim]
  Tensor encode(Tape& tape, const Tensor& pixels) const;

  void collect(const std::string& prefix, ParameterList& out) const;
  void collect_conv(const std::string& prefix, ParameterList& out) const;

 private:
  ImageEncoderConfig cfg_;
  std::vector<ConvLayer> convs_;
  DenseLayer head_;
  std::size_t feature_size_ = 0;
};

}  // namespace hncf
