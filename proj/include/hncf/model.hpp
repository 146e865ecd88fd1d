#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hncf/data.hpp"
#include "hncf/encoders.hpp"
#include "hncf/layers.hpp"

namespace hncf {

enum class ModelVariant {
  Ncf,      // user + item ids
  TextNcf,  // ids + item text
  Hybrid,   // ids + item text + item image
};

std::string_view to_string(ModelVariant v);
ModelVariant parse_variant(std::string_view name);  // "ncf" | "text_ncf" | "hybrid"

struct HncfConfig {
  ModelVariant variant = ModelVariant::Hybrid;
  IdEmbeddingConfig user;
  IdEmbeddingConfig item;
  TextEncoderConfig text;
  ImageEncoderConfig image;
  std::vector<std::size_t> fusion_widths{256, 128, 64};
  double dropout_rate = 0.2;
  std::uint64_t seed = 0;

  bool uses_text() const { return variant != ModelVariant::Ncf; }
  bool uses_image() const { return variant == ModelVariant::Hybrid; }
  void validate() const;  // throws InvalidConfig
};

// One (user, item) pair ready for the network. Dense ids index the embedding
// tables; text/image are only read by variants that use them.
struct ModelInput {
  std::size_t user = 0;
  std::size_t item = 0;
  TokenSequence text;
  std::optional<Tensor> image;
};

// Memoizes frozen conv-stack features per image tensor. Only valid while the
// conv parameters cannot change, i.e. for a frozen image encoder.
class ConvFeatureCache {
 public:
  Tensor features(const class ImageEncoder& encoder, const Tensor& image);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  // Keeps the image handle alive so its identity cannot be reused.
  std::unordered_map<const void*, std::pair<Tensor, Tensor>> entries_;
};

/// The fused network: id embeddings [+ text encoder] [+ image encoder] are
/// concatenated and passed through dense+relu+dropout couples and a single
/// sigmoid output unit.
///
/// Copies are deep: a copied model owns fresh parameter storage.
class HncfModel {
 public:
  explicit HncfModel(HncfConfig cfg);
  HncfModel(const HncfModel& other);
  HncfModel& operator=(const HncfModel& other);
  HncfModel(HncfModel&&) noexcept = default;
  HncfModel& operator=(HncfModel&&) noexcept = default;

  const HncfConfig& config() const { return cfg_; }

  // Every parameter in a fixed order with stable dotted names. Frozen
  // parameters are included (requires_grad() == false).
  ParameterList parameters() const;

  // [B×1] interaction probabilities.
  Tensor forward_batch(Tape& tape, std::span<const ModelInput> rows, ops::Mode mode,
                       Rng* dropout_rng = nullptr, ConvFeatureCache* cache = nullptr) const;

  // [B×D] concatenated encoder outputs fed to the fusion stack.
  Tensor fused_features(Tape& tape, std::span<const ModelInput> rows,
                        ConvFeatureCache* cache = nullptr) const;

  const IdEncoder& user_encoder() const { return user_; }
  const IdEncoder& item_encoder() const { return item_; }
  const TextEncoder* text_encoder() const { return text_ ? &*text_ : nullptr; }
  const ImageEncoder* image_encoder() const { return image_ ? &*image_ : nullptr; }
  const std::vector<DenseLayer>& fusion_layers() const { return fusion_; }
  const DenseLayer& output_layer() const { return output_; }

 private:
  void check_inputs(std::span<const ModelInput> rows) const;

  HncfConfig cfg_;
  IdEncoder user_, item_;
  std::optional<TextEncoder> text_;
  std::optional<ImageEncoder> image_;
  std::vector<DenseLayer> fusion_;
  DenseLayer output_;
};

HncfModel build_model(const HncfConfig& cfg);

double forward(const HncfModel& model, const ModelInput& input, ops::Mode mode = ops::Mode::Eval,
               Rng* dropout_rng = nullptr);

// Eval-mode probabilities, one per row, order preserved.
std::vector<double> predict_batch(const HncfModel& model, std::span<const ModelInput> rows,
                                  ConvFeatureCache* cache = nullptr);

struct ScoredItem {
  std::size_t item;
  double score;
  bool operator==(const ScoredItem&) const = default;
};

// Descending score, ties by ascending item id, at most k entries.
std::vector<ScoredItem> recommend_top_k(const HncfModel& model, std::span<const ModelInput> candidates,
                                        std::size_t k, ConvFeatureCache* cache = nullptr);

/// Turns dense (user, item) pairs into ModelInputs using the item catalogue:
/// item text is tokenized once per item, posters come from the ImageStore.
class InputEncoder {
 public:
  InputEncoder(const HncfConfig& cfg, std::shared_ptr<const IdIndex> index,
               const ImageStore* images = nullptr);

  ModelInput encode(std::size_t user, std::size_t item) const;
  ModelInput encode(const InteractionRecord& record) const;
  const IdIndex& index() const { return *index_; }

 private:
  std::shared_ptr<const IdIndex> index_;
  const ImageStore* images_;
  bool text_, image_;
  std::vector<TokenSequence> item_tokens_;
};

}  // namespace hncf
