#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hncf/image_io.hpp"
#include "hncf/tensor.hpp"

namespace hncf {

struct InteractionRecord {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  int interaction = 0;  // 0 = not watched, 1 = watched
  std::string features_text;
  std::string image_path;
  std::optional<std::int64_t> timestamp;

  bool operator==(const InteractionRecord&) const = default;
};

struct DatasetStats {
  std::size_t rows = 0;
  std::size_t unique_users = 0;
  std::size_t unique_items = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats compute_stats(const std::vector<InteractionRecord>& records);

struct ItemInfo {
  std::string features_text;
  std::string image_path;
};

/// Raw id -> dense index maps plus the item catalogue (features of each item,
/// taken from its first record). Dense indices follow ascending raw id.
class IdIndex {
 public:
  explicit IdIndex(const std::vector<InteractionRecord>& records);

  std::size_t user_count() const { return users_.size(); }
  std::size_t item_count() const { return items_.size(); }
  std::optional<std::size_t> find_user(std::int64_t raw) const;
  std::optional<std::size_t> find_item(std::int64_t raw) const;
  std::size_t user(std::int64_t raw) const;  // throws IndexOutOfRange
  std::size_t item(std::int64_t raw) const;
  std::int64_t raw_user(std::size_t dense) const { return users_.at(dense); }
  std::int64_t raw_item(std::size_t dense) const { return items_.at(dense); }
  const std::vector<std::int64_t>& raw_users() const { return users_; }
  const std::vector<std::int64_t>& raw_items() const { return items_; }
  const ItemInfo& item_info(std::size_t dense) const { return info_.at(dense); }

 private:
  std::vector<std::int64_t> users_, items_;
  std::unordered_map<std::int64_t, std::size_t> user_pos_, item_pos_;
  std::vector<ItemInfo> info_;
};

/// Immutable list of interaction rows with dense id re-indexing.
///
/// Subsets derived from a dataset (splits, negatives) share the parent's
/// IdIndex so dense ids stay consistent with a model built on the parent.
class Dataset {
 public:
  Dataset() : Dataset(std::vector<InteractionRecord>{}) {}
  explicit Dataset(std::vector<InteractionRecord> records);
  Dataset(std::vector<InteractionRecord> records, std::shared_ptr<const IdIndex> index);

  const std::vector<InteractionRecord>& records() const { return records_; }
  const IdIndex& index() const { return *index_; }
  const std::shared_ptr<const IdIndex>& shared_index() const { return index_; }
  const DatasetStats& stats() const { return stats_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Same index, different rows.
  Dataset with_records(std::vector<InteractionRecord> records) const;

 private:
  std::vector<InteractionRecord> records_;
  std::shared_ptr<const IdIndex> index_;
  DatasetStats stats_;
};

// ---------------------------------------------------------------------------
// interactions CSV

inline constexpr std::string_view kInteractionsFile = "interactions.csv";

// Header names user_id,item_id,interaction,image_path,features_text and an
// optional timestamp column, in any order. Throws EmptyFile, MissingColumn,
// MalformedRow (with line number), FileNotFound.
Dataset load_interactions(const std::filesystem::path& path);
Dataset parse_interactions(std::istream& in, const std::string& source_name = "<stream>");
void save_interactions(const Dataset& dataset, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// text preprocessing

using StopWords = std::unordered_set<std::string>;

// The stop-word list compiled into the library from data/stopwords.txt.
const StopWords& default_stop_words();
StopWords parse_stop_words(std::string_view text);

// Lowercases ASCII, replaces every character outside [a-z0-9] and whitespace
// with a space, collapses whitespace, trims, and drops stop words.
std::string preprocess_text(std::string_view raw, const StopWords& stop_words = default_stop_words());

// Applies preprocess_text to every record's features_text.
Dataset preprocess_dataset(const Dataset& dataset, const StopWords& stop_words = default_stop_words());

// ---------------------------------------------------------------------------
// images

Tensor preprocess_image(const std::filesystem::path& path, std::size_t height, std::size_t width);

/// Decoded, normalized poster cache keyed by the record's image path.
/// Relative paths resolve against `root`. Safe for concurrent get().
class ImageStore {
 public:
  ImageStore(std::filesystem::path root, std::size_t height, std::size_t width);

  Tensor get(const std::string& path) const;
  // Registers an in-memory image under `path` (no file needed).
  void insert(const std::string& path, const RgbImage& image);
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

 private:
  std::filesystem::path root_;
  std::size_t height_, width_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Tensor> cache_;
};

// ---------------------------------------------------------------------------
// sampling

// ceil(fraction * n) records drawn uniformly without replacement; the result
// gets a fresh index. Throws InvalidParam unless 0 < fraction <= 1.
Dataset sample_fraction(const Dataset& dataset, double fraction, std::uint64_t seed);

/// For every positive record, `ratio` interaction-0 records for the same user
/// with items the user never interacted with positively, drawn without
/// replacement per user. A user whose candidate pool is smaller than
/// ratio × positives receives the whole pool. Original rows are kept, negatives
/// are appended. Throws ExhaustedCandidates when a user has interacted with
/// every item.
Dataset generate_negatives(const Dataset& dataset, std::size_t ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// synthetic fixture

struct SynthConfig {
  std::size_t impressions_per_user = 10;
  double match_rate = 0.9;     // P(interaction) when user and item topics agree
  double mismatch_rate = 0.1;  // P(interaction) otherwise
  std::size_t image_size = 32;
  std::size_t filler_words = 3;
};

struct SynthData {
  Dataset dataset;
  std::vector<int> user_topic;  // by dense user
  std::vector<int> item_topic;  // by dense item
  std::map<std::string, RgbImage> images;  // image_path -> raster
  double expected_positive_rate = 0.0;
};

inline constexpr std::string_view kTopicKeywords[2] = {"space", "romance"};

// Two latent topics; users and items each get one, assigned independently of
// their ids. Each user sees impressions_per_user distinct items and watches
// each with match_rate / mismatch_rate. Item text carries exactly one topic
// keyword; item images are topic-coloured noise.
SynthData synth_generate(std::size_t n_users, std::size_t n_items, std::uint64_t seed,
                         const SynthConfig& cfg = {});

// interactions.csv plus images/ under `dir`.
void write_synth(const SynthData& data, const std::filesystem::path& dir);

// Loads every image referenced by the dataset's catalogue into `store`.
void register_images(const SynthData& data, ImageStore& store);

}  // namespace hncf
