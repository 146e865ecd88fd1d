#include "hncf/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hncf/csv.hpp"
#include "hncf/error.hpp"
#include "hncf/rng.hpp"

namespace hncf {

namespace detail {
extern const std::string_view kStopWordsText;
}

// ---------------------------------------------------------------------------
// stats + index

DatasetStats compute_stats(const std::vector<InteractionRecord>& records) {
  DatasetStats s;
  s.rows = records.size();
  std::unordered_set<std::int64_t> users, items;
  for (const auto& r : records) {
    users.insert(r.user_id);
    items.insert(r.item_id);
    (r.interaction == 1 ? s.positives : s.negatives) += 1;
  }
  s.unique_users = users.size();
  s.unique_items = items.size();
  return s;
}

IdIndex::IdIndex(const std::vector<InteractionRecord>& records) {
  std::map<std::int64_t, const InteractionRecord*> first_item;
  std::set<std::int64_t> users;
  for (const auto& r : records) {
    users.insert(r.user_id);
    first_item.emplace(r.item_id, &r);
  }
  users_.assign(users.begin(), users.end());
  for (std::size_t i = 0; i < users_.size(); ++i) user_pos_.emplace(users_[i], i);
  for (const auto& [raw, rec] : first_item) {
    item_pos_.emplace(raw, items_.size());
    items_.push_back(raw);
    info_.push_back(ItemInfo{rec->features_text, rec->image_path});
  }
}

std::optional<std::size_t> IdIndex::find_user(std::int64_t raw) const {
  const auto it = user_pos_.find(raw);
  return it == user_pos_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
}

std::optional<std::size_t> IdIndex::find_item(std::int64_t raw) const {
  const auto it = item_pos_.find(raw);
  return it == item_pos_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
}

std::size_t IdIndex::user(std::int64_t raw) const {
  if (auto d = find_user(raw)) return *d;
  fail(ErrorKind::IndexOutOfRange, "unknown user id " + std::to_string(raw));
}

std::size_t IdIndex::item(std::int64_t raw) const {
  if (auto d = find_item(raw)) return *d;
  fail(ErrorKind::IndexOutOfRange, "unknown item id " + std::to_string(raw));
}

Dataset::Dataset(std::vector<InteractionRecord> records)
    : records_(std::move(records)),
      index_(std::make_shared<IdIndex>(records_)),
      stats_(compute_stats(records_)) {}

Dataset::Dataset(std::vector<InteractionRecord> records, std::shared_ptr<const IdIndex> index)
    : records_(std::move(records)), index_(std::move(index)), stats_(compute_stats(records_)) {
  for (const auto& r : records_) {
    index_->user(r.user_id);
    index_->item(r.item_id);
  }
}

Dataset Dataset::with_records(std::vector<InteractionRecord> records) const {
  return Dataset(std::move(records), index_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const char* const kRequiredColumns[] = {"user_id", "item_id", "interaction", "image_path",
                                        "features_text"};

std::int64_t parse_id(const std::string& field, const char* column, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end || v < 0) {
    fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": " + column +
                                      " must be a non-negative integer, got '" + field + "'");
  }
  return v;
}

}  // namespace

Dataset parse_interactions(std::istream& in, const std::string& source_name) {
  const std::vector<csv::Row> rows = csv::read(in);
  if (rows.empty()) fail(ErrorKind::EmptyFile, source_name + " is empty");

  const auto& header = rows.front().fields;
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::size_t col[5];
  for (std::size_t i = 0; i < 5; ++i) {
    const auto c = column(kRequiredColumns[i]);
    if (!c) fail(ErrorKind::MissingColumn, source_name + ": header lacks '" + kRequiredColumns[i] + "'");
    col[i] = *c;
  }
  const auto ts_col = column("timestamp");

  std::vector<InteractionRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      fail(ErrorKind::MalformedRow, source_name + " line " + std::to_string(row.line) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(row.fields.size()));
    }
    InteractionRecord rec;
    rec.user_id = parse_id(row.fields[col[0]], "user_id", row.line);
    rec.item_id = parse_id(row.fields[col[1]], "item_id", row.line);
    const std::string& inter = row.fields[col[2]];
    if (inter != "0" && inter != "1") {
      fail(ErrorKind::MalformedRow, source_name + " line " + std::to_string(row.line) +
                                        ": interaction must be 0 or 1, got '" + inter + "'");
    }
    rec.interaction = inter == "1" ? 1 : 0;
    rec.image_path = row.fields[col[3]];
    rec.features_text = row.fields[col[4]];
    if (ts_col && !row.fields[*ts_col].empty()) {
      rec.timestamp = parse_id(row.fields[*ts_col], "timestamp", row.line);
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorKind::EmptyFile, source_name + " has a header but no rows");
  return Dataset(std::move(records));
}

Dataset load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FileNotFound, "interactions file " + path.string());
  return parse_interactions(in, path.string());
}

void save_interactions(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  const bool with_ts = std::any_of(dataset.records().begin(), dataset.records().end(),
                                   [](const auto& r) { return r.timestamp.has_value(); });
  out << "user_id,item_id,interaction,image_path,features_text" << (with_ts ? ",timestamp" : "") << '\n';
  for (const auto& r : dataset.records()) {
    out << r.user_id << ',' << r.item_id << ',' << r.interaction << ',' << csv::escape(r.image_path)
        << ',' << csv::escape(r.features_text);
    if (with_ts) {
      out << ',';
      if (r.timestamp) out << *r.timestamp;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::IoError, "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// text

StopWords parse_stop_words(std::string_view text) {
  StopWords words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

const StopWords& default_stop_words() {
  static const StopWords words = parse_stop_words(detail::kStopWordsText);
  return words;
}

std::string preprocess_text(std::string_view raw, const StopWords& stop_words) {
  std::string cleaned(raw.size(), ' ');
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    const char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    if ((lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9')) cleaned[i] = lower;
  }
  std::string out;
  std::istringstream words(cleaned);
  std::string w;
  while (words >> w) {
    if (stop_words.contains(w)) continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

Dataset preprocess_dataset(const Dataset& dataset, const StopWords& stop_words) {
  std::vector<InteractionRecord> records = dataset.records();
  std::unordered_map<std::string, std::string> memo;
  for (auto& r : records) {
    auto it = memo.find(r.features_text);
    if (it == memo.end()) it = memo.emplace(r.features_text, preprocess_text(r.features_text, stop_words)).first;
    r.features_text = it->second;
  }
  return Dataset(std::move(records));
}

// ---------------------------------------------------------------------------
// images

Tensor preprocess_image(const std::filesystem::path& path, std::size_t height, std::size_t width) {
  return image_to_tensor(read_ppm(path), height, width);
}

ImageStore::ImageStore(std::filesystem::path root, std::size_t height, std::size_t width)
    : root_(std::move(root)), height_(height), width_(width) {}

Tensor ImageStore::get(const std::string& path) const {
  std::lock_guard lock(mutex_);
  if (const auto it = cache_.find(path); it != cache_.end()) return it->second;
  const std::filesystem::path p(path);
  Tensor t = preprocess_image(p.is_absolute() ? p : root_ / p, height_, width_);
  cache_.emplace(path, t);
  return t;
}

void ImageStore::insert(const std::string& path, const RgbImage& image) {
  Tensor t = image_to_tensor(image, height_, width_);
  std::lock_guard lock(mutex_);
  cache_.insert_or_assign(path, std::move(t));
}

// ---------------------------------------------------------------------------
// sampling

namespace {
std::size_t ceil_count(double fraction, std::size_t n) {
  // Tolerates representation error such as 0.2 * 10 = 2.0000000000000004.
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}
}  // namespace

Dataset sample_fraction(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorKind::InvalidParam, "sample fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  const auto picked = rng.sample(std::move(order), ceil_count(fraction, dataset.size()));
  std::vector<InteractionRecord> records;
  records.reserve(picked.size());
  for (std::size_t i : picked) records.push_back(dataset.records()[i]);
  return Dataset(std::move(records));
}

Dataset generate_negatives(const Dataset& dataset, std::size_t ratio, std::uint64_t seed) {
  if (ratio == 0) return dataset;
  const IdIndex& index = dataset.index();
  std::vector<std::vector<std::size_t>> positives(index.user_count());  // record indices
  std::vector<std::unordered_set<std::size_t>> positive_items(index.user_count());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.records()[i];
    if (r.interaction != 1) continue;
    const std::size_t u = index.user(r.user_id);
    positives[u].push_back(i);
    positive_items[u].insert(index.item(r.item_id));
  }

  Rng rng(seed);
  std::vector<InteractionRecord> records = dataset.records();
  for (std::size_t u = 0; u < index.user_count(); ++u) {
    if (positives[u].empty()) continue;
    std::vector<std::size_t> pool;
    for (std::size_t it = 0; it < index.item_count(); ++it)
      if (!positive_items[u].contains(it)) pool.push_back(it);
    if (pool.empty()) {
      fail(ErrorKind::ExhaustedCandidates,
           "user " + std::to_string(index.raw_user(u)) + " has interacted with every item");
    }
    for (std::size_t item : rng.sample(std::move(pool), ratio * positives[u].size())) {
      const ItemInfo& info = index.item_info(item);
      records.push_back(InteractionRecord{index.raw_user(u), index.raw_item(item), 0,
                                          info.features_text, info.image_path, std::nullopt});
    }
  }
  return dataset.with_records(std::move(records));
}

// ---------------------------------------------------------------------------
// synthetic fixture

namespace {

constexpr std::string_view kFillerWords[] = {
    "harbor", "lantern", "river",  "engine", "garden", "mirror", "signal", "winter",
    "copper", "meadow",  "canyon", "violet", "thunder", "island", "quartz", "velvet",
};

std::string title_case(std::string_view w) {
  std::string s(w);
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

RgbImage topic_image(int topic, std::size_t size, Rng& rng) {
  // topic 0: red dominant, topic 1: blue dominant
  const int base[2][3] = {{200, 50, 40}, {40, 60, 200}};
  RgbImage img{size, size, std::vector<std::uint8_t>(size * size * 3)};
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = base[topic][c] + rng.uniform(-45.0, 45.0);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  return img;
}

std::vector<int> balanced_topics(std::size_t n, Rng& rng) {
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<int>(i % 2);
  rng.shuffle(t);
  return t;
}

}  // namespace

SynthData synth_generate(std::size_t n_users, std::size_t n_items, std::uint64_t seed,
                         const SynthConfig& cfg) {
  if (n_users < 2 || n_items < 2) fail(ErrorKind::InvalidParam, "synth needs at least 2 users and 2 items");
  if (cfg.impressions_per_user < 1) fail(ErrorKind::InvalidParam, "synth needs impressions_per_user >= 1");
  Rng rng(seed);
  const std::vector<int> user_topic = balanced_topics(n_users, rng);  // by raw id - 1
  const std::vector<int> item_topic = balanced_topics(n_items, rng);

  SynthData out;
  std::vector<std::string> item_text(n_items), item_path(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    std::vector<std::string> words{std::string(kTopicKeywords[item_topic[i]])};
    for (std::size_t f = 0; f < cfg.filler_words; ++f) {
      words.emplace_back(kFillerWords[rng.index(std::size(kFillerWords))]);
    }
    rng.shuffle(words);
    std::string text = "The " + title_case(words[0]);
    for (std::size_t w = 1; w < words.size(); ++w) text += (w % 2 ? ": " : ", ") + words[w];
    text += " (" + std::to_string(1980 + rng.index(40)) + ")!";
    item_text[i] = std::move(text);
    char name[48];
    std::snprintf(name, sizeof name, "images/item_%04zu.ppm", i + 1);
    item_path[i] = name;
    out.images.emplace(item_path[i], topic_image(item_topic[i], cfg.image_size, rng));
  }

  std::vector<std::size_t> all_items(n_items);
  for (std::size_t i = 0; i < n_items; ++i) all_items[i] = i;
  std::vector<InteractionRecord> records;
  double expected = 0.0;
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto seen = rng.sample(all_items, cfg.impressions_per_user);
    for (std::size_t t = 0; t < seen.size(); ++t) {
      const std::size_t i = seen[t];
      const double p = user_topic[u] == item_topic[i] ? cfg.match_rate : cfg.mismatch_rate;
      expected += p;
      records.push_back(InteractionRecord{static_cast<std::int64_t>(u + 1), static_cast<std::int64_t>(i + 1),
                                          rng.bernoulli(p) ? 1 : 0, item_text[i], item_path[i],
                                          static_cast<std::int64_t>(t)});
    }
  }
  out.expected_positive_rate = expected / static_cast<double>(records.size());
  out.dataset = Dataset(std::move(records));
  const IdIndex& index = out.dataset.index();
  for (std::size_t u = 0; u < index.user_count(); ++u)
    out.user_topic.push_back(user_topic[static_cast<std::size_t>(index.raw_user(u) - 1)]);
  for (std::size_t i = 0; i < index.item_count(); ++i)
    out.item_topic.push_back(item_topic[static_cast<std::size_t>(index.raw_item(i) - 1)]);
  return out;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + (dir / "images").string() + ": " + ec.message());
  save_interactions(data.dataset, dir / kInteractionsFile);
  for (const auto& [path, img] : data.images) write_ppm(img, dir / path);
}

void register_images(const SynthData& data, ImageStore& store) {
  for (const auto& [path, img] : data.images) store.insert(path, img);
}

}  // namespace hncf
