#include "hncf/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "hncf/config_json.hpp"
#include "hncf/error.hpp"

namespace hncf {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'H', 'N', 'C', 'F'};

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::string& in, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  fail(ErrorKind::CorruptDirectory, path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const HncfModel& model, const std::filesystem::path& path,
                     const std::vector<std::int64_t>& users, const std::vector<std::int64_t>& items,
                     const json& training) {
  const ParameterList params = model.parameters();
  json directory = json::array();
  std::string payload;
  for (const auto& p : params) {
    directory.push_back({{"name", p.name},
                         {"shape", p.tensor.shape()},
                         {"offset", payload.size()},
                         {"count", p.tensor.size()}});
    for (double v : p.tensor.values()) put_le(payload, std::bit_cast<std::uint64_t>(v));
  }
  json header = {
      {"config", model_config_to_json(model.config(), true)},
      {"vocabulary", model.config().uses_text() ? model.config().text.vocab->tokens() : std::vector<std::string>{}},
      {"users", users},
      {"items", items},
      {"training", training},
      {"tensors", directory},
  };
  const std::string header_text = header.dump();

  std::string bytes(kMagic, sizeof kMagic);
  put_le(bytes, kCheckpointVersion);
  put_le(bytes, static_cast<std::uint64_t>(header_text.size()));
  bytes += header_text;
  bytes += payload;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  if (bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    fail(ErrorKind::BadMagic, path.string() + " is not an HNCF checkpoint");
  }
  constexpr std::size_t kPrefix = sizeof kMagic + 4 + 8;
  if (bytes.size() < kPrefix) corrupt(path, "truncated header");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    fail(ErrorKind::UnsupportedVersion, path.string() + ": version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - kPrefix) corrupt(path, "header runs past end of file");

  json header;
  try {
    header = json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + header_len));
  } catch (const json::exception& e) {
    corrupt(path, std::string("unreadable header: ") + e.what());
  }
  const std::size_t payload_start = kPrefix + header_len;
  const std::size_t payload_size = bytes.size() - payload_start;

  Checkpoint ck{HncfModel(HncfConfig{}), {}, {}, json::object()};
  std::map<std::string, Tensor> tensors;
  try {
    HncfConfig cfg = model_config_from_json(header.at("config"), true);
    if (cfg.uses_text()) {
      cfg.text.vocab = std::make_shared<Vocabulary>(header.at("vocabulary").get<std::vector<std::string>>());
    }
    ck.users = header.at("users").get<std::vector<std::int64_t>>();
    ck.items = header.at("items").get<std::vector<std::int64_t>>();
    ck.training = header.at("training");

    // Directory entries sorted by offset must tile disjoint, in-bounds ranges.
    struct Entry {
      std::string name;
      Shape shape;
      std::size_t offset, count;
    };
    std::vector<Entry> entries;
    for (const auto& e : header.at("tensors")) {
      entries.push_back({e.at("name").get<std::string>(), e.at("shape").get<Shape>(),
                         e.at("offset").get<std::size_t>(), e.at("count").get<std::size_t>()});
    }
    std::vector<const Entry*> by_offset;
    for (const auto& e : entries) by_offset.push_back(&e);
    std::sort(by_offset.begin(), by_offset.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
    std::size_t end = 0;
    for (const Entry* e : by_offset) {
      if (e->count != shape_size(e->shape)) corrupt(path, e->name + ": count disagrees with shape");
      if (e->offset < end) corrupt(path, e->name + ": overlapping tensor data");
      if (e->count > (payload_size - std::min(payload_size, e->offset)) / 8 || e->offset > payload_size) {
        corrupt(path, e->name + ": tensor data out of bounds");
      }
      end = e->offset + 8 * e->count;
    }
    if (end != payload_size) corrupt(path, "payload has bytes no tensor accounts for");
    for (const auto& e : entries) {
      std::vector<double> values(e.count);
      for (std::size_t i = 0; i < e.count; ++i) {
        values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, payload_start + e.offset + 8 * i));
      }
      if (!tensors.emplace(e.name, Tensor(e.shape, std::move(values))).second) {
        corrupt(path, "duplicate tensor " + e.name);
      }
    }
    cfg.validate();
    ck.model = HncfModel(cfg);
  } catch (const json::exception& e) {
    corrupt(path, std::string("malformed header: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CorruptDirectory) throw;
    corrupt(path, e.what());
  }

  const ParameterList params = ck.model.parameters();
  if (params.size() != tensors.size()) {
    corrupt(path, "expected " + std::to_string(params.size()) + " tensors, found " + std::to_string(tensors.size()));
  }
  for (const auto& p : params) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) corrupt(path, "missing tensor " + p.name);
    if (it->second.shape() != p.tensor.shape()) {
      corrupt(path, p.name + ": shape " + shape_to_string(it->second.shape()) + ", model expects " +
                        shape_to_string(p.tensor.shape()));
    }
    Tensor dst = p.tensor;
    std::copy(it->second.values().begin(), it->second.values().end(), dst.mutable_values().begin());
  }
  return ck;
}

}  // namespace hncf
