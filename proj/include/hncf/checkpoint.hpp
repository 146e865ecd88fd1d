#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "hncf/model.hpp"

namespace hncf {

/// Single-file model checkpoint:
///
///   "HNCF" | u32 version | u64 header length | JSON header | payload
///
/// Integers are little-endian. The header holds the model config (with table
/// sizes), the text vocabulary, the raw user/item ids behind the dense
/// indices, free-form training metadata and a tensor directory
/// {name, shape, offset, count}; offsets are bytes from the payload start and
/// values are little-endian IEEE-754 doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  HncfModel model;
  std::vector<std::int64_t> users;  // raw id of each dense user
  std::vector<std::int64_t> items;
  nlohmann::json training = nlohmann::json::object();
};

void save_checkpoint(const HncfModel& model, const std::filesystem::path& path,
                     const std::vector<std::int64_t>& users = {}, const std::vector<std::int64_t>& items = {},
                     const nlohmann::json& training = nlohmann::json::object());

// Throws IoError, BadMagic, UnsupportedVersion, CorruptDirectory.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hncf
