#pragma once

#include "mmehr/model.hpp"

#include <filesystem>

namespace mmehr {

// Checkpoint file:
//   u64 LE header length | JSON header | blob of little-endian f64 values
// The header carries the model kind, ModelConfig, seed, step count, free-form
// metadata and a manifest [{name, offset (bytes into blob), shape}].
struct Checkpoint {
  Model model;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmehr
