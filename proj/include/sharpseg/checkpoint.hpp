#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "sharpseg/params.hpp"

namespace sharpseg {

/// On-disk precision. F32 narrows values (storage only); F64 is bit-exact.
enum class StorageDtype { F64, F32 };

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  nlohmann::json metadata;
};

inline constexpr int kCheckpointVersion = 1;

/// Writes `dir/manifest.json` (names, shapes, dtype, byte offsets, caller
/// metadata) and `dir/payload.bin` (concatenated little-endian values).
void save_checkpoint(const std::filesystem::path& dir, std::span<const NamedTensor> tensors,
                     const nlohmann::json& metadata = nlohmann::json::object(),
                     StorageDtype dtype = StorageDtype::F64);

/// CorruptHeader, VersionMismatch, TruncatedPayload or Io on bad input.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace sharpseg
