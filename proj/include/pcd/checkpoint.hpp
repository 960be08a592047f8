#pragma once

#include <filesystem>

#include "pcd/network.hpp"

namespace pcd {

// Checkpoint file layout:
//   magic "PCDN" | format version u32 LE | manifest length u64 LE |
//   manifest text | blob of little-endian float64 parameter values
// The manifest carries the architecture config, the normalization transform,
// and the named tensor table with shapes and byte offsets into the blob.
// Loading validates every tensor shape against the config.
constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params);

// Atomic variant: writes to a temporary file in the same directory, then renames.
void save_checkpoint_atomic(const std::filesystem::path& path, const ModelParameters& params);

ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace pcd
