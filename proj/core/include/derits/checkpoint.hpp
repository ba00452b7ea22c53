#pragma once

#include <cstdint>
#include <filesystem>

#include "derits/model.hpp"

// Binary checkpoint container, all integers and floats little-endian:
//
//   magic      8 bytes  "DRTSCKPT"
//   version    u32
//   config     u64 byte count + UTF-8 JSON object echoing ModelConfig
//   tensors    u64 count, then per tensor:
//                u64 name length + name bytes
//                u64 rank + rank x u64 dims
//                prod(dims) x f64, row-major
//   end        4 bytes "DEND"
//
// Complex tensors appear as two real tensors with `.re` / `.im` suffixes.

namespace derits::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

/// Throws kIo when the file cannot be opened, kFormat on any structural problem
/// (bad magic, truncation, unknown or missing tensors, shape disagreement).
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace derits::model
