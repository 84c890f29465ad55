#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "psae/tensor.hpp"

namespace psae {

// On-disk training snapshot. Tensors are stored as named f32 blobs in list
// order (model parameters first, then optimizer moments, by convention of the
// writer). The trailing CRC32 covers every preceding byte, so truncation and
// bit rot surface as checksum errors.
//
// Layout, little-endian:
//   "PSAE"  u32 version  u64 config_hash  u64 seed  u64 sample_counter
//   u32 epoch  i64 adam_t  u32 config_len  config bytes (TOML snapshot)
//   u32 tensor_count  then per tensor: u16 name_len, name, u8 dtype(0=f32),
//   u8 ndim, i64 dims...; then all payloads in order; u32 crc32
struct Checkpoint {
    uint32_t version = 1;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    uint64_t sample_counter = 0;  // samples drawn so far, resumes the stream
    uint32_t epoch = 0;           // completed epochs
    int64_t adam_t = 0;
    std::string config_toml;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace psae
