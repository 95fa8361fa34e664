#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "haug/tensor.hpp"

namespace haug {

uint32_t crc32(const uint8_t* data, size_t len);
uint64_t fnv1a64(const std::string& s);

inline constexpr uint32_t kCheckpointVersion = 1;

// layout, all little-endian:
//   "HAUG" | version u32 | config digest u64 | tensor count u32
//   per tensor: name_len u32, name bytes, rank u32, extents u32[rank], f32 data
//   trailing crc32 u32 over everything before it
struct CheckpointData {
    uint32_t version = kCheckpointVersion;
    uint64_t digest = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor* find(const std::string& name);
};

void write_checkpoint(const std::string& path, uint64_t digest,
                      const std::vector<std::pair<std::string, Tensor>>& tensors);
CheckpointData read_checkpoint(const std::string& path);

// single-tensor wire helpers (same encoding as the checkpoint entries)
void append_tensor(std::vector<uint8_t>& out, const std::string& name, const Tensor& t);

}  // namespace haug
