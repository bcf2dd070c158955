// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace svr::ad {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts unsupported");

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& m) : std::runtime_error("checkpoint: " + m) {}
};

// Flat parameter blob. Layout (all little-endian):
//   u32 magic   'SVCP' (0x50435653)
//   u32 version  1
//   u32 precision  bytes per value: 4 (float) or 8 (double)
//   u32 reserved   0
//   u64 count      total number of values
//   then `count` raw values, parameters concatenated in declaration order.
inline constexpr uint32_t kCheckpointMagic = 0x50435653u;
inline constexpr uint32_t kCheckpointVersion = 1u;

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<Tensor<T>>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open for write: " + path);
    uint64_t count = 0;
    for (const auto& p : params) count += uint64_t(p.numel());
    const uint32_t header[4] = {kCheckpointMagic, kCheckpointVersion, uint32_t(sizeof(T)), 0u};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.data.data()),
                  std::streamsize(p.data.size() * sizeof(T)));
    if (!out) throw CheckpointError("write failed: " + path);
}

// Loads into an existing parameter set; shapes come from the field config,
// the file only carries values.
template <typename T>
void load_checkpoint(const std::string& path, std::vector<Tensor<T>>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open: " + path);
    uint32_t header[4] = {};
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in) throw CheckpointError("truncated header: " + path);
    if (header[0] != kCheckpointMagic) throw CheckpointError("bad magic: " + path);
    if (header[1] != kCheckpointVersion)
        throw CheckpointError("unsupported version " + std::to_string(header[1]));
    if (header[2] != sizeof(T))
        throw CheckpointError("precision mismatch: file has " + std::to_string(header[2]) +
                              "-byte values, expected " + std::to_string(sizeof(T)));
    uint64_t expected = 0;
    for (const auto& p : params) expected += uint64_t(p.numel());
    if (count != expected)
        throw CheckpointError("value count " + std::to_string(count) + ", expected " +
                              std::to_string(expected));
    for (auto& p : params) {
        in.read(reinterpret_cast<char*>(p.data.data()), std::streamsize(p.data.size() * sizeof(T)));
        if (!in) throw CheckpointError("truncated data: " + path);
    }
}

} // namespace svr::ad
