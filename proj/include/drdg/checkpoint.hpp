#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "drdg/tensor.hpp"

namespace drdg {

// Single-file archive: magic, JSON header (kind, step, seed, resolved config,
// tensor index, free-form extra), then a flat float64 payload.
struct CheckpointData {
    std::string kind;  // "translation" | "segmentation"
    int64_t step = 0;
    uint64_t seed = 0;
    nlohmann::json config;
    nlohmann::json extra;
    std::map<std::string, Tensor> tensors;
};

inline constexpr int kCheckpointSchemaVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);

// Throws DataError on corruption or unsupported schema; never returns partial state.
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace drdg
