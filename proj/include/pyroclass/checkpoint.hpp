#pragma once

#include <filesystem>
#include <string>

#include "pyroclass/model.hpp"

namespace pyroclass {

/// Checkpoint layout:
///   8 bytes   magic "PYROCKPT"
///   4 bytes   format version, little-endian uint32
///   8 bytes   header length, little-endian uint64
///   header    JSON (config, tensor shapes, step, seed, param_count)
///   payload   little-endian float32 per tensor, declaration order
inline constexpr char kCheckpointMagic[8] = {'P', 'Y', 'R', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Model& model);
/// Throws CheckpointError on a bad magic, version mismatch, truncation or a
/// header whose shapes disagree with the configured architecture.
Model deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

/// Header JSON of a checkpoint without reading the payload.
std::string checkpoint_header(std::string_view bytes);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& json);

}  // namespace pyroclass
