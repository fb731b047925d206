#pragma once

#include "feddct/nn/autograd.hpp"
#include "feddct/nn/bytes.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace feddct::nn {

/// Parameter checkpoint format (all integers little-endian):
///
///   header:  8 bytes "FDCTCKPT" | u32 version (=1) | u32 record count
///   record:  u64 record length (bytes after this field)
///            u32 id length | id bytes (UTF-8)
///            u32 rank | rank x u64 dims
///            u64 element count | element count x f64 (IEEE-754 binary64)
///
/// Records appear in parameter order; values round-trip bit-exactly.
struct CheckpointRecord {
    std::string id;
    Tensor value;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter *const> params);
std::vector<CheckpointRecord> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path &path, std::span<const Parameter *const> params);
std::vector<CheckpointRecord> load_checkpoint(const std::filesystem::path &path);

// Copies record values into matching parameters by id. Every parameter must be
// present with an identical shape.
void restore_parameters(std::span<Parameter *const> params, const std::vector<CheckpointRecord> &records);

} // namespace feddct::nn
