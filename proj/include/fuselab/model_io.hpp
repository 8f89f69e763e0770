#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fuselab/fusion_model.hpp"

namespace fuselab {

/// Model file layout, little-endian:
///   "FMDL" | u32 version=1 | u8 kind | u32 tensor_count |
///   per tensor: u16 name_len | name | u32 rows | u32 cols | rows·cols × f32
/// Tensors appear in FusionModel::for_each_parameter order.
inline constexpr char kModelMagic[4] = {'F', 'M', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::uint8_t> encode_model(const FusionModel<float>& model);

/// Rejects bad magic, unknown versions, truncation, trailing bytes, and any
/// tensor set or shape inconsistent with the declared kind.
FusionModel<float> decode_model(std::span<const std::uint8_t> bytes);

void save_model(const FusionModel<float>& model, const std::filesystem::path& path);
FusionModel<float> load_model(const std::filesystem::path& path);

}  // namespace fuselab
