#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asvp/tensor.hpp"

namespace asvp {

// Binary layout, all little-endian:
//   8 bytes   magic "ASVPTNSR"
//   u16       format version (kTensorFileVersion)
//   u16       rank (1..4)
//   u32[rank] dims
//   f32[...]  payload, row-major
inline constexpr char kTensorMagic[8] = {'A', 'S', 'V', 'P', 'T', 'N', 'S', 'R'};
inline constexpr std::uint16_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// Throws FormatError on bad magic, version, rank, or size mismatch.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

/// Round every entry to the nearest float, i.e. what a save/load round trip yields.
void quantize_to_f32(std::span<double> values) noexcept;

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace asvp
