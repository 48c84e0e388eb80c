#include "asvp/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "asvp/error.hpp"

namespace asvp {
namespace {

constexpr std::size_t kHeaderFixed = 8 + 2 + 2;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[offset + i]) << (8 * i));
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() < 1 || t.rank() > 4) throw ShapeError("tensor file supports rank 1..4");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderFixed + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  put_le<std::uint16_t>(out, kTensorFileVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > 0xFFFFFFFFULL) throw ShapeError("tensor extent exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) put_le<float>(out, static_cast<float>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderFixed) {
    throw FormatError("tensor file truncated: expected at least " + std::to_string(kHeaderFixed) +
                      " header bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kTensorMagic, 8) != 0) throw FormatError("tensor file: bad magic");
  const auto version = get_le<std::uint16_t>(bytes, 8);
  if (version != kTensorFileVersion) {
    throw FormatError("tensor file: unsupported version " + std::to_string(version));
  }
  const auto rank = get_le<std::uint16_t>(bytes, 10);
  if (rank < 1 || rank > 4) throw FormatError("tensor file: invalid rank " + std::to_string(rank));
  const std::size_t header = kHeaderFixed + 4u * rank;
  if (bytes.size() < header) {
    throw FormatError("tensor file truncated: expected " + std::to_string(header) + " header bytes, got " +
                      std::to_string(bytes.size()));
  }
  Shape dims(rank);
  for (std::size_t i = 0; i < rank; ++i) dims[i] = get_le<std::uint32_t>(bytes, kHeaderFixed + 4 * i);
  const std::size_t count = shape_size(dims);
  const std::size_t expected = header + 4 * count;
  if (bytes.size() != expected) {
    throw FormatError("tensor file size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, header + 4 * i)));
  }
  return Tensor(std::move(dims), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_tensor(t)); }

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

void quantize_to_f32(std::span<double> values) noexcept {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace asvp
