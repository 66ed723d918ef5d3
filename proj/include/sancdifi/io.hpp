#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sancdifi/tensor.hpp"

namespace sancdifi {

/// Little-endian primitive writer used by every binary format.
class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void f32(float v);

 private:
  std::ostream& out_;
};

/// Mirror of ByteWriter. Short reads raise ErrorKind::Truncated.
class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  float f32();

 private:
  void read_bytes(char* dst, std::size_t n);
  std::istream& in_;
};

inline constexpr std::uint8_t kTensorFormatVersion = 1;

// SNCD record: magic, version u8, u32 H, u32 W, u32 C, domain u8, H*W*C f32.
void write_tensor(std::ostream& out, const ImageTensor& x);
ImageTensor read_tensor(std::istream& in);
void write_tensor_file(const std::filesystem::path& path, const ImageTensor& x);
ImageTensor read_tensor_file(const std::filesystem::path& path);

/// Binary PGM (C == 1) or PPM (C == 3), maxval 255. Signed tensors are mapped
/// to unit range first.
void write_pnm(const std::filesystem::path& path, const ImageTensor& x);
/// Linear rescale of a real-valued H x W grid to a 0..255 PGM.
void write_heatmap_pgm(const std::filesystem::path& path, int height, int width,
                       const std::vector<double>& values);
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);

/// Opens for binary output, creating parent directories. Raises ErrorKind::Io.
std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

}  // namespace sancdifi
