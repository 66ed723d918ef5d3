#include "sancdifi/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sancdifi/error.hpp"

namespace sancdifi {

void ByteWriter::magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

void ByteWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

void ByteWriter::u32(std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out_.write(b, 4);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteReader::read_bytes(char* dst, std::size_t n) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    fail(ErrorKind::Truncated, "unexpected end of input");
  }
}

void ByteReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  read_bytes(got.data(), got.size());
  if (got != tag) {
    fail(ErrorKind::BadMagic, "expected magic '" + std::string(tag) + "'");
  }
}

std::uint8_t ByteReader::u8() {
  char c;
  read_bytes(&c, 1);
  return static_cast<std::uint8_t>(c);
}

std::uint32_t ByteReader::u32() {
  unsigned char b[4];
  read_bytes(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

void write_tensor(std::ostream& out, const ImageTensor& x) {
  ByteWriter w(out);
  w.magic("SNCD");
  w.u8(kTensorFormatVersion);
  w.u32(static_cast<std::uint32_t>(x.height()));
  w.u32(static_cast<std::uint32_t>(x.width()));
  w.u32(static_cast<std::uint32_t>(x.channels()));
  w.u8(static_cast<std::uint8_t>(x.domain()));
  for (double v : x.values()) w.f32(static_cast<float>(v));
}

ImageTensor read_tensor(std::istream& in) {
  ByteReader r(in);
  r.expect_magic("SNCD");
  const auto version = r.u8();
  require(version == kTensorFormatVersion, ErrorKind::BadVersion,
          "unsupported tensor version " + std::to_string(version));
  const auto h = r.u32();
  const auto w = r.u32();
  const auto c = r.u32();
  const auto tag = r.u8();
  require(h > 0 && w > 0 && c > 0 && h <= 65536 && w <= 65536 && c <= 64,
          ErrorKind::BadMagic, "implausible tensor dims in header");
  require(tag <= 1, ErrorKind::BadMagic, "unknown domain tag " + std::to_string(tag));
  std::vector<double> data(static_cast<std::size_t>(h) * w * c);
  for (auto& v : data) v = r.f32();
  return ImageTensor(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                     std::move(data), static_cast<Domain>(tag));
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return in;
}

void write_tensor_file(const std::filesystem::path& path, const ImageTensor& x) {
  auto out = open_output(path);
  write_tensor(out, x);
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

ImageTensor read_tensor_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_tensor(in);
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_pnm(const std::filesystem::path& path, const ImageTensor& x) {
  const ImageTensor unit = x.domain() == Domain::Signed ? convert_domain(x, Domain::Unit) : x;
  require(unit.channels() == 1 || unit.channels() == 3, ErrorKind::InvalidArgument,
          "PNM export needs 1 or 3 channels");
  auto out = open_output(path);
  out << (unit.channels() == 1 ? "P5" : "P6") << '\n'
      << unit.width() << ' ' << unit.height() << "\n255\n";
  for (double v : unit.values()) out.put(static_cast<char>(to_byte(v)));
}

void write_heatmap_pgm(const std::filesystem::path& path, int height, int width,
                       const std::vector<double>& values) {
  require(values.size() == static_cast<std::size_t>(height) * width,
          ErrorKind::DimensionMismatch, "heat map size mismatch");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  auto out = open_output(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (double v : values) {
    out.put(static_cast<char>(to_byte(span > 0.0 ? (v - *lo) / span : 0.0)));
  }
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  auto out = open_output(path);
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  for (auto v : mask.values()) out.put(static_cast<char>(v ? 255 : 0));
}

}  // namespace sancdifi
