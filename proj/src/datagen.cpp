#include "sancdifi/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "sancdifi/error.hpp"
#include "sancdifi/io.hpp"

namespace sancdifi {

namespace {


// Glyph membership in a 16-pixel reference frame; (u, v) is the offset of a
// pixel centre from the glyph centre. Families differ in coarse geometry so
// that they stay recognisable after moderate diffusion.
bool inside_glyph(int glyph, double u, double v) {
  const double au = std::abs(u);
  const double av = std::abs(v);
  const double r = std::hypot(u, v);
  switch (glyph) {
    case 0:  // disk
      return r <= 6.0;
    case 1:  // horizontal bar
      return av <= 2.1 && au <= 6.1;
    case 2:  // vertical bar
      return au <= 2.1 && av <= 6.1;
    case 3:  // blob pair on the main diagonal
      return std::hypot(u + 3.0, v + 3.0) <= 2.8 || std::hypot(u - 3.0, v - 3.0) <= 2.8;
    case 4:  // blob pair on the anti-diagonal
      return std::hypot(u - 3.0, v + 3.0) <= 2.8 || std::hypot(u + 3.0, v - 3.0) <= 2.8;
    case 5:  // ring
      return r >= 2.5 && r <= 6.0;
    case 6:  // small square
      return au <= 3.6 && av <= 3.6;
    case 7:  // plus
      return (au <= 1.6 && av <= 6.1) || (av <= 1.6 && au <= 6.1);
    default:
      return false;
  }
}

}  // namespace

void LabeledDataset::validate() const {
  require(images.size() == labels.size(), ErrorKind::DimensionMismatch,
          "dataset has " + std::to_string(images.size()) + " images but " +
              std::to_string(labels.size()) + " labels");
  require(num_classes >= 1, ErrorKind::InvalidArgument, "dataset class count must be >= 1");
  for (std::size_t i = 0; i < images.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, ErrorKind::ClassOutOfRange,
            "label out of range at index " + std::to_string(i));
    require(images[i].same_shape(images.front()), ErrorKind::DimensionMismatch,
            "dataset images must share dims");
  }
}

ImageTensor render_glyph(int image_size, int channels, int glyph, int dy, int dx,
                         double background, double foreground, double glyph_scale) {
  require(glyph >= 0 && glyph < kGlyphFamilies, ErrorKind::InvalidArgument,
          "unknown glyph family " + std::to_string(glyph));
  ImageTensor img(image_size, image_size, channels, Domain::Unit);
  require(glyph_scale > 0.0, ErrorKind::InvalidArgument, "glyph_scale must be positive");
  const double scale = 16.0 / (image_size * glyph_scale);
  const double centre = image_size / 2.0;
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      const double u = (x + 0.5 - centre - dx) * scale;
      const double v = (y + 0.5 - centre - dy) * scale;
      const double value = inside_glyph(glyph, u, v) ? foreground : background;
      for (int c = 0; c < channels; ++c) img.at(y, x, c) = value;
    }
  }
  return img;
}

LabeledDataset generate_shape_dataset(const ShapeDatasetSpec& spec) {
  require(spec.image_size >= 8, ErrorKind::InvalidArgument, "image_size must be >= 8");
  require(spec.num_classes >= 2 && spec.num_classes <= kGlyphFamilies,
          ErrorKind::InvalidArgument,
          "num_classes must be in [2, " + std::to_string(kGlyphFamilies) + "]");
  require(spec.per_class_count >= 0, ErrorKind::InvalidArgument, "per_class_count < 0");
  require(spec.channels == 1 || spec.channels == 3, ErrorKind::InvalidArgument,
          "channels must be 1 or 3");
  require(spec.noise_std >= 0.0, ErrorKind::InvalidArgument, "noise_std < 0");
  require(spec.background >= 0.0 && spec.background <= 1.0 && spec.foreground >= 0.0 &&
              spec.foreground <= 1.0,
          ErrorKind::InvalidArgument, "background and foreground must lie in [0, 1]");
  require(spec.glyph_scale > 0.0, ErrorKind::InvalidArgument, "glyph_scale must be positive");

  LabeledDataset out;
  out.num_classes = spec.num_classes;
  out.split = spec.split;
  const std::size_t n = static_cast<std::size_t>(spec.num_classes) * spec.per_class_count;
  out.images.reserve(n);
  out.labels.reserve(n);

  const int jitter = std::max(1, spec.image_size / 8);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % spec.num_classes);
    SeededRng rng(derive_seed(spec.seed, Stream::DataGen, i));
    const int dy = static_cast<int>(rng.below(2 * jitter + 1)) - jitter;
    const int dx = static_cast<int>(rng.below(2 * jitter + 1)) - jitter;
    ImageTensor img = render_glyph(spec.image_size, spec.channels, label, dy, dx,
                                   spec.background, spec.foreground, spec.glyph_scale);
    // Colour images get a mild per-image tint so channels are not identical.
    double tint[3] = {1.0, 1.0, 1.0};
    if (spec.channels == 3) {
      for (double& t : tint) t = 0.8 + 0.2 * rng.uniform();
    }
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        for (int c = 0; c < img.channels(); ++c) {
          const double v = img.at(y, x, c) * tint[c] + spec.noise_std * rng.normal();
          img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  data.validate();
  auto out = open_output(path);
  ByteWriter w(out);
  w.magic("SNDS");
  w.u8(kDatasetFormatVersion);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.u32(static_cast<std::uint32_t>(data.num_classes));
  w.u8(static_cast<std::uint8_t>(data.split));
  for (std::size_t i = 0; i < data.size(); ++i) {
    write_tensor(out, data.images[i]);
    w.u32(static_cast<std::uint32_t>(data.labels[i]));
  }
  require(out.good(), ErrorKind::Io, "write failed: " + path.string());
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  ByteReader r(in);
  r.expect_magic("SNDS");
  const auto version = r.u8();
  require(version == kDatasetFormatVersion, ErrorKind::BadVersion,
          "unsupported dataset version " + std::to_string(version));
  LabeledDataset data;
  const auto count = r.u32();
  data.num_classes = static_cast<int>(r.u32());
  const auto split = r.u8();
  require(split <= 1, ErrorKind::BadMagic, "unknown split tag");
  data.split = static_cast<Split>(split);
  for (std::uint32_t i = 0; i < count; ++i) {
    data.images.push_back(read_tensor(in));
    data.labels.push_back(static_cast<int>(r.u32()));
  }
  data.validate();
  return data;
}

std::vector<std::size_t> indices_without_label(const LabeledDataset& data, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] != label) out.push_back(i);
  }
  return out;
}

}  // namespace sancdifi
