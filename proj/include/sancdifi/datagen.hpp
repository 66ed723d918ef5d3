#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sancdifi/tensor.hpp"

namespace sancdifi {

enum class Split : std::uint8_t { Train = 0, Validation = 1 };

struct LabeledDataset {
  std::vector<ImageTensor> images;  // unit domain, uniform dims
  std::vector<int> labels;
  int num_classes = 0;
  Split split = Split::Train;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  /// Throws if labels/images disagree in length, labels fall outside [0, K),
  /// or image dims are not uniform.
  void validate() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Number of distinct glyph families available to generate_shape_dataset.
inline constexpr int kGlyphFamilies = 8;

struct ShapeDatasetSpec {
  int image_size = 16;
  int num_classes = 4;
  int per_class_count = 100;
  int channels = 1;
  double noise_std = 0.05;
  double background = 0.1;  // intensity outside the glyph
  double foreground = 0.9;  // intensity inside the glyph
  double glyph_scale = 1.0;  // glyph size relative to the reference frame
  std::uint64_t seed = 0;
  Split split = Split::Train;
};

/// Class k renders glyph family k (disk, horizontal bar, vertical bar,
/// diagonal blob pair, anti-diagonal blob pair, ring, small square, plus) at
/// a jittered position (foreground on background intensity), adds Gaussian
/// pixel noise and clamps to [0, 1]. Images are interleaved by class (label
/// of image i is i mod K). Pixel values are rounded to f32 precision so files
/// round-trip exactly.
LabeledDataset generate_shape_dataset(const ShapeDatasetSpec& spec);

/// Noise-free glyph of class k centred at (cy, cx) offsets from the image
/// centre; exposed for tests and the centroid oracle.
ImageTensor render_glyph(int image_size, int channels, int glyph, int dy, int dx,
                         double background = 0.1, double foreground = 0.9,
                         double glyph_scale = 1.0);

inline constexpr std::uint8_t kDatasetFormatVersion = 1;

// SNDS: magic, version u8, u32 count, u32 K, split u8, then per image an SNCD
// record followed by its u32 label.
void write_dataset(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset read_dataset(const std::filesystem::path& path);

/// Every index i with data.labels[i] != label.
std::vector<std::size_t> indices_without_label(const LabeledDataset& data, int label);

}  // namespace sancdifi
