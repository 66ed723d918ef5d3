#include <fstream>

#include "doctest.h"
#include "sancdifi/datagen.hpp"
#include "sancdifi/error.hpp"
#include "test_util.hpp"

using namespace sancdifi;

namespace {

ShapeDatasetSpec small_spec(std::uint64_t seed) {
  ShapeDatasetSpec spec;
  spec.per_class_count = 100;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("balanced interleaved labels and unit range") {
  const LabeledDataset d = generate_shape_dataset(small_spec(1));
  REQUIRE(d.size() == 400);
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.labels[i] == static_cast<int>(i % 4));
    ++counts[d.labels[i]];
    for (double v : d.images[i].values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(d.images[i].height() == 16);
    CHECK(d.images[i].domain() == Domain::Unit);
  }
  CHECK(counts == std::vector<int>{100, 100, 100, 100});
}

TEST_CASE("generation is deterministic per seed") {
  ShapeDatasetSpec spec = small_spec(5);
  spec.noise_std = 0.0;
  CHECK(generate_shape_dataset(spec) == generate_shape_dataset(spec));
  spec.noise_std = 0.05;
  const LabeledDataset a = generate_shape_dataset(spec);
  CHECK(a == generate_shape_dataset(spec));
  spec.seed = 6;
  CHECK(a != generate_shape_dataset(spec));
}

TEST_CASE("noise-free images only take the two glyph intensities") {
  ShapeDatasetSpec spec = small_spec(2);
  spec.noise_std = 0.0;
  const LabeledDataset d = generate_shape_dataset(spec);
  for (const auto& img : d.images) {
    for (double v : img.values()) {
      const bool bg = v == static_cast<float>(spec.background);
      const bool fg = v == static_cast<float>(spec.foreground);
      CHECK((bg || fg));
    }
  }
}

TEST_CASE("every glyph family renders a distinct image") {
  std::vector<ImageTensor> glyphs;
  for (int g = 0; g < kGlyphFamilies; ++g) glyphs.push_back(render_glyph(16, 1, g, 0, 0));
  for (int a = 0; a < kGlyphFamilies; ++a) {
    for (int b = a + 1; b < kGlyphFamilies; ++b) CHECK(glyphs[a] != glyphs[b]);
  }
  CHECK_THROWS_AS(render_glyph(16, 1, kGlyphFamilies, 0, 0), Error);
}

TEST_CASE("nearest-centroid oracle separates the classes") {
  ShapeDatasetSpec spec = small_spec(10);
  spec.noise_std = 0.05;
  const LabeledDataset train = generate_shape_dataset(spec);
  spec.seed = 11;
  spec.split = Split::Validation;
  const LabeledDataset held_out = generate_shape_dataset(spec);

  const std::size_t n_pix = train.images[0].size();
  std::vector<std::vector<double>> centroid(4, std::vector<double>(n_pix, 0.0));
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t p = 0; p < n_pix; ++p) centroid[train.labels[i]][p] += train.images[i][p];
  }
  for (auto& c : centroid) {
    for (auto& v : c) v /= spec.per_class_count;
  }
  int correct = 0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    int best = -1;
    double best_d = 1e300;
    for (int k = 0; k < 4; ++k) {
      double d = 0.0;
      for (std::size_t p = 0; p < n_pix; ++p) {
        const double e = held_out.images[i][p] - centroid[k][p];
        d += e * e;
      }
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    correct += best == held_out.labels[i];
  }
  CHECK(static_cast<double>(correct) / held_out.size() >= 0.95);
}

TEST_CASE("colour datasets have three channels") {
  ShapeDatasetSpec spec = small_spec(3);
  spec.channels = 3;
  spec.per_class_count = 2;
  const LabeledDataset d = generate_shape_dataset(spec);
  CHECK(d.images[0].channels() == 3);
  d.validate();
}

TEST_CASE("invalid specs are rejected") {
  ShapeDatasetSpec spec;
  spec.image_size = 7;
  CHECK_THROWS_AS(generate_shape_dataset(spec), Error);
  spec = {};
  spec.num_classes = 1;
  CHECK_THROWS_AS(generate_shape_dataset(spec), Error);
  spec = {};
  spec.num_classes = kGlyphFamilies + 1;
  CHECK_THROWS_AS(generate_shape_dataset(spec), Error);
  spec = {};
  spec.noise_std = -0.1;
  CHECK_THROWS_AS(generate_shape_dataset(spec), Error);
}

TEST_CASE("dataset file round trips") {
  testutil::TempDir dir;
  ShapeDatasetSpec spec = small_spec(4);
  spec.per_class_count = 5;
  spec.split = Split::Validation;
  const LabeledDataset d = generate_shape_dataset(spec);
  write_dataset(dir.path / "d.snds", d);
  CHECK(read_dataset(dir.path / "d.snds") == d);

  LabeledDataset empty;
  empty.num_classes = 4;
  write_dataset(dir.path / "e.snds", empty);
  CHECK(read_dataset(dir.path / "e.snds") == empty);
}

TEST_CASE("dataset reader distinguishes magic, version and truncation") {
  testutil::TempDir dir;
  ShapeDatasetSpec spec = small_spec(4);
  spec.per_class_count = 2;
  write_dataset(dir.path / "d.snds", generate_shape_dataset(spec));
  std::ifstream in(dir.path / "d.snds", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});

  auto kind_of = [&](const std::string& data) {
    {
      std::ofstream out(dir.path / "bad.snds", std::ios::binary | std::ios::trunc);
      out << data;
    }
    try {
      read_dataset(dir.path / "bad.snds");
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  std::string magic = bytes;
  magic[1] = '?';
  CHECK(kind_of(magic) == ErrorKind::BadMagic);
  std::string version = bytes;
  version[4] = 42;
  CHECK(kind_of(version) == ErrorKind::BadVersion);
  CHECK(kind_of(bytes.substr(0, bytes.size() - 3)) == ErrorKind::Truncated);
}

TEST_CASE("validate catches inconsistent datasets") {
  LabeledDataset d;
  d.num_classes = 2;
  d.images = {ImageTensor(4, 4, 1), ImageTensor(4, 4, 1)};
  d.labels = {0};
  CHECK_THROWS_AS(d.validate(), Error);
  d.labels = {0, 2};
  CHECK_THROWS_AS(d.validate(), Error);
  d.labels = {0, 1};
  d.images[1] = ImageTensor(5, 4, 1);
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("indices_without_label skips the given class") {
  const LabeledDataset d = generate_shape_dataset(small_spec(1));
  const auto idx = indices_without_label(d, 2);
  CHECK(idx.size() == 300);
  for (auto i : idx) CHECK(d.labels[i] != 2);
}

}  // TEST_SUITE
