#include "sancdifi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sancdifi/error.hpp"

namespace sancdifi {

namespace {

void check_dims(int h, int w, int c) {
  require(h > 0 && w > 0 && c > 0, ErrorKind::InvalidArgument,
          "tensor dims must be positive, got " + std::to_string(h) + "x" +
              std::to_string(w) + "x" + std::to_string(c));
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, int channels, Domain domain)
    : height_(height), width_(width), channels_(channels), domain_(domain) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

ImageTensor::ImageTensor(int height, int width, int channels, std::vector<double> data,
                         Domain domain)
    : height_(height),
      width_(width),
      channels_(channels),
      domain_(domain),
      data_(std::move(data)) {
  check_dims(height, width, channels);
  require(data_.size() == static_cast<std::size_t>(height) * width * channels,
          ErrorKind::DimensionMismatch, "tensor data length does not equal H*W*C");
}

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : height_(height), width_(width) {
  check_dims(height, width, 1);
  require(fill <= 1, ErrorKind::InvalidArgument, "mask values must be 0 or 1");
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
  check_dims(height, width, 1);
  require(data_.size() == static_cast<std::size_t>(height) * width,
          ErrorKind::DimensionMismatch, "mask data length does not equal H*W");
  require(std::all_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v <= 1; }),
          ErrorKind::InvalidArgument, "mask values must be 0 or 1");
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& v : out.data_) v = static_cast<std::uint8_t>(1 - v);
  return out;
}

std::size_t BinaryMask::count_ones() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

double BinaryMask::density() const noexcept {
  return data_.empty() ? 0.0
                       : static_cast<double>(count_ones()) / static_cast<double>(size());
}

ImageTensor convert_domain(const ImageTensor& x, Domain target) {
  require(x.domain() != target, ErrorKind::InvalidArgument,
          "convert_domain: tensor is already in the target domain");
  ImageTensor out = x;
  out.set_domain(target);
  if (target == Domain::Signed) {
    for (auto& v : out.values()) v = 2.0 * v - 1.0;
  } else {
    for (auto& v : out.values()) v = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
  }
  return out;
}

ImageTensor sample_gaussian(SeededRng& rng, int height, int width, int channels) {
  ImageTensor out(height, width, channels, Domain::Signed);
  for (auto& v : out.values()) v = rng.normal();
  return out;
}

void clamp_to_domain(ImageTensor& x) noexcept {
  const double lo = x.domain() == Domain::Unit ? 0.0 : -1.0;
  for (auto& v : x.values()) v = std::clamp(v, lo, 1.0);
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  require(a.same_shape(b), ErrorKind::DimensionMismatch, "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace sancdifi
