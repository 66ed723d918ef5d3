#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sancdifi/rng.hpp"

namespace sancdifi {

/// Value range convention of an image. Classifier and trigger math live in
/// the unit range; diffusion runs in the signed range.
enum class Domain : std::uint8_t { Unit = 0, Signed = 1 };

/// H x W x C grid, row-major, channel-last.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, int channels, Domain domain = Domain::Unit);
  ImageTensor(int height, int width, int channels, std::vector<double> data,
              Domain domain);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  int pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Domain domain() const noexcept { return domain_; }
  void set_domain(Domain d) noexcept { domain_ = d; }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Domain domain_ = Domain::Unit;
  std::vector<double> data_;
};

/// H x W mask of {0, 1}, broadcast across channels.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);
  BinaryMask(int height, int width, std::vector<std::uint8_t> data);

  static BinaryMask ones(int height, int width) { return {height, width, 1}; }
  static BinaryMask zeros(int height, int width) { return {height, width, 0}; }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t& at(int y, int x) noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t at(int y, int x) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t operator[](std::size_t i) const noexcept { return data_[i]; }
  std::uint8_t& operator[](std::size_t i) noexcept { return data_[i]; }
  std::span<const std::uint8_t> values() const noexcept { return data_; }

  BinaryMask complement() const;
  std::size_t count_ones() const noexcept;
  std::size_t count_zeros() const noexcept { return size() - count_ones(); }
  /// Fraction of kept (value 1) pixels.
  double density() const noexcept;

  bool matches(const ImageTensor& image) const noexcept {
    return height_ == image.height() && width_ == image.width();
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// unit -> signed: v -> 2v - 1; signed -> unit: v -> clamp((v + 1) / 2, 0, 1).
ImageTensor convert_domain(const ImageTensor& x, Domain target);

/// I.i.d. standard normal entries, drawn in storage order.
ImageTensor sample_gaussian(SeededRng& rng, int height, int width, int channels);

/// Clamps every value into the tensor's domain range.
void clamp_to_domain(ImageTensor& x) noexcept;

double max_abs_diff(const ImageTensor& a, const ImageTensor& b);

}  // namespace sancdifi
