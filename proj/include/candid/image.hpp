#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "candid/tensor.hpp"

namespace candid {

/// Planar float image, channel-major: data[(c * height + y) * width + x].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_dims(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  float& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  // Clamp-to-edge read.
  float at_clamped(int c, int y, int x) const;
  // Bilinear sample with clamp-to-edge addressing.
  float sample(int c, float x, float y) const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> plane(int c) const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

inline constexpr double kPsnrCap = 99.0;

double mse(const Image& a, const Image& b);
/// 10 log10(1 / MSE) with peak 1; identical images return kPsnrCap.
double psnr(const Image& pred, const Image& ref);

/// Rec.601 luma; single-channel inputs are returned unchanged.
Image to_grayscale(const Image& img);
Image crop(const Image& img, int y0, int x0, int height, int width);
Image clamp01(Image img);

/// out(x, y) = img(x - dx, y - dy), bilinear with clamp-to-edge reads.
Image shift_image(const Image& img, double dx, double dy);

/// [C, H, W] tensor holding the image values (no gradient).
Tensor to_tensor(const Image& img);
Image from_tensor(const Tensor& t);

}  // namespace candid
