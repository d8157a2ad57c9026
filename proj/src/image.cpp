#include "candid/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace candid {

Image::Image(int height, int width, int channels, float fill)
    : Image(height, width, channels,
            std::vector<float>(static_cast<std::size_t>(std::max(height, 0)) *
                                   std::max(width, 0) * std::max(channels, 0),
                               fill)) {}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("image dimensions must be positive");
  if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("image data length does not match dimensions");
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("image values must be finite");
  }
}

float Image::at_clamped(int c, int y, int x) const {
  return at(c, std::clamp(y, 0, height_ - 1), std::clamp(x, 0, width_ - 1));
}

float Image::sample(int c, float x, float y) const {
  const float fx = std::floor(x), fy = std::floor(y);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const float ax = x - fx, ay = y - fy;
  const float top = (1.0f - ax) * at_clamped(c, y0, x0) + ax * at_clamped(c, y0, x0 + 1);
  const float bottom = (1.0f - ax) * at_clamped(c, y0 + 1, x0) + ax * at_clamped(c, y0 + 1, x0 + 1);
  return (1.0f - ay) * top + ay * bottom;
}

std::span<const float> Image::plane(int c) const {
  return std::span(data_).subspan(static_cast<std::size_t>(c) * height_ * width_,
                                  static_cast<std::size_t>(height_) * width_);
}

double mse(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw std::invalid_argument("mse: image dimensions differ");
  const auto x = a.data(), y = b.data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    total += d * d;
  }
  return total / static_cast<double>(x.size());
}

double psnr(const Image& pred, const Image& ref) {
  const double err = mse(pred, ref);
  if (err == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / err));
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
      // Gray inputs map to themselves exactly.
      out.at(0, y, x) = (r == g && g == b) ? r : 0.299f * r + 0.587f * g + 0.114f * b;
    }
  }
  return out;
}

Image crop(const Image& img, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || height <= 0 || width <= 0 || y0 + height > img.height() ||
      x0 + width > img.width()) {
    throw std::invalid_argument("crop window outside image");
  }
  Image out(height, width, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

Image clamp01(Image img) {
  for (auto& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

Image shift_image(const Image& img, double dx, double dy) {
  const double limit = std::min(img.height(), img.width()) / 2.0;
  if (!(std::abs(dx) < limit && std::abs(dy) < limit)) {
    throw std::invalid_argument("shift_image: shift exceeds half the image size");
  }
  Image out(img.height(), img.width(), img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        out.at(c, y, x) = img.sample(c, static_cast<float>(x - dx), static_cast<float>(y - dy));
      }
    }
  }
  return out;
}

Tensor to_tensor(const Image& img) {
  return Tensor::from_data({static_cast<std::size_t>(img.channels()),
                            static_cast<std::size_t>(img.height()),
                            static_cast<std::size_t>(img.width())},
                           std::vector<float>(img.data().begin(), img.data().end()));
}

Image from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw std::invalid_argument("from_tensor: expected [C,H,W]");
  return Image(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2)), static_cast<int>(t.dim(0)),
               std::vector<float>(t.data().begin(), t.data().end()));
}

}  // namespace candid
