#include "candid/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "candid/io_util.hpp"

namespace candid {

namespace {

namespace fs = std::filesystem;

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

std::uint8_t quantize(float v) {
  // round-half-up on the 0..255 scale
  const float scaled = std::clamp(v, 0.0f, 1.0f) * 255.0f;
  return static_cast<std::uint8_t>(std::min(255.0f, std::floor(scaled + 0.5f)));
}

Image from_interleaved(const std::uint8_t* pixels, int height, int width, int channels) {
  Image img(height, width, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        img.at(c, y, x) =
            static_cast<float>(pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]) / 255.0f;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> to_interleaved(const Image& img) {
  const int channels = img.channels();
  std::vector<std::uint8_t> pixels(img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        pixels[(static_cast<std::size_t>(y) * img.width() + x) * channels + c] = quantize(img.at(c, y, x));
      }
    }
  }
  return pixels;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  constexpr std::size_t kBitDepthOffset = 24;  // signature(8) + chunk header(8) + width/height(8)
  if (bytes.size() <= kBitDepthOffset || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw std::runtime_error(path.string() + ": not a PNG file");
  }
  if (bytes[kBitDepthOffset] != 8) {
    throw std::runtime_error(path.string() + ": unsupported bit depth " +
                             std::to_string(bytes[kBitDepthOffset]) + " (only 8-bit)");
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw std::runtime_error(path.string() + ": " + image.message);
  }
  const int channels = (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error(path.string() + ": " + msg);
  }
  return from_interleaved(pixels.data(), static_cast<int>(image.height),
                          static_cast<int>(image.width), channels);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  auto pixels = to_interleaved(img);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

// Binary PNM parsing: magic, whitespace/comments, width, height, maxval, one
// whitespace byte, raster.
Image decode_pnm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::size_t pos = 2;
  const int channels = bytes[1] == '6' ? 3 : 1;
  auto next_int = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw std::runtime_error(path.string() + ": malformed PNM header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) throw std::runtime_error(path.string() + ": PNM header value too large");
    }
    return v;
  };
  const long width = next_int();
  const long height = next_int();
  const long maxval = next_int();
  if (width <= 0 || height <= 0) throw std::runtime_error(path.string() + ": invalid PNM size");
  if (maxval != 255) {
    throw std::runtime_error(path.string() + ": unsupported bit depth (maxval " +
                             std::to_string(maxval) + ", only 255)");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw std::runtime_error(path.string() + ": malformed PNM header");
  }
  ++pos;
  const std::size_t needed = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < needed) throw std::runtime_error(path.string() + ": truncated PNM data");
  return from_interleaved(bytes.data() + pos, static_cast<int>(height), static_cast<int>(width),
                          channels);
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  auto pixels = to_interleaved(img);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace

bool is_image_file(const fs::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

Image load_image(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, path);
  }
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  throw std::runtime_error(path.string() + ": unrecognized image format");
}

void save_image(const Image& img, const fs::path& path) {
  if (img.empty()) throw std::invalid_argument("save_image: empty image");
  const auto ext = lower_extension(path);
  std::vector<std::uint8_t> bytes;
  if (ext == ".png") {
    bytes = encode_png(img);
  } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    if ((ext == ".pgm" && img.channels() != 1) || (ext == ".ppm" && img.channels() != 3)) {
      throw std::invalid_argument("save_image: channel count does not fit " + ext);
    }
    bytes = encode_pnm(img);
  } else {
    throw std::invalid_argument("save_image: unsupported extension '" + ext + "'");
  }
  write_file_atomic(path, bytes);
}

}  // namespace candid
