#include "support/scenes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <unistd.h>

#include "candid/image_io.hpp"
#include "candid/rng.hpp"

namespace candid::testing {

namespace {

double smoothstep(double edge, double v) {
  // Soft edge about 1.5 px wide.
  return 1.0 / (1.0 + std::exp(-(v - edge) / 0.5));
}

}  // namespace

Image make_texture(int height, int width, std::uint64_t seed, double min_wavelength) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    const double wavelength = min_wavelength * (1.0 + 3.0 * u(rng));
    const double angle = 2.0 * std::numbers::pi * u(rng);
    const double k = 2.0 * std::numbers::pi / wavelength;
    waves.push_back({k * std::cos(angle), k * std::sin(angle), 2.0 * std::numbers::pi * u(rng), 0.5 + u(rng)});
  }
  double amp_total = 0.0;
  for (const auto& w : waves) amp_total += w.amp;
  Image img(height, width, 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (const auto& w : waves) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
      img.at(0, y, x) = static_cast<float>(0.5 + 0.4 * v / amp_total);
    }
  }
  return img;
}

Image make_scene(int height, int width, int channels, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(height, width, channels);
  // Per-channel linear shading.
  for (int c = 0; c < channels; ++c) {
    const double base = 0.25 + 0.5 * u(rng), gx = (u(rng) - 0.5) * 0.4, gy = (u(rng) - 0.5) * 0.4;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        img.at(c, y, x) = static_cast<float>(base + gx * x / width + gy * y / height);
      }
    }
  }
  const int shapes = 4 + static_cast<int>(u(rng) * 5);
  for (int s = 0; s < shapes; ++s) {
    const double cx = u(rng) * width, cy = u(rng) * height;
    const double radius = (0.08 + 0.25 * u(rng)) * std::min(height, width);
    const bool disc = u(rng) < 0.5;
    std::vector<double> color(static_cast<std::size_t>(channels));
    for (auto& v : color) v = 0.1 + 0.8 * u(rng);
    const bool textured = u(rng) < 0.4;
    const Image texture = textured ? make_texture(height, width, rng()) : Image();
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double dist = disc ? std::hypot(dx, dy) : std::max(std::abs(dx), std::abs(dy));
        const double alpha = 1.0 - smoothstep(radius, dist);
        if (alpha < 1e-4) continue;
        for (int c = 0; c < channels; ++c) {
          double v = color[static_cast<std::size_t>(c)];
          if (textured) v += 0.6 * (texture.at(0, y, x) - 0.5);
          img.at(c, y, x) = static_cast<float>((1.0 - alpha) * img.at(c, y, x) + alpha * v);
        }
      }
    }
  }
  for (auto& v : img.data()) v = std::clamp(v, 0.02f, 0.98f);
  return img;
}

void write_scene_set(const std::filesystem::path& dir, int count, int height, int width, int channels,
                     std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d.png", i);
    save_image(make_scene(height, width, channels, derive_seed(seed, static_cast<std::uint64_t>(i))), dir / name);
  }
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("candid_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace candid::testing
