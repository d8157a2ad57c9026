#include "candid/prefilter.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "candid/image_io.hpp"

namespace candid {

BilateralParams BilateralParams::for_strength(Strength strength) {
  BilateralParams p;
  p.range_sigma = (strength == Strength::Mild ? 10.0f : 30.0f) / 255.0f;
  return p;
}

Image bilateral_filter(const Image& img, const BilateralParams& params) {
  const int r = params.radius;
  const int side = 2 * r + 1;
  std::vector<float> spatial(static_cast<std::size_t>(side * side));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      spatial[static_cast<std::size_t>((dy + r) * side + dx + r)] =
          std::exp(-static_cast<float>(dx * dx + dy * dy) /
                   (2.0f * params.spatial_sigma * params.spatial_sigma));
    }
  }
  const float range_scale = -1.0f / (2.0f * params.range_sigma * params.range_sigma);
  const int channels = img.channels();

  Image out(img.height(), img.width(), channels);
  std::vector<double> acc(static_cast<std::size_t>(channels));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          float dist2 = 0.0f;
          for (int c = 0; c < channels; ++c) {
            const float d = img.at_clamped(c, y + dy, x + dx) - img.at(c, y, x);
            dist2 += d * d;
          }
          const double w = spatial[static_cast<std::size_t>((dy + r) * side + dx + r)] *
                           std::exp(dist2 * range_scale);
          total += w;
          for (int c = 0; c < channels; ++c) acc[c] += w * img.at_clamped(c, y + dy, x + dx);
        }
      }
      for (int c = 0; c < channels; ++c) out.at(c, y, x) = static_cast<float>(acc[c] / total);
    }
  }
  return out;
}

Image prefilter_frame(const Image& img, Strength strength) {
  return bilateral_filter(img, BilateralParams::for_strength(strength));
}

Image BilateralDenoiser::denoise(const Image& frame, Strength strength, std::size_t) const {
  return prefilter_frame(frame, strength);
}

DirectoryDenoiser::DirectoryDenoiser(std::filesystem::path root) : root_(std::move(root)) {
  for (const char* sub : {"mild", "strong"}) {
    if (!std::filesystem::is_directory(root_ / sub)) {
      throw std::runtime_error("pre-filtered directory lacks '" + std::string(sub) +
                               "/': " + root_.string());
    }
  }
}

Image DirectoryDenoiser::denoise(const Image& frame, Strength strength,
                                 std::size_t frame_index) const {
  const auto path = root_ / (strength == Strength::Mild ? "mild" : "strong") /
                    frame_filename(frame_index);
  Image img = load_image(path);
  if (img.channels() != frame.channels() && img.channels() == 3) img = to_grayscale(img);
  if (!img.same_dims(frame)) {
    throw std::runtime_error(path.string() + ": dimensions do not match the burst frame");
  }
  return img;
}

StreamSet make_streams(const Burst& burst, const FrameDenoiser& denoiser) {
  burst.validate();
  StreamSet set;
  set.streams[0] = burst;
  for (Strength strength : {Strength::Mild, Strength::Strong}) {
    Burst& stream = set.streams[strength == Strength::Mild ? 1 : 2];
    stream.params = burst.params;
    stream.true_shifts = burst.true_shifts;
    for (std::size_t i = 0; i < burst.frames.size(); ++i) {
      stream.frames.push_back(denoiser.denoise(burst.frames[i], strength, i));
    }
  }
  return set;
}

StreamSet make_streams(const Burst& burst) { return make_streams(burst, BilateralDenoiser{}); }

}  // namespace candid
