#include "candid/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

#include "candid/image_io.hpp"
#include "candid/io_util.hpp"

namespace candid {

namespace fs = std::filesystem;

NoiseLevel parse_noise_level(const std::string& text) {
  if (text == "train") return NoiseLevel::Train;
  if (text == "lvl1") return NoiseLevel::Lvl1;
  if (text == "lvl2") return NoiseLevel::Lvl2;
  throw std::invalid_argument("unknown noise level '" + text + "' (train|lvl1|lvl2)");
}

std::string to_string(NoiseLevel level) {
  switch (level) {
    case NoiseLevel::Train: return "train";
    case NoiseLevel::Lvl1: return "lvl1";
    case NoiseLevel::Lvl2: return "lvl2";
  }
  return "?";
}

NoiseParams sample_noise_params(Rng& rng, NoiseLevel level) {
  switch (level) {
    case NoiseLevel::Lvl1: return {std::pow(10.0, -2.2), std::pow(10.0, -2.6)};
    case NoiseLevel::Lvl2: return {std::pow(10.0, -1.8), std::pow(10.0, -2.2)};
    case NoiseLevel::Train: break;
  }
  std::uniform_real_distribution<double> log_read(-3.0, -1.5);
  std::uniform_real_distribution<double> log_shot(-4.0, -2.0);
  const double r = log_read(rng);
  const double s = log_shot(rng);
  return {std::pow(10.0, r), std::pow(10.0, s)};
}

Image add_noise(const Image& clean, const NoiseParams& params, Rng& rng) {
  if (params.sigma_r < 0.0 || params.sigma_s < 0.0) {
    throw std::invalid_argument("add_noise: noise parameters must be non-negative");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Image out = clean;
  for (auto& v : out.data()) {
    const double x = v;
    const double stddev = std::sqrt(std::max(0.0, params.variance(x)));
    const double noisy = x + stddev * normal(rng);
    v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
  }
  return out;
}

void Burst::validate() const {
  if (frames.empty()) throw std::invalid_argument("burst has no frames");
  for (const auto& f : frames) {
    if (!f.same_dims(frames[0])) throw std::invalid_argument("burst frames differ in size");
  }
  if (!true_shifts.empty() && true_shifts.size() != frames.size()) {
    throw std::invalid_argument("burst shift list does not match frame count");
  }
}

SyntheticBurst synthesize_burst(const Image& ground_truth, int n, double max_shift,
                                const NoiseParams& params, Rng& rng, bool integer_shifts) {
  if (n < 1) throw std::invalid_argument("synthesize_burst: burst size must be >= 1");
  if (max_shift < 0.0) throw std::invalid_argument("synthesize_burst: max_shift must be >= 0");

  SyntheticBurst out;
  out.ground_truth = ground_truth;
  out.burst.params = params;
  out.burst.true_shifts.push_back({0.0, 0.0});
  std::uniform_real_distribution<double> offset(-max_shift, max_shift);
  for (int i = 1; i < n; ++i) {
    Shift s{max_shift > 0.0 ? offset(rng) : 0.0, max_shift > 0.0 ? offset(rng) : 0.0};
    if (integer_shifts) s = {std::round(s.dx), std::round(s.dy)};
    out.burst.true_shifts.push_back(s);
  }
  const std::uint64_t noise_root = rng();
  for (int i = 0; i < n; ++i) {
    const Shift& s = out.burst.true_shifts[static_cast<std::size_t>(i)];
    Image clean = (i == 0 || (s.dx == 0.0 && s.dy == 0.0))
                      ? ground_truth
                      : shift_image(ground_truth, s.dx, s.dy);
    Rng frame_rng(derive_seed(noise_root, static_cast<std::uint64_t>(i)));
    out.burst.frames.push_back(add_noise(clean, params, frame_rng));
  }
  return out;
}

std::string frame_filename(std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%03zu.png", index);
  return name;
}

void write_burst_dir(const fs::path& dir, const SyntheticBurst& burst, std::uint64_t seed) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < burst.burst.frames.size(); ++i) {
    save_image(burst.burst.frames[i], dir / frame_filename(i));
  }
  save_image(burst.ground_truth, dir / "gt.png");
  nlohmann::json meta;
  meta["sigma_r"] = burst.burst.params.sigma_r;
  meta["sigma_s"] = burst.burst.params.sigma_s;
  meta["seed"] = seed;
  auto shifts = nlohmann::json::array();
  for (const auto& s : burst.burst.true_shifts) shifts.push_back({s.dx, s.dy});
  meta["true_shifts"] = shifts;
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

LoadedBurst read_burst_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("burst directory not found: " + dir.string());
  const auto meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw std::runtime_error("missing " + meta_path.string());
  const auto bytes = read_file(meta_path);
  const auto meta = nlohmann::json::parse(bytes.begin(), bytes.end());

  LoadedBurst out;
  out.burst.params = {meta.at("sigma_r").get<double>(), meta.at("sigma_s").get<double>()};
  for (std::size_t i = 0; fs::exists(dir / frame_filename(i)); ++i) {
    out.burst.frames.push_back(load_image(dir / frame_filename(i)));
  }
  if (out.burst.frames.empty()) throw std::runtime_error("no frames in " + dir.string());
  if (meta.contains("true_shifts")) {
    for (const auto& s : meta["true_shifts"]) {
      out.burst.true_shifts.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    }
  }
  out.burst.validate();
  if (fs::exists(dir / "gt.png")) out.ground_truth = load_image(dir / "gt.png");
  return out;
}

}  // namespace candid
