#include "candid/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "candid/checkpoint.hpp"
#include "candid/fp_env.hpp"
#include "candid/image_io.hpp"
#include "candid/io_util.hpp"
#include "candid/ops.hpp"
#include "candid/parallel.hpp"
#include "candid/rng.hpp"

namespace candid {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw std::invalid_argument("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string("config: '") + key + "' must be an integer");
  return v.get<int>();
}

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string("config: '") + key + "' must be a number");
  return v.get<double>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw std::invalid_argument(std::string("config: '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw std::invalid_argument(std::string("config: '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

void TrainConfig::validate(bool check_paths) const {
  if (patch_size < 16) throw std::invalid_argument("config: patch_size must be >= 16");
  if (burst_size < 1) throw std::invalid_argument("config: burst_size must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (total_steps < 0) throw std::invalid_argument("config: total_steps must be >= 0");
  if (!(max_shift >= 0.0) || max_shift >= patch_size / 2.0) {
    throw std::invalid_argument("config: max_shift must be in [0, patch_size / 2)");
  }
  if (checkpoint_every < 1) throw std::invalid_argument("config: checkpoint_every must be >= 1");
  if (probe_every < 0) throw std::invalid_argument("config: probe_every must be >= 0");
  optimizer.validate();
  arch().validate();
  if (checkpoint_path.empty()) throw std::invalid_argument("config: checkpoint_path is required");
  if (check_paths) {
    if (dataset_dir.empty()) throw std::invalid_argument("config: dataset_dir is required");
    if (!fs::is_directory(dataset_dir)) {
      throw std::invalid_argument("config: dataset_dir does not exist: " + dataset_dir.string());
    }
    const fs::path parent = checkpoint_path.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
      throw std::invalid_argument("config: checkpoint directory does not exist: " + parent.string());
    }
  }
}

ArchConfig TrainConfig::arch() const {
  ArchConfig a = architecture;
  a.burst_size = burst_size;
  a.use_prefilter = !ablation.no_prefilter;
  a.use_align = !ablation.no_align;
  a.use_adaptive_filter = !ablation.no_adaptive_filter;
  return a;
}

TrainConfig parse_train_config(const json& j) {
  reject_unknown_keys(j,
                      {"patch_size", "burst_size", "max_shift", "batch_size", "total_steps", "seed",
                       "noise_mode", "checkpoint_every", "probe_every", "optimizer", "architecture",
                       "dataset_dir", "checkpoint_path", "ablation"},
                      "");
  TrainConfig c;
  c.patch_size = get_int(j, "patch_size", c.patch_size);
  c.burst_size = get_int(j, "burst_size", c.burst_size);
  c.max_shift = get_number(j, "max_shift", c.max_shift);
  c.batch_size = get_int(j, "batch_size", c.batch_size);
  c.total_steps = get_int(j, "total_steps", c.total_steps);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw std::invalid_argument("config: 'seed' must be a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  c.noise_mode = parse_noise_level(get_string(j, "noise_mode", to_string(c.noise_mode)));
  c.checkpoint_every = get_int(j, "checkpoint_every", c.checkpoint_every);
  c.probe_every = get_int(j, "probe_every", c.probe_every);
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown_keys(o, {"lr", "beta1", "beta2", "epsilon"}, "optimizer");
    c.optimizer.lr = static_cast<float>(get_number(o, "lr", c.optimizer.lr));
    c.optimizer.beta1 = static_cast<float>(get_number(o, "beta1", c.optimizer.beta1));
    c.optimizer.beta2 = static_cast<float>(get_number(o, "beta2", c.optimizer.beta2));
    c.optimizer.epsilon = static_cast<float>(get_number(o, "epsilon", c.optimizer.epsilon));
  }
  if (j.contains("architecture")) {
    const json& a = j.at("architecture");
    reject_unknown_keys(a, {"channels", "feature_channels", "feature_hidden", "kernel_hidden", "fusion_hidden"},
                        "architecture");
    c.architecture.channels = get_int(a, "channels", c.architecture.channels);
    c.architecture.feature_channels = get_int(a, "feature_channels", c.architecture.feature_channels);
    c.architecture.feature_hidden = get_int(a, "feature_hidden", c.architecture.feature_hidden);
    c.architecture.kernel_hidden = get_int(a, "kernel_hidden", c.architecture.kernel_hidden);
    c.architecture.fusion_hidden = get_int(a, "fusion_hidden", c.architecture.fusion_hidden);
  }
  c.dataset_dir = get_string(j, "dataset_dir", c.dataset_dir.string());
  c.checkpoint_path = get_string(j, "checkpoint_path", c.checkpoint_path.string());
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    reject_unknown_keys(a, {"no_prefilter", "no_align", "no_adaptive_filter"}, "ablation");
    c.ablation.no_prefilter = get_bool(a, "no_prefilter", false);
    c.ablation.no_align = get_bool(a, "no_align", false);
    c.ablation.no_adaptive_filter = get_bool(a, "no_adaptive_filter", false);
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const fs::path& path) {
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": invalid JSON: " + e.what());
  }
  TrainConfig c = parse_train_config(j);
  c.validate(true);
  return c;
}

namespace {

// Shortest decimal that round-trips the float, so 1e-4f echoes as 1e-4.
double float_to_json(float v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::strtod(std::string(buf, end).c_str(), nullptr);
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{
      {"patch_size", c.patch_size},
      {"burst_size", c.burst_size},
      {"max_shift", c.max_shift},
      {"batch_size", c.batch_size},
      {"total_steps", c.total_steps},
      {"seed", c.seed},
      {"noise_mode", to_string(c.noise_mode)},
      {"checkpoint_every", c.checkpoint_every},
      {"probe_every", c.probe_every},
      {"optimizer",
       {{"lr", float_to_json(c.optimizer.lr)}, {"beta1", float_to_json(c.optimizer.beta1)},
        {"beta2", float_to_json(c.optimizer.beta2)}, {"epsilon", float_to_json(c.optimizer.epsilon)}}},
      {"architecture",
       {{"channels", c.architecture.channels},
        {"feature_channels", c.architecture.feature_channels},
        {"feature_hidden", c.architecture.feature_hidden},
        {"kernel_hidden", c.architecture.kernel_hidden},
        {"fusion_hidden", c.architecture.fusion_hidden}}},
      {"dataset_dir", c.dataset_dir.string()},
      {"checkpoint_path", c.checkpoint_path.string()},
      {"ablation",
       {{"no_prefilter", c.ablation.no_prefilter},
        {"no_align", c.ablation.no_align},
        {"no_adaptive_filter", c.ablation.no_adaptive_filter}}},
  };
}

// ---------------------------------------------------------------- dataset

namespace {

Image convert_channels(Image img, int channels) {
  if (img.channels() == channels) return img;
  if (channels == 1) return to_grayscale(img);
  Image out(img.height(), img.width(), 3);
  for (int c = 0; c < 3; ++c) {
    std::copy(img.data().begin(), img.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(c * img.size()));
  }
  return out;
}

}  // namespace

std::vector<NamedImage> load_images(const fs::path& dir, int channels) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("dataset directory contains no images: " + dir.string());
  std::vector<NamedImage> out;
  for (const auto& f : files) out.push_back({f.filename().string(), convert_channels(load_image(f), channels)});
  return out;
}

PatchSampler::PatchSampler(std::vector<Image> images, int patch_size) : patch_size_(patch_size) {
  if (patch_size < 1) throw std::invalid_argument("patch size must be positive");
  if (images.empty()) throw std::runtime_error("dataset is empty");
  for (auto& img : images) {
    if (img.height() >= patch_size && img.width() >= patch_size) images_.push_back(std::move(img));
  }
  if (images_.empty()) {
    throw std::runtime_error("all dataset images are smaller than the patch size " + std::to_string(patch_size));
  }
}

PatchSampler PatchSampler::from_directory(const fs::path& dir, int patch_size, int channels) {
  std::vector<Image> images;
  for (auto& named : load_images(dir, channels)) images.push_back(std::move(named.image));
  return PatchSampler(std::move(images), patch_size);
}

CropOrigin PatchSampler::sample_origin(Rng& rng) const {
  CropOrigin o;
  o.image = std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng);
  const Image& img = images_[o.image];
  o.y = std::uniform_int_distribution<int>(0, img.height() - patch_size_)(rng);
  o.x = std::uniform_int_distribution<int>(0, img.width() - patch_size_)(rng);
  return o;
}

Image PatchSampler::sample(Rng& rng) const {
  const CropOrigin o = sample_origin(rng);
  return crop(images_[o.image], o.y, o.x, patch_size_, patch_size_);
}

// ---------------------------------------------------------------- models

Image NoisyReferenceModel::denoise(const Burst& burst) const {
  burst.validate();
  return burst.reference();
}

MeanOfAlignedModel::MeanOfAlignedModel(std::shared_ptr<const FlowEstimator> flow)
    : flow_(flow ? std::move(flow) : std::make_shared<LucasKanadeFlow>()) {}

Image MeanOfAlignedModel::denoise(const Burst& burst) const {
  burst.validate();
  const Image& ref = burst.reference();
  std::vector<double> acc(ref.data().begin(), ref.data().end());
  for (std::size_t i = 1; i < burst.size(); ++i) {
    const Image warped = warp(burst.frames[i], flow_->estimate(ref, burst.frames[i], i));
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += warped.data()[k];
  }
  Image out(ref.height(), ref.width(), ref.channels());
  for (std::size_t k = 0; k < acc.size(); ++k) out.data()[k] = static_cast<float>(acc[k] / burst.size());
  return out;
}

NetworkModel::NetworkModel(std::shared_ptr<const DenoiseNet> net, std::shared_ptr<const FrameDenoiser> prefilter,
                           std::shared_ptr<const FlowEstimator> flow)
    : net_(std::move(net)),
      prefilter_(prefilter ? std::move(prefilter) : std::make_shared<BilateralDenoiser>()),
      flow_(flow ? std::move(flow) : std::make_shared<LucasKanadeFlow>()) {
  if (!net_) throw std::invalid_argument("NetworkModel: null network");
}

Image NetworkModel::denoise(const Burst& burst) const {
  NoGradGuard no_grad;
  FlushDenormals flush;
  const ForwardTrace trace = net_->forward(burst, FrozenStages{*prefilter_, *flow_});
  return from_tensor(trace.output);
}

std::shared_ptr<DenoiseNet> load_model(const fs::path& checkpoint, int burst_size, bool use_align) {
  const auto records = load_checkpoint(checkpoint);
  ArchConfig base;
  base.use_align = use_align;
  const ArchConfig arch = infer_arch(records, burst_size, base);
  if (arch.burst_size != burst_size) {
    throw std::runtime_error("checkpoint/architecture mismatch: checkpoint expects bursts of " +
                             std::to_string(arch.burst_size) + " frames, got " + std::to_string(burst_size));
  }
  auto net = std::make_shared<DenoiseNet>(arch, 0);
  net->load_state(records);
  return net;
}

// ---------------------------------------------------------------- training

fs::path optimizer_state_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".state"); }
fs::path train_log_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".log.csv"); }

namespace {

constexpr const char* kLogHeader = "step,loss,psnr_probe";
constexpr int kProbeCount = 4;
// Float steps stay exact up to 2^24.
constexpr int kMaxStoredStep = 1 << 24;

void save_optimizer_state(const fs::path& path, const DenoiseNet& net, const AdamState& state) {
  std::vector<NamedTensor> records;
  records.push_back({"adam.step", {1}, {static_cast<float>(state.step_count())}});
  const auto names = net.state();
  for (std::size_t i = 0; i < names.size(); ++i) {
    records.push_back({"adam.m/" + names[i].name, names[i].shape, state.first_moment()[i]});
    records.push_back({"adam.v/" + names[i].name, names[i].shape, state.second_moment()[i]});
  }
  save_checkpoint(path, records);
}

void load_optimizer_state(const fs::path& path, const DenoiseNet& net, AdamState& state) {
  std::map<std::string, NamedTensor> by_name;
  for (auto& r : load_checkpoint(path)) by_name[r.name] = std::move(r);
  auto find = [&](const std::string& name) -> const NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error(path.string() + ": missing optimizer record " + name);
    return it->second;
  };
  const NamedTensor& step = find("adam.step");
  if (step.data.size() != 1 || step.data[0] < 0 || step.data[0] != std::floor(step.data[0])) {
    throw std::runtime_error(path.string() + ": malformed adam.step");
  }
  state.set_step_count(static_cast<std::uint64_t>(step.data[0]));
  const auto names = net.state();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const NamedTensor& m = find("adam.m/" + names[i].name);
    const NamedTensor& v = find("adam.v/" + names[i].name);
    if (m.shape != names[i].shape || v.shape != names[i].shape) {
      throw std::runtime_error("checkpoint/architecture mismatch: optimizer state for " + names[i].name);
    }
    state.first_moment()[i] = m.data;
    state.second_moment()[i] = v.data;
  }
}

// Keeps the header and the rows up to `last_step`.
std::string truncated_log(const fs::path& path, int last_step) {
  std::string out = std::string(kLogHeader) + "\n";
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == kLogHeader) continue;
    const int step = std::stoi(line.substr(0, line.find(',')));
    if (step <= last_step) out += line + "\n";
  }
  return out;
}

struct ProbeSet {
  std::vector<SyntheticBurst> bursts;
};

ProbeSet make_probe_set(const PatchSampler& sampler, const TrainConfig& config) {
  ProbeSet probe;
  Rng rng(derive_seed(config.seed, hash_name("probe")));
  const NoiseLevel level = config.noise_mode == NoiseLevel::Train ? NoiseLevel::Lvl1 : config.noise_mode;
  for (int i = 0; i < kProbeCount; ++i) {
    const Image patch = sampler.sample(rng);
    const NoiseParams params = sample_noise_params(rng, level);
    probe.bursts.push_back(synthesize_burst(patch, config.burst_size, config.max_shift, params, rng));
  }
  return probe;
}

double run_probe(const ProbeSet& probe, const DenoiseNet& net, const FrozenStages& stages) {
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& sb : probe.bursts) {
    total += psnr(from_tensor(net.forward(sb.burst, stages).output), sb.ground_truth);
  }
  return total / static_cast<double>(probe.bursts.size());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  config.validate(true);
  FlushDenormals flush;
  if (config.total_steps > kMaxStoredStep) throw std::invalid_argument("config: total_steps too large");
  const ArchConfig arch = config.arch();
  const PatchSampler sampler = PatchSampler::from_directory(config.dataset_dir, config.patch_size, arch.channels);

  DenoiseNet net(arch, derive_seed(config.seed, hash_name("init")));
  std::vector<Tensor> params = net.parameters();
  AdamState adam(config.optimizer, params);

  const fs::path log_path = train_log_path(config.checkpoint_path);
  const fs::path state_path = optimizer_state_path(config.checkpoint_path);
  int start_step = 0;
  if (options.resume) {
    net.load_state(load_checkpoint(config.checkpoint_path));
    load_optimizer_state(state_path, net, adam);
    start_step = static_cast<int>(adam.step_count());
    write_file_atomic(log_path, truncated_log(log_path, start_step));
  } else {
    write_file_atomic(log_path, std::string(kLogHeader) + "\n");
  }
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw std::runtime_error("cannot open training log " + log_path.string());

  const BilateralDenoiser prefilter;
  const LucasKanadeFlow flow;
  const FrozenStages stages{prefilter, flow};
  const ProbeSet probe = config.probe_every > 0 ? make_probe_set(sampler, config) : ProbeSet{};

  auto save_all = [&] {
    save_checkpoint(config.checkpoint_path, net.state());
    save_optimizer_state(state_path, net, adam);
  };

  TrainResult result;
  result.final_step = start_step;
  const float inv_batch = 1.0f / static_cast<float>(config.batch_size);
  for (int step = start_step + 1; step <= config.total_steps; ++step) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(step)));
    for (auto& p : params) p.zero_grad();
    double loss_sum = 0.0;
    try {
      for (int b = 0; b < config.batch_size; ++b) {
        const Image patch = sampler.sample(rng);
        const NoiseParams noise = sample_noise_params(rng, config.noise_mode);
        const SyntheticBurst sb = synthesize_burst(patch, config.burst_size, config.max_shift, noise, rng);
        const ForwardTrace trace = net.forward(sb.burst, stages);
        const Tensor loss = l1_loss(trace.output, to_tensor(patch));
        loss_sum += loss.item();
        backward(scale(loss, inv_batch));
      }
      adam_step(params, adam);
    } catch (const NonFiniteError& e) {
      log << step << ",nan,\n";
      log.flush();
      throw std::runtime_error("non-finite value at training step " + std::to_string(step) + ": " + e.what());
    }
    const double loss = loss_sum / config.batch_size;
    std::string probe_field;
    if (config.probe_every > 0 && step % config.probe_every == 0) {
      probe_field = format_double(run_probe(probe, net, stages));
    }
    log << step << ',' << format_double(loss) << ',' << probe_field << '\n';
    log.flush();
    if (step % config.checkpoint_every == 0 || step == config.total_steps) save_all();

    result.losses.push_back(loss);
    result.final_loss = loss;
    result.final_step = step;
    ++result.steps_run;
    if (options.on_step) options.on_step(step, loss);
  }
  if (result.steps_run == 0 && !options.resume) save_all();
  return result;
}

// ---------------------------------------------------------------- evaluation

json EvalReport::to_json() const {
  json images_json = json::array();
  for (const auto& s : images) {
    images_json.push_back({{"name", s.name}, {"psnr", s.psnr}, {"noisy_psnr", s.noisy_psnr}});
  }
  return json{
      {"model", model},
      {"variant", variant},
      {"level", to_string(options.level)},
      {"seed", options.seed},
      {"burst_size", options.burst_size},
      {"max_shift", options.max_shift},
      {"channels", options.channels},
      {"images", images_json},
      {"mean_psnr", mean_psnr},
      {"mean_noisy_psnr", mean_noisy_psnr},
      {"config", config},
      {"reference",
       {{"note", "published full-scale results; not reproducible at desk scale"},
        {"grayscale", {{"lvl1", 41.35}, {"lvl2", 36.61}}},
        {"color", {{"lvl1", 42.49}, {"lvl2", 39.18}}}}},
  };
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[256];
  out << "model: " << model << "  variant: " << variant << "  level: " << to_string(options.level)
      << "  seed: " << options.seed << "  burst: " << options.burst_size << "\n";
  std::snprintf(line, sizeof line, "%-32s %10s %10s\n", "image", "PSNR", "noisy");
  out << line;
  for (const auto& s : images) {
    std::snprintf(line, sizeof line, "%-32s %10.3f %10.3f\n", s.name.c_str(), s.psnr, s.noisy_psnr);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-32s %10.3f %10.3f\n", "mean", mean_psnr, mean_noisy_psnr);
  out << line;
  out << "reference (published full-scale, dB): grayscale lvl1 41.35 / lvl2 36.61, "
         "color lvl1 42.49 / lvl2 39.18\n";
  return out.str();
}

EvalReport evaluate(const BurstDenoiser& model, const std::vector<NamedImage>& dataset, const EvalOptions& options) {
  if (dataset.empty()) throw std::runtime_error("evaluation dataset is empty");
  if (options.burst_size < 1) throw std::invalid_argument("evaluate: burst_size must be >= 1");
  EvalReport report;
  report.model = model.name();
  report.options = options;
  report.images.resize(dataset.size());
  const NoiseParams params = [&] {
    Rng unused(0);
    return sample_noise_params(unused, options.level);
  }();
  parallel_for(0, dataset.size(), [&](std::size_t i) {
    const NamedImage& item = dataset[i];
    if (item.image.channels() != options.channels) {
      throw std::runtime_error(item.name + ": expected " + std::to_string(options.channels) + " channels");
    }
    Rng rng(derive_seed(options.seed, hash_name(item.name)));
    const NoiseParams noise = options.level == NoiseLevel::Train ? sample_noise_params(rng, options.level) : params;
    const SyntheticBurst sb = synthesize_burst(item.image, options.burst_size, options.max_shift, noise, rng);
    const Image pred = model.denoise(sb.burst);
    report.images[i] = {item.name, psnr(pred, sb.ground_truth), psnr(sb.burst.reference(), sb.ground_truth)};
  });
  double total = 0.0, noisy_total = 0.0;
  for (const auto& s : report.images) {
    total += s.psnr;
    noisy_total += s.noisy_psnr;
  }
  report.mean_psnr = total / static_cast<double>(report.images.size());
  report.mean_noisy_psnr = noisy_total / static_cast<double>(report.images.size());
  return report;
}

EvalReport evaluate(const BurstDenoiser& model, const fs::path& dataset_dir, const EvalOptions& options) {
  return evaluate(model, load_images(dataset_dir, options.channels), options);
}

// ---------------------------------------------------------------- ablation

AblationVariant parse_ablation_variant(const std::string& text) {
  if (text == "full") return AblationVariant::Full;
  if (text == "no_prefilter") return AblationVariant::NoPrefilter;
  if (text == "no_align") return AblationVariant::NoAlign;
  if (text == "no_adaptive_filter") return AblationVariant::NoAdaptiveFilter;
  throw std::invalid_argument("unknown ablation variant '" + text +
                              "' (expected full, no_prefilter, no_align, no_adaptive_filter)");
}

std::string to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::Full: return "full";
    case AblationVariant::NoPrefilter: return "no_prefilter";
    case AblationVariant::NoAlign: return "no_align";
    case AblationVariant::NoAdaptiveFilter: return "no_adaptive_filter";
  }
  return "full";
}

AblationFlags flags_for(AblationVariant variant) {
  AblationFlags f;
  f.no_prefilter = variant == AblationVariant::NoPrefilter;
  f.no_align = variant == AblationVariant::NoAlign;
  f.no_adaptive_filter = variant == AblationVariant::NoAdaptiveFilter;
  return f;
}

EvalReport ablate(TrainConfig config, AblationVariant variant, const fs::path& eval_dir,
                  const EvalOptions& eval_options) {
  config.ablation = flags_for(variant);
  train(config);
  auto net = load_model(config.checkpoint_path, config.burst_size, !config.ablation.no_align);
  const NetworkModel model(std::move(net));
  EvalReport report = evaluate(model, eval_dir, eval_options);
  report.variant = to_string(variant);
  report.config = to_json(config);
  return report;
}

}  // namespace candid
