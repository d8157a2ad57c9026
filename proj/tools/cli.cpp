#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "candid/image_io.hpp"
#include "candid/io_util.hpp"
#include "candid/parallel.hpp"
#include "candid/pipeline.hpp"

namespace candid::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

const std::map<std::string, NoiseLevel> kLevels = {
    {"train", NoiseLevel::Train}, {"lvl1", NoiseLevel::Lvl1}, {"lvl2", NoiseLevel::Lvl2}};

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::string input;
  std::string out;
  std::string level = "lvl1";
  int burst_size = 4;
  double max_shift = 4.0;
  int channels = 1;
  bool integer_shifts = false;
  std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
  const NoiseLevel level = parse_noise_level(a.level);
  const auto images = load_images(a.input, a.channels);
  fs::create_directories(a.out);
  for (const auto& item : images) {
    const std::uint64_t seed = derive_seed(a.seed, hash_name(item.name));
    Rng rng(seed);
    const NoiseParams params = sample_noise_params(rng, level);
    const SyntheticBurst sb = synthesize_burst(item.image, a.burst_size, a.max_shift, params, rng, a.integer_shifts);
    write_burst_dir(fs::path(a.out) / fs::path(item.name).stem(), sb, seed);
  }
  std::cout << "wrote " << images.size() << " bursts to " << a.out << "\n";
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string config;
  TrainConfig values;  // flag storage, initialized to the desk defaults
  std::string dataset;
  std::string checkpoint;
  std::string noise_mode;
  bool no_prefilter = false;
  bool no_align = false;
  bool no_adaptive_filter = false;
  bool resume = false;
};

void add_train_options(CLI::App& cmd, TrainArgs& a) {
  TrainConfig& v = a.values;
  a.checkpoint = v.checkpoint_path.string();
  a.noise_mode = to_string(v.noise_mode);
  cmd.add_option("--config", a.config, "JSON training config; flags given explicitly override it")
      ->check(CLI::ExistingFile);
  cmd.add_option("--dataset", a.dataset, "Directory of clean training images");
  cmd.add_option("--checkpoint", a.checkpoint, "Output checkpoint path")->capture_default_str();
  cmd.add_option("--patch-size", v.patch_size, "Training crop size")->capture_default_str();
  cmd.add_option("--burst-size", v.burst_size, "Frames per burst")->capture_default_str();
  cmd.add_option("--max-shift", v.max_shift, "Maximum per-frame shift in pixels")->capture_default_str();
  cmd.add_option("--batch-size", v.batch_size, "Bursts per optimizer step")->capture_default_str();
  cmd.add_option("--steps", v.total_steps, "Total optimizer steps")->capture_default_str();
  cmd.add_option("--noise-mode", a.noise_mode, "Training noise: train (random range), lvl1, lvl2")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "lvl1", "lvl2"}));
  cmd.add_option("--checkpoint-every", v.checkpoint_every, "Checkpoint interval in steps")->capture_default_str();
  cmd.add_option("--probe-every", v.probe_every, "Probe PSNR interval in steps (0 disables)")->capture_default_str();
  cmd.add_option("--lr", v.optimizer.lr, "ADAM learning rate")->capture_default_str();
  cmd.add_option("--channels", v.architecture.channels, "Image channels (1 or 3)")->capture_default_str();
  cmd.add_option("--kernel-hidden", v.architecture.kernel_hidden, "Kernel predictor width")->capture_default_str();
  cmd.add_option("--fusion-hidden", v.architecture.fusion_hidden, "Fusion network width")->capture_default_str();
  cmd.add_flag("--no-prefilter", a.no_prefilter, "Ablation: raw stream only");
  cmd.add_flag("--no-align", a.no_align, "Ablation: identity flow");
  cmd.add_flag("--no-adaptive-filter", a.no_adaptive_filter, "Ablation: fuse aligned frames unfiltered");
}

// Config file values, overridden by flags the user actually passed.
TrainConfig resolve_train_config(const CLI::App& cmd, const TrainArgs& a) {
  const TrainConfig& v = a.values;
  TrainConfig c = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (a.config.empty() || given("--dataset")) c.dataset_dir = a.dataset;
  if (a.config.empty() || given("--checkpoint")) c.checkpoint_path = a.checkpoint;
  if (a.config.empty() || given("--patch-size")) c.patch_size = v.patch_size;
  if (a.config.empty() || given("--burst-size")) c.burst_size = v.burst_size;
  if (a.config.empty() || given("--max-shift")) c.max_shift = v.max_shift;
  if (a.config.empty() || given("--batch-size")) c.batch_size = v.batch_size;
  if (a.config.empty() || given("--steps")) c.total_steps = v.total_steps;
  if (a.config.empty() || given("--noise-mode")) c.noise_mode = parse_noise_level(a.noise_mode);
  if (a.config.empty() || given("--checkpoint-every")) c.checkpoint_every = v.checkpoint_every;
  if (a.config.empty() || given("--probe-every")) c.probe_every = v.probe_every;
  if (a.config.empty() || given("--lr")) c.optimizer.lr = v.optimizer.lr;
  if (a.config.empty() || given("--channels")) c.architecture.channels = v.architecture.channels;
  if (a.config.empty() || given("--kernel-hidden")) c.architecture.kernel_hidden = v.architecture.kernel_hidden;
  if (a.config.empty() || given("--fusion-hidden")) c.architecture.fusion_hidden = v.architecture.fusion_hidden;
  if (a.config.empty() || given("--seed")) c.seed = v.seed;
  if (a.no_prefilter) c.ablation.no_prefilter = true;
  if (a.no_align) c.ablation.no_align = true;
  if (a.no_adaptive_filter) c.ablation.no_adaptive_filter = true;
  c.validate(true);
  return c;
}

void run_train(const CLI::App& cmd, const TrainArgs& a) {
  const TrainConfig config = resolve_train_config(cmd, a);
  TrainOptions options;
  options.resume = a.resume;
  const int report_every = std::max(1, config.total_steps / 20);
  options.on_step = [&](int step, double loss) {
    if (step % report_every == 0 || step == config.total_steps) {
      std::cout << "step " << step << "/" << config.total_steps << "  loss " << loss << "\n" << std::flush;
    }
  };
  const TrainResult result = train(config, options);
  std::cout << "trained " << result.steps_run << " steps; checkpoint " << config.checkpoint_path.string() << "\n";
}

// ------------------------------------------------------------------ denoise

struct DenoiseArgs {
  std::string burst;
  std::string checkpoint;
  std::string out;
  double error_scale = 5.0;
  std::string prefiltered_dir;
  std::string flow_dir;
  bool no_align = false;
  std::uint64_t seed = 0;
};

void run_denoise(const DenoiseArgs& a) {
  const LoadedBurst loaded = read_burst_dir(a.burst);
  auto net = load_model(a.checkpoint, static_cast<int>(loaded.burst.size()), !a.no_align);
  std::shared_ptr<const FrameDenoiser> prefilter;
  if (!a.prefiltered_dir.empty()) prefilter = std::make_shared<DirectoryDenoiser>(a.prefiltered_dir);
  std::shared_ptr<const FlowEstimator> flow;
  if (!a.flow_dir.empty()) flow = std::make_shared<FloDirectoryFlow>(a.flow_dir);
  const NetworkModel model(std::move(net), prefilter, flow);
  const Image pred = model.denoise(loaded.burst);

  std::optional<Image> error_map;
  if (loaded.ground_truth) {
    const Image& gt = *loaded.ground_truth;
    if (!gt.same_dims(pred)) throw std::runtime_error("gt.png dimensions do not match the burst");
    Image err(pred.height(), pred.width(), pred.channels());
    for (std::size_t i = 0; i < err.size(); ++i) {
      err.data()[i] = static_cast<float>(std::abs(pred.data()[i] - gt.data()[i]) * a.error_scale);
    }
    error_map = clamp01(std::move(err));
  }
  // Outputs are written only after every computation succeeded.
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_image(pred, a.out);
  std::cout << "wrote " << a.out;
  if (error_map) {
    const fs::path error_path = fs::path(a.out).parent_path() / "error.png";
    save_image(*error_map, error_path);
    std::cout << " and " << error_path.string() << " (PSNR " << psnr(pred, *loaded.ground_truth) << " dB)";
  }
  std::cout << "\n";
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string dataset;
  std::string checkpoint;
  std::string model = "candid";
  std::string level = "lvl1";
  std::string report;
  int burst_size = 4;
  double max_shift = 4.0;
  int channels = 1;
  bool no_align = false;
  std::uint64_t seed = 0;
};

void write_report(const EvalReport& report, const std::string& path) {
  std::cout << report.to_table();
  if (!path.empty()) write_file_atomic(path, report.to_json().dump(2) + "\n");
}

void run_eval(const EvalArgs& a) {
  EvalOptions options;
  options.level = parse_noise_level(a.level);
  options.seed = a.seed;
  options.burst_size = a.burst_size;
  options.max_shift = a.max_shift;
  options.channels = a.channels;
  std::unique_ptr<BurstDenoiser> model;
  if (a.model == "candid") {
    if (a.checkpoint.empty()) throw std::runtime_error("--checkpoint is required for model 'candid'");
    auto net = load_model(a.checkpoint, a.burst_size, !a.no_align);
    options.channels = net->config().channels;
    model = std::make_unique<NetworkModel>(std::move(net));
  } else if (a.model == "noisy_reference") {
    model = std::make_unique<NoisyReferenceModel>();
  } else {
    model = std::make_unique<MeanOfAlignedModel>();
  }
  EvalReport report = evaluate(*model, a.dataset, options);
  if (a.no_align) report.variant = "no_align";
  write_report(report, a.report);
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
  TrainArgs train;
  std::string variant;
  std::string eval_dataset;
  std::string level = "lvl1";
  std::string report;
};

void run_ablate(const CLI::App& cmd, const AblateArgs& a) {
  const TrainConfig config = resolve_train_config(cmd, a.train);
  EvalOptions options;
  options.level = parse_noise_level(a.level);
  options.seed = config.seed;
  options.burst_size = config.burst_size;
  options.max_shift = config.max_shift;
  options.channels = config.architecture.channels;
  const EvalReport report = ablate(config, parse_ablation_variant(a.variant), a.eval_dataset, options);
  write_report(report, a.report);
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Burst denoising toolkit: synthesize bursts, train, denoise, evaluate, ablate", "candid"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write synthetic noisy burst directories from clean images");
  synth_cmd->add_option("--input", synth.input, "Directory of clean images")->required()->check(CLI::ExistingDirectory);
  synth_cmd->add_option("--out", synth.out, "Output directory (one burst directory per image)")->required();
  synth_cmd->add_option("--level", synth.level, "Noise level: lvl1, lvl2, or train (random range)")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "lvl1", "lvl2"}));
  synth_cmd->add_option("--burst-size", synth.burst_size, "Frames per burst")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-shift", synth.max_shift, "Maximum per-frame shift in pixels")->capture_default_str();
  synth_cmd->add_option("--channels", synth.channels, "1 (luma) or 3")->capture_default_str()->check(CLI::IsMember({1, 3}));
  synth_cmd->add_flag("--integer-shifts", synth.integer_shifts, "Round shifts to whole pixels");
  synth_cmd->add_option("--seed", synth.seed, "Root seed")->capture_default_str();

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the network end to end");
  add_train_options(*train_cmd, train_args);
  train_cmd->add_option("--seed", train_args.values.seed, "Root seed")->capture_default_str();
  train_cmd->add_flag("--resume", train_args.resume, "Continue from --checkpoint and its .state file");

  DenoiseArgs den;
  CLI::App* den_cmd = app.add_subcommand("denoise", "Denoise one burst directory");
  den_cmd->add_option("--burst", den.burst, "Burst directory (frame_000.png ..., meta.json)")->required()->check(CLI::ExistingDirectory);
  den_cmd->add_option("--checkpoint", den.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  den_cmd->add_option("--out", den.out, "Output image path")->required();
  den_cmd->add_option("--error-scale", den.error_scale, "Error map scale when gt.png is present")->capture_default_str();
  den_cmd->add_option("--prefiltered-dir", den.prefiltered_dir,
                      "Use externally pre-denoised frames <dir>/mild|strong/frame_XXX.png")
      ->check(CLI::ExistingDirectory);
  den_cmd->add_option("--flow-dir", den.flow_dir, "Use precomputed flow <dir>/flow_XXX.flo")->check(CLI::ExistingDirectory);
  den_cmd->add_flag("--no-align", den.no_align, "Identity flow (for no_align checkpoints)");
  den_cmd->add_option("--seed", den.seed, "Accepted for uniformity; denoising is deterministic")->capture_default_str();

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate on synthesized bursts from clean images");
  eval_cmd->add_option("--dataset", ev.dataset, "Directory of clean images")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint (model candid)");
  eval_cmd->add_option("--model", ev.model, "candid, noisy_reference, or mean_of_aligned")
      ->capture_default_str()
      ->check(CLI::IsMember({"candid", "noisy_reference", "mean_of_aligned"}));
  eval_cmd->add_option("--level", ev.level, "Noise level")->capture_default_str()->check(CLI::IsMember({"lvl1", "lvl2"}));
  eval_cmd->add_option("--burst-size", ev.burst_size, "Frames per burst")->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--max-shift", ev.max_shift, "Maximum per-frame shift in pixels")->capture_default_str();
  eval_cmd->add_option("--channels", ev.channels, "Channels for baseline models")->capture_default_str()->check(CLI::IsMember({1, 3}));
  eval_cmd->add_flag("--no-align", ev.no_align, "Identity flow (for no_align checkpoints)");
  eval_cmd->add_option("--report", ev.report, "Write the JSON report here");
  eval_cmd->add_option("--seed", ev.seed, "Root seed")->capture_default_str();

  AblateArgs ab;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Train one pipeline variant from scratch and evaluate it");
  add_train_options(*ablate_cmd, ab.train);
  ablate_cmd->add_option("--seed", ab.train.values.seed, "Root seed for training and evaluation")->capture_default_str();
  ablate_cmd->add_option("--variant", ab.variant, "full, no_prefilter, no_align, or no_adaptive_filter")
      ->required()
      ->check(CLI::IsMember({"full", "no_prefilter", "no_align", "no_adaptive_filter"}));
  ablate_cmd->add_option("--eval-dataset", ab.eval_dataset, "Held-out clean images")->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--level", ab.level, "Evaluation noise level")->capture_default_str()->check(CLI::IsMember({"lvl1", "lvl2"}));
  ablate_cmd->add_option("--report", ab.report, "Write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    worker_count();  // rejects a malformed CANDID_THREADS up front
    if (*synth_cmd) run_synth(synth);
    else if (*train_cmd) run_train(*train_cmd, train_args);
    else if (*den_cmd) run_denoise(den);
    else if (*eval_cmd) run_eval(ev);
    else if (*ablate_cmd) run_ablate(*ablate_cmd, ab);
  } catch (const std::exception& e) {
    std::cerr << "candid: error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}

}  // namespace candid::cli
