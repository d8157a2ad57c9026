#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "candid/checkpoint.hpp"
#include "candid/image_io.hpp"
#include "candid/io_util.hpp"
#include "candid/noise.hpp"
#include "candid/pipeline.hpp"
#include "support/scenes.hpp"

namespace candid {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
};

// Runs the installed binary with stdout and stderr captured to one file.
Outcome candid(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path log = testing::temp_dir("cli_log") / ("out" + std::to_string(counter++) + ".txt");
  const std::string cmd = env + " '" + std::string(CANDID_BINARY) + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  const auto bytes = read_file(log);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, std::string(bytes.begin(), bytes.end())};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, SynthIsDeterministicAndWritesMeta) {
  const auto root = testing::temp_dir("cli_synth");
  testing::write_scene_set(root / "clean", 2, 32, 32, 1, 3);
  for (const char* out : {"a", "b"}) {
    const Outcome r = candid("synth --input " + q(root / "clean") + " --out " + q(root / out) +
                         " --level lvl2 --burst-size 3 --max-shift 2 --seed 17");
    ASSERT_EQ(r.code, 0) << r.out;
  }
  for (const char* scene : {"scene_000", "scene_001"}) {
    for (const char* file : {"frame_000.png", "frame_001.png", "frame_002.png", "gt.png", "meta.json"}) {
      const auto pa = root / "a" / scene / file, pb = root / "b" / scene / file;
      ASSERT_TRUE(fs::exists(pa)) << pa;
      EXPECT_EQ(read_file(pa), read_file(pb)) << file;
    }
    EXPECT_FALSE(fs::exists(root / "a" / scene / "frame_003.png"));
    const auto bytes = read_file(root / "a" / scene / "meta.json");
    const auto meta = nlohmann::json::parse(bytes.begin(), bytes.end());
    EXPECT_NEAR(meta["sigma_r"].get<double>(), std::pow(10.0, -1.8), 1e-9);
    EXPECT_NEAR(meta["sigma_s"].get<double>(), std::pow(10.0, -2.2), 1e-9);
    ASSERT_EQ(meta["true_shifts"].size(), 3u);
    EXPECT_EQ(meta["true_shifts"][0][0].get<double>(), 0.0);
    EXPECT_EQ(meta["true_shifts"][0][1].get<double>(), 0.0);
    for (const auto& s : meta["true_shifts"]) {
      EXPECT_LE(std::abs(s[0].get<double>()), 2.0);
      EXPECT_LE(std::abs(s[1].get<double>()), 2.0);
    }
    EXPECT_TRUE(meta.contains("seed"));
  }
  const Outcome other = candid("synth --input " + q(root / "clean") + " --out " + q(root / "c") +
                           " --level lvl2 --burst-size 3 --max-shift 2 --seed 18");
  ASSERT_EQ(other.code, 0);
  EXPECT_NE(read_file(root / "a/scene_000/frame_001.png"), read_file(root / "c/scene_000/frame_001.png"));
}

class CliTrained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = testing::temp_dir("cli_trained");
    testing::write_scene_set(root_ / "train", 3, 40, 40, 1, 7);
    testing::write_scene_set(root_ / "eval", 2, 32, 32, 1, 90);
    const Outcome r = candid("train --dataset " + q(root_ / "train") + " --checkpoint " + q(root_ / "m.ckpt") +
                         " --patch-size 16 --burst-size 2 --max-shift 2 --steps 3 --probe-every 0"
                         " --kernel-hidden 6 --fusion-hidden 6 --seed 4");
    ASSERT_EQ(r.code, 0) << r.out;
  }
  static fs::path root_;
};
fs::path CliTrained::root_;

TEST_F(CliTrained, TrainWritesCheckpointAndLog) {
  EXPECT_TRUE(fs::exists(root_ / "m.ckpt"));
  EXPECT_TRUE(fs::exists(root_ / "m.ckpt.state"));
  const auto log = read_file(root_ / "m.ckpt.log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  EXPECT_EQ(infer_arch(load_checkpoint(root_ / "m.ckpt"), 2).kernel_hidden, 6);
}

TEST_F(CliTrained, DenoiseWritesOutputAndScaledErrorMap) {
  const auto dir = testing::temp_dir("cli_denoise");
  const Image gt = testing::make_scene(24, 24, 1, 5);
  Rng rng(2);
  write_burst_dir(dir / "burst", synthesize_burst(gt, 2, 2.0, NoiseParams{0.01, 0.01}, rng), 2);
  const Outcome r = candid("denoise --burst " + q(dir / "burst") + " --checkpoint " + q(root_ / "m.ckpt") +
                       " --out " + q(dir / "res" / "pred.png"));
  ASSERT_EQ(r.code, 0) << r.out;
  const Image pred = load_image(dir / "res" / "pred.png");
  const Image err = load_image(dir / "res" / "error.png");
  const Image truth = load_image(dir / "burst" / "gt.png");
  ASSERT_TRUE(err.same_dims(pred));
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double expected = std::min(1.0, 5.0 * std::abs(double{pred.data()[i]} - truth.data()[i]));
    EXPECT_NEAR(err.data()[i], expected, 5.0 / 255.0 + 1.0 / 255.0) << i;
  }
}

TEST_F(CliTrained, DenoiseWithoutGroundTruthSkipsErrorMap) {
  const auto dir = testing::temp_dir("cli_denoise");
  Rng rng(3);
  write_burst_dir(dir / "burst", synthesize_burst(testing::make_scene(24, 24, 1, 6), 2, 2.0, NoiseParams{0.01, 0.01}, rng), 3);
  fs::remove(dir / "burst" / "gt.png");
  const Outcome r = candid("denoise --burst " + q(dir / "burst") + " --checkpoint " + q(root_ / "m.ckpt") +
                       " --out " + q(dir / "pred.png"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "pred.png"));
  EXPECT_FALSE(fs::exists(dir / "error.png"));
}

TEST_F(CliTrained, DenoiseBurstSizeMismatchFails) {
  const auto dir = testing::temp_dir("cli_denoise");
  Rng rng(4);
  write_burst_dir(dir / "burst", synthesize_burst(testing::make_scene(24, 24, 1, 7), 3, 2.0, NoiseParams{0.01, 0.01}, rng), 4);
  const Outcome r = candid("denoise --burst " + q(dir / "burst") + " --checkpoint " + q(root_ / "m.ckpt") +
                       " --out " + q(dir / "pred.png"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("candid: error:"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir / "pred.png"));
}

TEST_F(CliTrained, EvalReportsAreByteIdentical) {
  const std::string base = "eval --dataset " + q(root_ / "eval") + " --checkpoint " + q(root_ / "m.ckpt") +
                           " --burst-size 2 --max-shift 2 --seed 5 --report ";
  ASSERT_EQ(candid(base + q(root_ / "r1.json")).code, 0);
  const Outcome r = candid(base + q(root_ / "r2.json"), "CANDID_THREADS=1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_file(root_ / "r1.json"), read_file(root_ / "r2.json"));
  EXPECT_NE(r.out.find("reference (published full-scale, dB)"), std::string::npos) << r.out;
  const auto bytes = read_file(root_ / "r1.json");
  const auto report = nlohmann::json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(report["images"].size(), 2u);
  EXPECT_EQ(report["seed"], 5);
  EXPECT_EQ(report["level"], "lvl1");
}

TEST(Cli, BaselineEvalNeedsNoCheckpoint) {
  const auto root = testing::temp_dir("cli_eval");
  testing::write_scene_set(root / "eval", 2, 32, 32, 1, 30);
  const Outcome r = candid("eval --dataset " + q(root / "eval") + " --model noisy_reference --report " + q(root / "r.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto bytes = read_file(root / "r.json");
  const auto report = nlohmann::json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(report["mean_psnr"], report["mean_noisy_psnr"]);
  EXPECT_EQ(candid("eval --dataset " + q(root / "eval")).code, 1);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(candid("").code, 2);
  EXPECT_EQ(candid("frobnicate").code, 2);
  EXPECT_EQ(candid("synth --out /tmp/x").code, 2);
  EXPECT_EQ(candid("eval --dataset /nonexistent_dir_for_test").code, 2);
  EXPECT_EQ(candid("train --steps many").code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const auto root = testing::temp_dir("cli_err");
  fs::create_directories(root / "empty");
  const Outcome r = candid("train --dataset " + q(root / "empty") + " --checkpoint " + q(root / "m.ckpt") + " --steps 1");
  EXPECT_EQ(r.code, 1) << r.out;
  std::ofstream(root / "bad.json") << R"({"patch_size": 32, "lerning_rate": 1})";
  const Outcome bad = candid("train --config " + q(root / "bad.json"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("lerning_rate"), std::string::npos) << bad.out;
  const Outcome threads = candid("eval --dataset " + q(root) + " --model noisy_reference", "CANDID_THREADS=zero");
  EXPECT_EQ(threads.code, 1);
  EXPECT_NE(threads.out.find("CANDID_THREADS"), std::string::npos) << threads.out;
}

TEST(Cli, HelpListsFlagsWithDefaults) {
  const Outcome top = candid("--help");
  EXPECT_EQ(top.code, 0);
  for (const char* sub : {"synth", "train", "denoise", "eval", "ablate"}) {
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    const Outcome h = candid(std::string(sub) + " --help");
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("--seed"), std::string::npos) << sub;
  }
  const Outcome train = candid("train --help");
  EXPECT_NE(train.out.find("--steps INT [5000]"), std::string::npos) << train.out;
  EXPECT_NE(train.out.find("--lr FLOAT [0.0001]"), std::string::npos);
  EXPECT_NE(train.out.find("--max-shift FLOAT [4]"), std::string::npos);
}

}  // namespace
}  // namespace candid
