#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "agla/benchmark.hpp"
#include "agla/calibration.hpp"
#include "agla/cli.hpp"
#include "agla/pipeline.hpp"

using namespace agla;
using namespace agla::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("agla_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Scene with a dog on patches 1-2 and a cup on patch 13.
  std::string write_scene() const {
    const toy::Lexicon& lex = toy::Lexicon::standard();
    toy::SceneSpec s;
    s.placements = {{0, {1, 2}}, {6, {13}}};
    s.seed = 5;
    std::ofstream(path("scene.json")) << toy::scene_to_json(s, lex).dump();
    return path("scene.json");
  }

  int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
              std::string* err_text = nullptr) const {
    std::ostringstream out, err;
    const int code = run(args, std::nullopt, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
  }

  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_F(CliTest, DecodeDefaultsAndExplicitHyperParameters) {
  const std::string scene = write_scene();
  const RunConfig d = parse_args({"decode", "--scene", scene, "--prompt", "is there a dog"});
  EXPECT_EQ(d.subcommand, Subcommand::decode);
  EXPECT_EQ(d.decoder.alpha, 2.0);
  EXPECT_EQ(d.decoder.beta, 0.5);
  const RunConfig e =
      parse_args({"decode", "--alpha", "1", "--beta", "0.1", "--scene", scene, "--prompt", "is there a dog"});
  EXPECT_EQ(e.decoder.alpha, 1.0);
  EXPECT_EQ(e.decoder.beta, 0.1);
}

TEST_F(CliTest, StrategyFlag) {
  const RunConfig c =
      parse_args({"mask", "--scene", write_scene(), "--prompt", "is there a dog", "--out", path("o"), "--strategy", "soft"});
  EXPECT_EQ(c.strategy, MaskStrategy::soft);
  EXPECT_THROW(parse_args({"mask", "--scene", write_scene(), "--prompt", "x", "--out", "o", "--strategy", "blur"}),
               UsageError);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_THROW(parse_args({"match", "--prompt", "is there a dog", "--out", path("o")}), UsageError);
  EXPECT_THROW(parse_args({"decode", "--scene", write_scene(), "--prompt", "is there a dog", "--bogus"}), UsageError);
  EXPECT_THROW(parse_args({"decode", "--scene", write_scene(), "--prompt", "p", "--alpha", "abc"}), UsageError);
  EXPECT_THROW(parse_args({"decode", "--scene", write_scene(), "--prompt", "p", "--beta", "0"}), UsageError);
  EXPECT_THROW(parse_args({"bench", "--out", path("o"), "--n", "0"}), UsageError);
  EXPECT_THROW(parse_args({"bench", "--out", path("o"), "--gamma", "1.5"}), UsageError);
  EXPECT_THROW(parse_args({"frobnicate"}), UsageError);
  EXPECT_THROW(parse_args({}), UsageError);
  try {
    parse_args({"bench", "--out", path("o"), "--kind", "pope"});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(e.exit_code(), 0);
  }
}

TEST_F(CliTest, HelpExitsZero) {
  std::string out;
  EXPECT_EQ(run_cli({"--help"}, &out), 0);
  EXPECT_NE(out.find("bench"), std::string::npos);
}

TEST_F(CliTest, SeedFromEnvironment) {
  EXPECT_EQ(parse_args({"bench", "--out", path("o")}, std::string("42")).seed, 42u);
  EXPECT_EQ(parse_args({"bench", "--out", path("o"), "--seed", "7"}, std::string("42")).seed, 7u);
  EXPECT_EQ(parse_args({"bench", "--out", path("o")}).seed, 0u);
  EXPECT_THROW(parse_args({"bench", "--out", path("o")}, std::string("seven")), UsageError);
}

TEST_F(CliTest, SamplerSelection) {
  auto sampler_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"bench", "--out", path("o")};
    args.insert(args.end(), extra.begin(), extra.end());
    return parse_args(args).decoder.sampler;
  };
  EXPECT_EQ(sampler_of({}).kind, Sampler::Kind::multinomial);
  EXPECT_EQ(sampler_of({"--sampler", "greedy"}).kind, Sampler::Kind::greedy);
  EXPECT_EQ(sampler_of({"--sampler", "top_p", "--p", "0.9"}).p, 0.9);
  EXPECT_EQ(sampler_of({"--sampler", "top_p"}).kind, Sampler::Kind::top_p);
  EXPECT_EQ(sampler_of({"--sampler", "top_p", "--t", "0.5"}).kind, Sampler::Kind::top_p_temperature);
  EXPECT_EQ(sampler_of({"--sampler", "top_k", "--t", "0.5"}).kind, Sampler::Kind::top_k_temperature);
  EXPECT_EQ(sampler_of({"--sampler", "temp", "--t", "0.25"}).t, 0.25);
  EXPECT_THROW(sampler_of({"--sampler", "beam"}), UsageError);
  EXPECT_THROW(sampler_of({"--sampler", "top_k", "--k", "0"}), UsageError);
}

TEST_F(CliTest, MatchWritesOutputsWithGridHeatmap) {
  const std::string scene = write_scene();
  std::string text;
  ASSERT_EQ(run_cli({"match", "--scene", scene, "--prompt", "is there a dog", "--out", path("m")}, &text), 0);
  for (const char* f : {"sim.txt", "correlation.txt", "heatmap.pgm", "mask.pgm"}) EXPECT_TRUE(fs::exists(path("m/") + f));
  std::ifstream heat(path("m/heatmap.pgm"));
  const GridImage h = read_pgm(heat, 1);
  EXPECT_EQ(h.width(), 4u);
  EXPECT_EQ(h.height(), 4u);
  std::ifstream mask(path("m/mask.pgm"));
  EXPECT_EQ(read_pgm(mask, 8).width(), 32u);

  const toy::World world(toy::WorldConfig{});
  const nlohmann::json sj = nlohmann::json::parse(slurp(scene));
  const GridImage img = toy::render_scene(toy::scene_from_json(sj, world.lexicon()), world.featurizer()).image;
  const MatchResult m = match(world.matcher(), world.lexicon().tokenize("is there a dog"), world.featurizer().featurize(img));
  char expected[32];
  std::snprintf(expected, sizeof expected, "%.6f\n", m.similarity.sim);
  EXPECT_EQ(slurp(path("m/sim.txt")), expected);
  EXPECT_EQ(text.rfind("sim " + std::string(expected, 8), 0), 0u);
}

TEST_F(CliTest, MatchRerunIsByteIdentical) {
  const std::string scene = write_scene();
  for (const char* d : {"a", "b"})
    ASSERT_EQ(run_cli({"match", "--scene", scene, "--prompt", "is there a cup", "--out", path(d), "--seed", "3"}), 0);
  for (const char* f : {"sim.txt", "correlation.txt", "heatmap.pgm", "mask.pgm"})
    EXPECT_EQ(slurp(path("a/") + f), slurp(path("b/") + f)) << f;
}

TEST_F(CliTest, ImageInputMatchesSceneInput) {
  const std::string scene = write_scene();
  ASSERT_EQ(run_cli({"render", "--scene", scene, "--out", path("scene.pgm")}), 0);
  ASSERT_EQ(run_cli({"match", "--scene", scene, "--prompt", "is there a dog", "--out", path("s")}), 0);
  ASSERT_EQ(run_cli({"match", "--image", path("scene.pgm"), "--prompt", "is there a dog", "--out", path("i")}), 0);
  // PGM quantizes to 8 bits, so only the printed similarity is compared.
  EXPECT_EQ(slurp(path("s/sim.txt")).substr(0, 5), slurp(path("i/sim.txt")).substr(0, 5));
}

TEST_F(CliTest, MaskStrategiesWriteTheirView) {
  const std::string scene = write_scene();
  ASSERT_EQ(run_cli({"mask", "--scene", scene, "--prompt", "is there a dog", "--out", path("p")}), 0);
  EXPECT_TRUE(fs::exists(path("p/augmented.pgm")));
  ASSERT_EQ(run_cli({"mask", "--scene", scene, "--prompt", "is there a dog", "--out", path("f"), "--strategy", "feature"}), 0);
  EXPECT_TRUE(fs::exists(path("f/augmented_features.txt")));
  EXPECT_TRUE(fs::exists(path("f/mask.pgm")));
}

TEST_F(CliTest, DecodeAndGenerateWriteTraces) {
  const std::string scene = write_scene();
  std::string text;
  ASSERT_EQ(run_cli({"decode", "--scene", scene, "--prompt", "is there a frisbee", "--out", path("d")}, &text), 0);
  EXPECT_EQ(text.rfind("regular ", 0), 0u);
  EXPECT_NE(text.find(" agla "), std::string::npos);
  EXPECT_TRUE(fs::exists(path("d/agla_trace.jsonl")));
  ASSERT_EQ(run_cli({"generate", "--scene", scene, "--sampler", "greedy", "--out", path("g")}, &text), 0);
  EXPECT_NE(text.find("regular: "), std::string::npos);
  EXPECT_NE(text.find("agla: "), std::string::npos);
  std::ifstream trace(path("g/agla_trace.jsonl"));
  std::string line;
  ASSERT_TRUE(std::getline(trace, line));
  EXPECT_TRUE(nlohmann::json::parse(line).contains("kept"));
}

TEST_F(CliTest, FailuresExitNonzeroWithOneLine) {
  std::string err;
  EXPECT_EQ(run_cli({"match", "--image", path("missing.pgm"), "--prompt", "is there a dog", "--out", path("x")}, nullptr, &err), 1);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  std::ofstream(path("bad.pgm")) << "P5 garbage";
  EXPECT_EQ(run_cli({"match", "--image", path("bad.pgm"), "--prompt", "is there a dog", "--out", path("x")}, nullptr, &err), 1);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  EXPECT_EQ(run_cli({"decode", "--scene", write_scene(), "--prompt", "is there a zebra"}, nullptr, &err), 1);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
}

TEST_F(CliTest, BenchOutputsAndDeterminism) {
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(run_cli({"bench", "--kind", "pope-random", "--n", "10", "--out", path("a")}), 0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 1.0);
  for (const char* f : {"config.json", "records.jsonl", "answers.jsonl", "scores.json", "scores.txt"})
    EXPECT_TRUE(fs::exists(path("a/") + f)) << f;
  ASSERT_EQ(run_cli({"bench", "--kind", "pope-random", "--n", "10", "--out", path("b")}), 0);
  EXPECT_EQ(slurp(path("a/scores.json")), slurp(path("b/scores.json")));
  EXPECT_EQ(slurp(path("a/answers.jsonl")), slurp(path("b/answers.jsonl")));
  const auto scores = nlohmann::json::parse(slurp(path("a/scores.json")));
  for (const char* k : {"regular_accuracy", "regular_f1", "agla_accuracy", "agla_precision", "agla_recall"})
    EXPECT_TRUE(scores.contains(k)) << k;
}

TEST_F(CliTest, CaptionBenchSchema) {
  ASSERT_EQ(run_cli({"bench", "--kind", "caption", "--n", "6", "--out", path("c")}), 0);
  const auto scores = nlohmann::json::parse(slurp(path("c/scores.json")));
  for (const char* k : {"regular_c_s", "regular_c_i", "regular_recall", "agla_c_s", "agla_c_i", "agla_recall"})
    EXPECT_TRUE(scores.contains(k)) << k;
  std::ifstream answers(path("c/answers.jsonl"));
  std::string line;
  ASSERT_TRUE(std::getline(answers, line));
  const auto a = nlohmann::json::parse(line);
  EXPECT_TRUE(a.contains("objects"));
  EXPECT_TRUE(a["agla"].is_string());
}

TEST_F(CliTest, CalibrationRoundTrip) {
  Calibration c;
  c.world.seed = 9;
  c.world.toy.gamma = 0.4;
  c.world.featurizer.noise_amplitude = 0.05;
  c.bench.kind = toy::BenchmarkKind::caption;
  c.bench.n = 17;
  c.bench.strategy = MaskStrategy::soft;
  c.bench.decoder.sampler = Sampler::top_k_temperature(20, 0.3);
  c.expected = {{"agla_f1", 0.5}};
  const auto j = calibration_to_json(c);
  const Calibration back = calibration_from_json(j);
  EXPECT_EQ(calibration_to_json(back), j);
  EXPECT_EQ(back.world.toy.gamma, 0.4);
  EXPECT_EQ(back.bench.decoder.sampler.kind, Sampler::Kind::top_k_temperature);
  EXPECT_EQ(back.bench.n, 17u);
}

TEST_F(CliTest, ConfigFileDrivesWorld) {
  Calibration c;
  c.world.toy.gamma = 0.0;
  std::ofstream(path("cal.json")) << calibration_to_json(c).dump();
  const RunConfig rc = parse_args({"bench", "--config", path("cal.json"), "--out", path("o")});
  EXPECT_EQ(rc.config, path("cal.json"));
  EXPECT_THROW(parse_args({"bench", "--config", path("nope.json"), "--out", path("o")}), UsageError);
}
