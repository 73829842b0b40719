// Prints Regular vs AGLA scores of the toy world across benchmark kinds,
// masking strategies and samplers, and optionally pins the adversarial run
// into a calibration file.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "agla/calibration.hpp"
#include "agla/errors.hpp"

using namespace agla;

namespace {

void report(const toy::World& world, BenchConfig cfg) {
  const BenchResult r = run_bench(world, cfg);
  const std::string head = std::string(toy::to_string(cfg.kind)) + " " + cfg.decoder.sampler.name() +
                           " " + std::string(to_string(cfg.strategy));
  if (r.regular_pope) {
    std::printf("%-56s regular acc %.4f f1 %.4f | agla acc %.4f f1 %.4f\n", head.c_str(),
                r.regular_pope->accuracy, r.regular_pope->f1, r.agla_pope->accuracy, r.agla_pope->f1);
  } else {
    std::printf("%-56s regular c_s %.4f c_i %.4f recall %.4f | agla c_s %.4f c_i %.4f recall %.4f\n",
                head.c_str(), r.regular_chair->c_s, r.regular_chair->c_i, r.regular_chair->recall,
                r.agla_chair->c_s, r.agla_chair->c_i, r.agla_chair->recall);
  }
}

void score_bands(const toy::World& world, const BenchConfig& cfg) {
  const auto recs = toy::generate_benchmark(world, cfg.kind, cfg.n, cfg.seed);
  const double tau = world.config().toy.tau;
  double pos_min = 1e9, neg_max = -1e9, neg_min = 1e9;
  std::size_t flipped = 0, negatives = 0;
  for (const auto& rec : recs) {
    if (!rec.label) continue;
    const Matrix y = world.featurizer().featurize(toy::render_scene(rec.scene, world.featurizer()).image);
    const double s = world.lvlm().evidence(y, *rec.query).score;
    if (*rec.label) {
      pos_min = std::min(pos_min, s);
    } else {
      ++negatives;
      neg_max = std::max(neg_max, s);
      neg_min = std::min(neg_min, s);
      if (s > tau) ++flipped;
    }
  }
  std::printf("tau %.4f | negatives scoring above tau %zu/%zu (range %.4f..%.4f) | lowest positive %.4f\n",
              tau, flipped, negatives, neg_min, neg_max, pos_min);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sweep and pin the toy-world constants"};
  toy::WorldConfig wc;
  BenchConfig pinned;
  std::string write_path;
  app.add_option("--world-seed", wc.seed, "World seed");
  app.add_option("--bench-seed", pinned.seed, "Benchmark seed");
  app.add_option("--gamma", wc.toy.gamma, "Attention deficiency");
  app.add_option("--lambda", wc.toy.lambda, "Co-occurrence gain");
  app.add_option("--kappa", wc.toy.kappa, "Logit sharpness");
  app.add_option("--tau", wc.toy.tau, "Presence threshold");
  app.add_option("--n", pinned.n, "Records per benchmark");
  app.add_option("--write", write_path, "Write the pinned calibration file here");
  CLI11_PARSE(app, argc, argv);

  try {
    const toy::World world(wc);
    pinned.kind = toy::BenchmarkKind::pope_adversarial;
    pinned.strategy = MaskStrategy::pixel;
    pinned.decoder = DecoderConfig{};
    pinned.decoder.seed = pinned.seed;
    score_bands(world, pinned);

    for (auto kind : {toy::BenchmarkKind::pope_random, toy::BenchmarkKind::pope_popular,
                      toy::BenchmarkKind::pope_adversarial, toy::BenchmarkKind::caption}) {
      BenchConfig c = pinned;
      c.kind = kind;
      report(world, c);
    }
    for (auto s : {MaskStrategy::patch, MaskStrategy::soft, MaskStrategy::feature, MaskStrategy::random}) {
      BenchConfig c = pinned;
      c.strategy = s;
      report(world, c);
    }
    for (const Sampler& s : {Sampler::top_p(0.7), Sampler::top_k(50), Sampler::temperature(0.5),
                             Sampler::top_p_temperature(0.7, 0.5), Sampler::top_k_temperature(50, 0.5)}) {
      BenchConfig c = pinned;
      c.decoder.sampler = s;
      report(world, c);
    }
    BenchConfig greedy = pinned;
    greedy.decoder = greedy_defaults();
    report(world, greedy);

    if (!write_path.empty()) {
      const BenchResult r = run_bench(world, pinned);
      Calibration cal{wc, pinned, scores_json(r)};
      cal.expected["accuracy_margin"] = r.agla_pope->accuracy - r.regular_pope->accuracy;
      cal.expected["f1_margin"] = r.agla_pope->f1 - r.regular_pope->f1;
      std::ofstream os(write_path);
      if (!os) throw IoError("cannot write " + write_path);
      os << calibration_to_json(cal).dump(2) << '\n';
      std::printf("wrote %s\n", write_path.c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "calibrate: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
