#include "agla/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "agla/calibration.hpp"
#include "agla/errors.hpp"
#include "agla/image.hpp"
#include "agla/pipeline.hpp"

namespace agla::cli {

namespace {

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-')
    throw UsageError(what + ": expected a non-negative integer, got '" + text + "'", 2);
  return v;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args, const std::optional<std::string>& env_seed) {
  CLI::App app{"Assembled global/local decoding on a synthetic vision-language testbed", "agla"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string sampler = "multinomial";
  std::string strategy = "pixel";
  std::string kind = "pope-adversarial";
  std::string seed_text;
  double gamma = 0.0;

  auto* match = app.add_subcommand("match", "Similarity, correlation map, heatmap and mask for an image-prompt pair");
  auto* mask = app.add_subcommand("mask", "Write the augmented view of an image");
  auto* decode = app.add_subcommand("decode", "Answer a presence query with Regular and AGLA decoding");
  auto* generate = app.add_subcommand("generate", "Caption an image with Regular and AGLA decoding");
  auto* bench = app.add_subcommand("bench", "Generate and score a synthetic benchmark");
  auto* render = app.add_subcommand("render", "Render a scene JSON file to a PGM image");

  auto add_world = [&](CLI::App* sub) {
    sub->add_option("--config", cfg.config, "Calibration JSON supplying world constants")
        ->check(CLI::ExistingFile);
    sub->add_option("--world-seed", cfg.world_seed, "World seed (ignored with --config)");
    sub->add_option("--gamma", gamma, "Attention deficiency in [0,1]")->check(CLI::Range(0.0, 1.0));
  };
  auto add_input = [&](CLI::App* sub) {
    auto* img = sub->add_option("--image", cfg.image, "Input image (PGM P2)");
    auto* scn = sub->add_option("--scene", cfg.scene, "Input scene (JSON)");
    img->excludes(scn);
    scn->excludes(img);
  };
  auto add_decoding = [&](CLI::App* sub) {
    sub->add_option("--alpha", cfg.decoder.alpha, "Weight of the augmented-view logits");
    sub->add_option("--beta", cfg.decoder.beta, "Plausibility cutoff in (0,1]");
    sub->add_option("--sampler", sampler, "Sampling strategy")
        ->check(CLI::IsMember({"greedy", "multinomial", "top_p", "top_k", "temp"}));
    sub->add_option("--p", cfg.decoder.sampler.p, "Top-p mass");
    sub->add_option("--k", cfg.decoder.sampler.k, "Top-k size");
    sub->add_option("--t", cfg.decoder.sampler.t, "Temperature; combined with top_p/top_k when given");
    sub->add_option("--max-len", cfg.decoder.max_len, "Maximum generated tokens");
  };
  auto add_strategy = [&](CLI::App* sub) {
    sub->add_option("--strategy", strategy, "Masking strategy")
        ->check(CLI::IsMember({"pixel", "patch", "soft", "feature", "random"}));
  };
  for (auto* sub : {match, mask, decode, generate, bench, render}) {
    sub->add_option("--seed", seed_text, "Seed (default: AGLA_SEED or 0)");
    add_world(sub);
  }
  for (auto* sub : {match, mask, decode, generate}) {
    add_input(sub);
    add_strategy(sub);
  }
  match->add_option("--prompt", cfg.prompt, "Prompt text")->required();
  mask->add_option("--prompt", cfg.prompt, "Prompt text")->required();
  decode->add_option("--prompt", cfg.prompt, "Presence prompt, e.g. \"is there a dog\"")->required();
  generate->add_option("--prompt", cfg.prompt, "Caption prompt")->default_val("describe the image");
  match->add_option("--out", cfg.out, "Output directory")->required();
  mask->add_option("--out", cfg.out, "Output directory")->required();
  decode->add_option("--out", cfg.out, "Directory for the step trace");
  generate->add_option("--out", cfg.out, "Directory for the step trace");
  add_decoding(decode);
  add_decoding(generate);
  add_decoding(bench);
  add_strategy(bench);
  bench->add_option("--kind", kind, "Benchmark kind")
      ->check(CLI::IsMember({"pope-random", "pope-popular", "pope-adversarial", "caption"}));
  bench->add_option("--n", cfg.n, "Number of records")->check(CLI::PositiveNumber);
  bench->add_option("--out", cfg.out, "Output directory")->required();
  render->add_option("--scene", cfg.scene, "Scene JSON")->required();
  render->add_option("--out", cfg.out, "Output PGM path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help(), 0);
  } catch (const CLI::CallForAllHelp&) {
    throw UsageError(app.help("", CLI::AppFormatMode::All), 0);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what(), 2);
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  if (name == "match") cfg.subcommand = Subcommand::match;
  else if (name == "mask") cfg.subcommand = Subcommand::mask;
  else if (name == "decode") cfg.subcommand = Subcommand::decode;
  else if (name == "generate") cfg.subcommand = Subcommand::generate;
  else if (name == "bench") cfg.subcommand = Subcommand::bench;
  else cfg.subcommand = Subcommand::render;

  if (cfg.subcommand != Subcommand::bench && cfg.subcommand != Subcommand::render &&
      cfg.image.empty() && cfg.scene.empty())
    throw UsageError(name + ": one of --image or --scene is required", 2);

  if (chosen->count("--gamma")) cfg.gamma = gamma;
  if (chosen->count("--seed")) cfg.seed = parse_seed(seed_text, "--seed");
  else if (env_seed) cfg.seed = parse_seed(*env_seed, "AGLA_SEED");
  cfg.decoder.seed = cfg.seed;

  cfg.strategy = parse_mask_strategy(strategy);
  cfg.kind = toy::parse_benchmark_kind(kind);
  const bool explicit_t = chosen->get_option_no_throw("--t") && chosen->count("--t") > 0;
  using K = Sampler::Kind;
  if (sampler == "greedy") cfg.decoder.sampler.kind = K::greedy;
  else if (sampler == "multinomial") cfg.decoder.sampler.kind = K::multinomial;
  else if (sampler == "top_p") cfg.decoder.sampler.kind = explicit_t ? K::top_p_temperature : K::top_p;
  else if (sampler == "top_k") cfg.decoder.sampler.kind = explicit_t ? K::top_k_temperature : K::top_k;
  else cfg.decoder.sampler.kind = K::temperature;

  try {
    cfg.decoder.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what(), 2);
  }
  return cfg;
}

namespace {

toy::WorldConfig world_config(const RunConfig& cfg) {
  toy::WorldConfig wc;
  if (!cfg.config.empty()) {
    wc = load_calibration(cfg.config).world;
  } else {
    wc.seed = cfg.world_seed;
  }
  if (cfg.gamma) wc.toy.gamma = *cfg.gamma;
  return wc;
}

GridImage load_image(const RunConfig& cfg, const toy::World& world) {
  if (!cfg.image.empty()) return read_pgm_file(cfg.image, world.featurizer().patch_size());
  std::ifstream is(cfg.scene);
  if (!is) throw IoError("cannot read " + cfg.scene);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(cfg.scene + ": " + e.what());
  }
  return toy::render_scene(toy::scene_from_json(j, world.lexicon()), world.featurizer()).image;
}

std::filesystem::path output_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out + ": " + ec.message());
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::vector<int> pixel_mask_gray(const AugmentedView& view, const GridImage& image) {
  std::vector<int> gray(image.pixel_count(), 255);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const bool masked = view.granularity == AugmentedView::Granularity::pixel
                            ? view.mask[i]
                            : view.mask[image.patch_of_pixel(i)];
    if (masked) gray[i] = 0;
  }
  return gray;
}

PreparedQuery prepare(const RunConfig& cfg, const toy::World& world, const GridImage& image,
                      const TokenSeq& prompt) {
  return prepare_query(world, image, prompt, cfg.strategy, cfg.seed);
}

void cmd_match(const RunConfig& cfg, std::ostream& out) {
  const toy::World world(world_config(cfg));
  const GridImage image = load_image(cfg, world);
  const TokenSeq prompt = world.lexicon().tokenize(cfg.prompt);
  const PreparedQuery q = prepare(cfg, world, image, prompt);
  const auto dir = output_dir(cfg.out);
  const std::string sim = fixed6(q.match.similarity.sim);
  open_out(dir / "sim.txt") << sim << '\n';
  {
    auto os = open_out(dir / "correlation.txt");
    const auto& s = q.match.correlation.scores;
    for (std::size_t r = 0; r < image.grid_rows(); ++r) {
      for (std::size_t c = 0; c < image.grid_cols(); ++c)
        os << (c ? " " : "") << format_real(s[r * image.grid_cols() + c]);
      os << '\n';
    }
  }
  {
    auto os = open_out(dir / "heatmap.pgm");
    write_pgm(os, image.grid_cols(), image.grid_rows(), heatmap_gray(q.match.correlation.scores));
  }
  {
    auto os = open_out(dir / "mask.pgm");
    write_pgm(os, image.width(), image.height(), pixel_mask_gray(q.view, image));
  }
  out << "sim " << sim << " ratio " << fixed6(q.view.spec.ratio) << " masked "
      << q.view.masked_count() << '\n';
}

void cmd_mask(const RunConfig& cfg, std::ostream& out) {
  const toy::World world(world_config(cfg));
  const GridImage image = load_image(cfg, world);
  const TokenSeq prompt = world.lexicon().tokenize(cfg.prompt);
  const PreparedQuery q = prepare(cfg, world, image, prompt);
  const auto dir = output_dir(cfg.out);
  if (q.view.image) {
    write_pgm_file(dir / "augmented.pgm", *q.view.image);
  } else {
    auto os = open_out(dir / "augmented_features.txt");
    write_matrix(os, *q.view.features);
  }
  {
    auto os = open_out(dir / "mask.pgm");
    write_pgm(os, image.width(), image.height(), pixel_mask_gray(q.view, image));
  }
  out << "strategy " << to_string(cfg.strategy) << " ratio " << fixed6(q.view.spec.ratio) << " masked "
      << q.view.masked_count() << '\n';
}

void write_trace(const std::filesystem::path& path, const std::vector<StepTrace>& steps) {
  auto os = open_out(path);
  for (std::size_t i = 0; i < steps.size(); ++i) os << trace_to_jsonl(steps[i], i) << '\n';
}

void cmd_decode(const RunConfig& cfg, std::ostream& out) {
  const toy::World world(world_config(cfg));
  const GridImage image = load_image(cfg, world);
  const TokenSeq prompt = world.lexicon().tokenize(cfg.prompt);
  const PreparedQuery q = prepare(cfg, world, image, prompt);
  DecoderConfig regular = cfg.decoder;
  regular.alpha = 0.0;
  SeededRng regular_rng(cfg.seed), agla_rng(cfg.seed);
  StepTrace regular_step, agla_step;
  const PresenceAnswer r =
      sample_presence(world.lvlm(), q.features, nullptr, prompt, regular, regular_rng, &regular_step);
  const PresenceAnswer a =
      sample_presence(world.lvlm(), q.features, &q.aug_features, prompt, cfg.decoder, agla_rng, &agla_step);
  if (!cfg.out.empty()) {
    const auto dir = output_dir(cfg.out);
    write_trace(dir / "regular_trace.jsonl", {regular_step});
    write_trace(dir / "agla_trace.jsonl", {agla_step});
  }
  out << "regular " << to_string(r) << " agla " << to_string(a) << '\n';
}

void cmd_generate(const RunConfig& cfg, std::ostream& out) {
  const toy::World world(world_config(cfg));
  const GridImage image = load_image(cfg, world);
  const TokenSeq prompt = world.lexicon().tokenize(cfg.prompt);
  const PreparedQuery q = prepare(cfg, world, image, prompt);
  DecoderConfig regular = cfg.decoder;
  regular.alpha = 0.0;
  SeededRng regular_rng(cfg.seed), agla_rng(cfg.seed);
  const Generation r = generate(world.lvlm(), q.features, nullptr, prompt, regular, regular_rng);
  const Generation a = generate(world.lvlm(), q.features, &q.aug_features, prompt, cfg.decoder, agla_rng);
  if (!cfg.out.empty()) {
    const auto dir = output_dir(cfg.out);
    write_trace(dir / "regular_trace.jsonl", r.steps);
    write_trace(dir / "agla_trace.jsonl", a.steps);
  }
  out << "regular: " << world.lexicon().detokenize(r.tokens) << '\n';
  out << "agla: " << world.lexicon().detokenize(a.tokens) << '\n';
}

void cmd_bench(const RunConfig& cfg, std::ostream& out) {
  const toy::WorldConfig wc = world_config(cfg);
  const toy::World world(wc);
  BenchConfig bc;
  bc.kind = cfg.kind;
  bc.n = cfg.n;
  bc.seed = cfg.seed;
  bc.decoder = cfg.decoder;
  bc.strategy = cfg.strategy;
  const BenchResult result = run_bench(world, bc);
  const nlohmann::json config_json = {{"world", world_config_to_json(wc)},
                                      {"benchmark", bench_config_to_json(bc)}};
  write_bench_outputs(result, world, config_json, output_dir(cfg.out));
  out << scores_table(result);
}

void cmd_render(const RunConfig& cfg, std::ostream& out) {
  const toy::World world(world_config(cfg));
  const GridImage image = load_image(cfg, world);
  write_pgm_file(cfg.out, image);
  out << "wrote " << cfg.out << " (" << image.width() << "x" << image.height() << ")\n";
}

}  // namespace

void execute(const RunConfig& cfg, std::ostream& out) {
  switch (cfg.subcommand) {
    case Subcommand::match: return cmd_match(cfg, out);
    case Subcommand::mask: return cmd_mask(cfg, out);
    case Subcommand::decode: return cmd_decode(cfg, out);
    case Subcommand::generate: return cmd_generate(cfg, out);
    case Subcommand::bench: return cmd_bench(cfg, out);
    case Subcommand::render: return cmd_render(cfg, out);
  }
}

int run(const std::vector<std::string>& args, const std::optional<std::string>& env_seed,
        std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_args(args, env_seed);
  } catch (const UsageError& e) {
    if (e.exit_code() == 0) {
      out << e.what();
      return 0;
    }
    err << "agla: usage error: " << one_line(e.what()) << '\n';
    return e.exit_code();
  }
  try {
    execute(cfg, out);
  } catch (const IoError& e) {
    err << "agla: I/O error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const InputError& e) {
    err << "agla: input error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "agla: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace agla::cli
