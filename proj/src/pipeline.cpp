#include "agla/pipeline.hpp"

#include <fstream>

#include "agla/errors.hpp"

namespace agla {

Matrix view_features(const AugmentedView& view, const toy::Featurizer& featurizer) {
  if (view.features) return *view.features;
  require(view.image.has_value(), "view_features: augmented view has neither image nor features");
  return featurizer.featurize(*view.image);
}

PreparedQuery prepare_query(const toy::World& world, const GridImage& image,
                            std::span<const TokenId> prompt, MaskStrategy strategy,
                            std::uint64_t mask_seed) {
  PreparedQuery q;
  q.features = world.featurizer().featurize(image);
  q.match = match(world.matcher(), prompt, q.features);
  MaskSpec spec;
  spec.strategy = strategy;
  spec.ratio = adaptive_ratio(q.match.similarity.sim);
  spec.seed = mask_seed;
  q.view = apply_mask(image, q.match.correlation, spec, q.features, q.match.similarity.sim);
  q.aug_features = view_features(q.view, world.featurizer());
  return q;
}

namespace {

constexpr std::uint64_t kMaskSeedSalt = 0x6d61736b5f736565ULL;

}  // namespace

BenchResult run_bench(const toy::World& world, const BenchConfig& config) {
  config.decoder.validate();
  BenchResult result;
  result.config = config;
  result.records = toy::generate_benchmark(world, config.kind, config.n, config.seed);

  const toy::Lexicon& lex = world.lexicon();
  DecoderConfig regular_cfg = config.decoder;
  regular_cfg.alpha = 0.0;

  ConfusionCounts regular_counts, agla_counts;
  std::vector<ChairInput> regular_chair, agla_chair;
  std::set<TokenId> object_vocab(lex.objects().begin(), lex.objects().end());

  for (const auto& rec : result.records) {
    const std::uint64_t record_seed = config.seed ^ static_cast<std::uint64_t>(rec.id);
    const GridImage image = toy::render_scene(rec.scene, world.featurizer()).image;
    const TokenSeq prompt = lex.tokenize(rec.prompt);
    const PreparedQuery q =
        prepare_query(world, image, prompt, config.strategy, record_seed ^ kMaskSeedSalt);

    RecordOutcome out;
    out.id = rec.id;
    out.sim = q.match.similarity.sim;
    out.ratio = q.view.spec.ratio;
    SeededRng regular_rng(record_seed);
    SeededRng agla_rng(record_seed);
    if (rec.label) {
      out.label = rec.label;
      out.regular = sample_presence(world.lvlm(), q.features, nullptr, prompt, regular_cfg, regular_rng);
      out.agla = sample_presence(world.lvlm(), q.features, &q.aug_features, prompt, config.decoder, agla_rng);
      regular_counts.add(*rec.label, out.regular == PresenceAnswer::yes);
      agla_counts.add(*rec.label, out.agla == PresenceAnswer::yes);
    } else {
      out.regular_caption = generate(world.lvlm(), q.features, nullptr, prompt, regular_cfg, regular_rng).tokens;
      out.agla_caption =
          generate(world.lvlm(), q.features, &q.aug_features, prompt, config.decoder, agla_rng).tokens;
      std::set<TokenId> truth;
      for (std::size_t o : rec.scene.objects()) truth.insert(lex.object_token(o));
      regular_chair.push_back({extract_objects(out.regular_caption, object_vocab).mentions, truth});
      agla_chair.push_back({extract_objects(out.agla_caption, object_vocab).mentions, truth});
    }
    result.outcomes.push_back(std::move(out));
  }

  if (toy::is_pope(config.kind)) {
    result.regular_pope = pope_scores(regular_counts);
    result.agla_pope = pope_scores(agla_counts);
  } else {
    result.regular_chair = chair_scores(regular_chair);
    result.agla_chair = chair_scores(agla_chair);
  }
  return result;
}

nlohmann::json scores_json(const BenchResult& r) {
  nlohmann::json j;
  j["kind"] = std::string(toy::to_string(r.config.kind));
  j["n"] = r.config.n;
  j["strategy"] = std::string(to_string(r.config.strategy));
  j["sampler"] = r.config.decoder.sampler.name();
  j["alpha"] = r.config.decoder.alpha;
  j["beta"] = r.config.decoder.beta;
  auto pope = [&j](const std::string& arm, const PopeScores& s) {
    j[arm + "_accuracy"] = s.accuracy;
    j[arm + "_precision"] = s.precision;
    j[arm + "_recall"] = s.recall;
    j[arm + "_f1"] = s.f1;
  };
  auto chair = [&j](const std::string& arm, const ChairScores& s) {
    j[arm + "_c_s"] = s.c_s;
    j[arm + "_c_i"] = s.c_i;
    j[arm + "_recall"] = s.recall;
  };
  if (r.regular_pope) pope("regular", *r.regular_pope);
  if (r.agla_pope) pope("agla", *r.agla_pope);
  if (r.regular_chair) chair("regular", *r.regular_chair);
  if (r.agla_chair) chair("agla", *r.agla_chair);
  return j;
}

std::string scores_table(const BenchResult& r) {
  std::vector<MetricRow> rows;
  auto pope = [](const PopeScores& s) {
    return std::vector<std::pair<std::string, double>>{
        {"accuracy", s.accuracy}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  auto chair = [](const ChairScores& s) {
    return std::vector<std::pair<std::string, double>>{
        {"c_s", s.c_s}, {"c_i", s.c_i}, {"recall", s.recall}};
  };
  if (r.regular_pope) rows.emplace_back("regular", pope(*r.regular_pope));
  if (r.agla_pope) rows.emplace_back("agla", pope(*r.agla_pope));
  if (r.regular_chair) rows.emplace_back("regular", chair(*r.regular_chair));
  if (r.agla_chair) rows.emplace_back("agla", chair(*r.agla_chair));
  return format_table(rows);
}

std::string answer_to_jsonl(const RecordOutcome& o, const toy::BenchmarkRecord& record,
                            const toy::Lexicon& lexicon) {
  nlohmann::json j;
  j["id"] = o.id;
  j["sim"] = std::strtod(format_real(o.sim, 12).c_str(), nullptr);
  j["ratio"] = std::strtod(format_real(o.ratio, 12).c_str(), nullptr);
  if (o.label) {
    j["prompt"] = record.prompt;
    j["label"] = *o.label ? "yes" : "no";
    j["regular"] = std::string(to_string(o.regular));
    j["agla"] = std::string(to_string(o.agla));
  } else {
    std::vector<std::string> truth;
    for (std::size_t obj : record.scene.objects()) truth.push_back(lexicon.word(lexicon.object_token(obj)));
    j["objects"] = truth;
    j["regular"] = lexicon.detokenize(o.regular_caption);
    j["agla"] = lexicon.detokenize(o.agla_caption);
  }
  return j.dump();
}

void write_bench_outputs(const BenchResult& result, const toy::World& world,
                         const nlohmann::json& config_json, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&dir](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw IoError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("config.json");
    os << config_json.dump(2) << '\n';
  }
  {
    auto os = open("records.jsonl");
    for (const auto& rec : result.records) os << toy::record_to_jsonl(rec, world.lexicon()) << '\n';
  }
  {
    auto os = open("answers.jsonl");
    for (std::size_t i = 0; i < result.outcomes.size(); ++i)
      os << answer_to_jsonl(result.outcomes[i], result.records[i], world.lexicon()) << '\n';
  }
  {
    auto os = open("scores.json");
    os << scores_json(result).dump(2) << '\n';
  }
  {
    auto os = open("scores.txt");
    os << scores_table(result);
  }
}

}  // namespace agla
