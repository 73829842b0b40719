#include "agla/benchmark.hpp"

#include <algorithm>
#include <string>

#include "agla/errors.hpp"
#include "agla/rng.hpp"

namespace agla::toy {

std::string_view to_string(BenchmarkKind k) {
  switch (k) {
    case BenchmarkKind::pope_random: return "pope-random";
    case BenchmarkKind::pope_popular: return "pope-popular";
    case BenchmarkKind::pope_adversarial: return "pope-adversarial";
    case BenchmarkKind::caption: return "caption";
  }
  throw ContractViolation("invalid BenchmarkKind");
}

BenchmarkKind parse_benchmark_kind(std::string_view name) {
  for (auto k : {BenchmarkKind::pope_random, BenchmarkKind::pope_popular,
                 BenchmarkKind::pope_adversarial, BenchmarkKind::caption})
    if (to_string(k) == name) return k;
  throw InputError("unknown benchmark kind '" + std::string(name) + "'");
}

namespace {

std::size_t weighted_pick(const std::vector<std::size_t>& candidates,
                          const std::vector<double>& weights, SeededRng& rng) {
  double total = 0.0;
  for (std::size_t c : candidates) total += weights[c];
  double u = rng.uniform() * total;
  for (std::size_t c : candidates) {
    u -= weights[c];
    if (u < 0.0) return c;
  }
  return candidates.back();
}

template <typename T>
const T& uniform_pick(const std::vector<T>& v, SeededRng& rng) {
  return v[rng.below(v.size())];
}

}  // namespace

SceneSpec sample_scene(const World& world, SeededRng& rng, const SceneGenParams& params) {
  require(params.min_objects >= 1 && params.min_objects <= params.max_objects,
          "SceneGenParams: bad object count range");
  require(params.max_object_patches >= 1, "SceneGenParams: max_object_patches must be >= 1");
  SceneSpec scene;
  scene.grid_cols = scene.grid_rows = params.grid;
  const std::size_t k = params.grid * params.grid;
  require(params.max_objects * params.max_object_patches <= k, "SceneGenParams: grid too small");

  const std::size_t n_objects =
      params.min_objects + rng.below(params.max_objects - params.min_objects + 1);
  const std::size_t vocab = world.lexicon().object_count();
  std::vector<std::size_t> free_patches(k);
  for (std::size_t j = 0; j < k; ++j) free_patches[j] = j;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < n_objects; ++i) {
    std::vector<std::size_t> candidates;
    for (std::size_t o = 0; o < vocab; ++o) {
      const bool blocked = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
        return c == o || world.assoc().associated(c, o);
      });
      if (!blocked) candidates.push_back(o);
    }
    if (candidates.empty()) break;
    const std::size_t obj = weighted_pick(candidates, world.popularity(), rng);
    chosen.push_back(obj);
    const std::size_t size = 1 + rng.below(params.max_object_patches);
    Placement pl;
    pl.object = obj;
    for (std::size_t s = 0; s < size; ++s) {
      const std::size_t pick = rng.below(free_patches.size());
      pl.patches.push_back(free_patches[pick]);
      free_patches.erase(free_patches.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(pl.patches.begin(), pl.patches.end());
    scene.placements.push_back(std::move(pl));
  }
  scene.seed = rng.next_u64();
  return scene;
}

std::vector<BenchmarkRecord> generate_benchmark(const World& world, BenchmarkKind kind,
                                                std::size_t n, std::uint64_t seed,
                                                const SceneGenParams& params) {
  require(n >= 1, "generate_benchmark: n must be >= 1");
  const Lexicon& lex = world.lexicon();
  const std::size_t vocab = lex.object_count();

  std::vector<std::size_t> by_popularity(vocab);
  for (std::size_t o = 0; o < vocab; ++o) by_popularity[o] = o;
  std::stable_sort(by_popularity.begin(), by_popularity.end(), [&](std::size_t a, std::size_t b) {
    return world.popularity()[a] > world.popularity()[b];
  });

  std::vector<BenchmarkRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SeededRng rng(seed ^ static_cast<std::uint64_t>(i));
    BenchmarkRecord rec;
    rec.id = i;
    rec.scene = sample_scene(world, rng, params);
    if (kind == BenchmarkKind::caption) {
      rec.prompt = lex.detokenize(lex.caption_prompt());
      out.push_back(std::move(rec));
      continue;
    }
    const std::set<std::size_t> present = rec.scene.objects();
    const bool yes = i % 2 == 0;
    std::size_t query = 0;
    if (yes) {
      query = uniform_pick(std::vector<std::size_t>(present.begin(), present.end()), rng);
    } else {
      std::vector<std::size_t> candidates;
      switch (kind) {
        case BenchmarkKind::pope_random:
          for (std::size_t o = 0; o < vocab; ++o)
            if (!present.count(o)) candidates.push_back(o);
          break;
        case BenchmarkKind::pope_popular:
          for (std::size_t o : by_popularity) {
            if (present.count(o)) continue;
            candidates.push_back(o);
            if (candidates.size() == 3) break;
          }
          break;
        case BenchmarkKind::pope_adversarial:
          for (std::size_t o = 0; o < vocab; ++o) {
            if (present.count(o)) continue;
            for (std::size_t p : present)
              if (world.assoc().associated(p, o)) {
                candidates.push_back(o);
                break;
              }
          }
          break;
        case BenchmarkKind::caption: break;
      }
      require(!candidates.empty(), "generate_benchmark: no negative candidate");
      query = uniform_pick(candidates, rng);
    }
    rec.label = yes;
    rec.query = query;
    rec.prompt = lex.detokenize(lex.presence_prompt(lex.object_token(query)));
    out.push_back(std::move(rec));
  }
  return out;
}

nlohmann::json scene_to_json(const SceneSpec& scene, const Lexicon& lexicon) {
  nlohmann::json placements = nlohmann::json::array();
  for (const auto& pl : scene.placements)
    placements.push_back({{"object", lexicon.word(lexicon.object_token(pl.object))},
                          {"patches", pl.patches}});
  return {{"grid", {scene.grid_cols, scene.grid_rows}},
          {"seed", scene.seed},
          {"placements", std::move(placements)}};
}

SceneSpec scene_from_json(const nlohmann::json& j, const Lexicon& lexicon) {
  try {
    SceneSpec s;
    s.grid_cols = j.at("grid").at(0).get<std::size_t>();
    s.grid_rows = j.at("grid").at(1).get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& pl : j.at("placements")) {
      Placement p;
      p.object = lexicon.object_index(lexicon.id(pl.at("object").get<std::string>()));
      p.patches = pl.at("patches").get<std::vector<std::size_t>>();
      s.placements.push_back(std::move(p));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scene: ") + e.what());
  }
}

std::string record_to_jsonl(const BenchmarkRecord& record, const Lexicon& lexicon) {
  nlohmann::json j;
  j["id"] = record.id;
  j["image"] = scene_to_json(record.scene, lexicon);
  j["prompt"] = record.prompt;
  if (record.label) {
    j["label"] = *record.label ? "yes" : "no";
  } else {
    std::vector<std::string> objects;
    for (std::size_t o : record.scene.objects()) objects.push_back(lexicon.word(lexicon.object_token(o)));
    j["objects"] = objects;
  }
  return j.dump();
}

BenchmarkRecord record_from_jsonl(std::string_view line, const Lexicon& lexicon) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("record: ") + e.what());
  }
  BenchmarkRecord rec;
  try {
    rec.id = j.at("id").get<std::size_t>();
    rec.prompt = j.at("prompt").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("record: ") + e.what());
  }
  rec.scene = scene_from_json(j.at("image"), lexicon);
  if (j.contains("label")) {
    const std::string label = j["label"].get<std::string>();
    if (label != "yes" && label != "no") throw InputError("record: label must be yes or no");
    rec.label = label == "yes";
    const TokenSeq prompt = lexicon.tokenize(rec.prompt);
    if (prompt.empty() || !lexicon.is_object(prompt.back()))
      throw InputError("record: presence prompt must end in an object word");
    rec.query = lexicon.object_index(prompt.back());
  }
  return rec;
}

}  // namespace agla::toy
