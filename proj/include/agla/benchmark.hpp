#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agla/rng.hpp"
#include "agla/toy_model.hpp"

namespace agla::toy {

enum class BenchmarkKind { pope_random, pope_popular, pope_adversarial, caption };

std::string_view to_string(BenchmarkKind k);
/// Accepts "pope-random", "pope-popular", "pope-adversarial", "caption".
BenchmarkKind parse_benchmark_kind(std::string_view name);
inline bool is_pope(BenchmarkKind k) { return k != BenchmarkKind::caption; }

struct SceneGenParams {
  std::size_t grid = 4;
  std::size_t min_objects = 2;
  std::size_t max_objects = 3;
  std::size_t max_object_patches = 2;
};

struct BenchmarkRecord {
  std::size_t id = 0;
  SceneSpec scene;
  std::string prompt;
  std::optional<bool> label;        // presence kinds: true = "yes"
  std::optional<std::size_t> query; // presence kinds: queried object index
};

/// Random scene: objects drawn by popularity without ever placing both
/// members of an associated pair; each object gets 1..max_object_patches
/// distinct patches.
SceneSpec sample_scene(const World& world, SeededRng& rng, const SceneGenParams& params = {});

/// Record i is generated from seed ^ i. Presence kinds alternate yes/no
/// labels starting with yes. Negatives: random = any absent object;
/// popular = one of the three most popular absent objects; adversarial = an
/// absent object associated with a present one.
std::vector<BenchmarkRecord> generate_benchmark(const World& world, BenchmarkKind kind,
                                                std::size_t n, std::uint64_t seed,
                                                const SceneGenParams& params = {});

nlohmann::json scene_to_json(const SceneSpec& scene, const Lexicon& lexicon);
SceneSpec scene_from_json(const nlohmann::json& j, const Lexicon& lexicon);

/// {"id":…, "image":{inline scene}, "prompt":"…", "label":"yes|no"} or with
/// "objects":[…] for caption records.
std::string record_to_jsonl(const BenchmarkRecord& record, const Lexicon& lexicon);
BenchmarkRecord record_from_jsonl(std::string_view line, const Lexicon& lexicon);

}  // namespace agla::toy
