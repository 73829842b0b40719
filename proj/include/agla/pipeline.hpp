#pragma once

// Glue between the toy world, image-prompt matching, masking and decoding,
// plus the paired Regular-vs-AGLA benchmark runner used by the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agla/benchmark.hpp"
#include "agla/decoding.hpp"
#include "agla/masking.hpp"
#include "agla/matching.hpp"
#include "agla/metrics.hpp"
#include "agla/toy_model.hpp"

namespace agla {

struct PreparedQuery {
  Matrix features;  // Y of the original image
  MatchResult match;
  AugmentedView view;
  Matrix aug_features;  // Y of the augmented view
};

/// Features the LVLM sees for an augmented view.
Matrix view_features(const AugmentedView& view, const toy::Featurizer& featurizer);

/// Match the prompt against the image, mask with ratio sim/2 and featurize
/// the result. Computed once per image-prompt pair.
PreparedQuery prepare_query(const toy::World& world, const GridImage& image,
                            std::span<const TokenId> prompt, MaskStrategy strategy,
                            std::uint64_t mask_seed);

struct BenchConfig {
  toy::BenchmarkKind kind = toy::BenchmarkKind::pope_adversarial;
  std::size_t n = 200;
  std::uint64_t seed = 0;
  DecoderConfig decoder;  // the AGLA arm; Regular uses the same sampler with no masking
  MaskStrategy strategy = MaskStrategy::pixel;
};

struct RecordOutcome {
  std::size_t id = 0;
  // presence kinds
  std::optional<bool> label;
  PresenceAnswer regular = PresenceAnswer::no;
  PresenceAnswer agla = PresenceAnswer::no;
  double sim = 0.0;
  double ratio = 0.0;
  // caption kind
  TokenSeq regular_caption;
  TokenSeq agla_caption;
};

struct BenchResult {
  BenchConfig config;
  std::vector<toy::BenchmarkRecord> records;
  std::vector<RecordOutcome> outcomes;
  std::optional<PopeScores> regular_pope, agla_pope;
  std::optional<ChairScores> regular_chair, agla_chair;
};

/// Per-record seed = config.seed ^ record id; both arms start from the same
/// sampler stream.
BenchResult run_bench(const toy::World& world, const BenchConfig& config);

/// Flat JSON object of the run's scores.
nlohmann::json scores_json(const BenchResult& result);
std::string scores_table(const BenchResult& result);
std::string answer_to_jsonl(const RecordOutcome& outcome, const toy::BenchmarkRecord& record,
                            const toy::Lexicon& lexicon);

/// Writes config.json, records.jsonl, answers.jsonl, scores.json, scores.txt.
void write_bench_outputs(const BenchResult& result, const toy::World& world,
                         const nlohmann::json& config_json, const std::filesystem::path& dir);

}  // namespace agla
