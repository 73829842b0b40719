#pragma once

// Deterministic synthetic vision-language testbed. Objects are P×P textures
// placed on a patch grid; a fixed linear featurizer turns patches into
// feature rows; a transparent stand-in LVLM scores objects from those rows.
// Its "attention deficiency" knob gamma blends a global view (mean evidence
// plus a co-occurrence prior) with a local view (best single patch), which is
// what makes co-occurring but absent objects look present.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agla/image.hpp"
#include "agla/logit_source.hpp"
#include "agla/matching.hpp"
#include "agla/numeric.hpp"
#include "agla/token.hpp"

namespace agla::toy {

/// Fixed vocabulary: answer words, end-of-sequence, prompt fillers, objects.
/// Objects come in co-occurring pairs (ids 2i and 2i+1 of the object list).
class Lexicon {
 public:
  static const Lexicon& standard();

  std::size_t size() const { return words_.size(); }
  const std::string& word(TokenId id) const;
  /// Throws InputError for unknown words.
  TokenId id(std::string_view word) const;
  bool contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

  SpecialTokens special() const { return special_; }
  const std::vector<TokenId>& objects() const { return objects_; }
  std::size_t object_count() const { return objects_.size(); }
  bool is_object(TokenId id) const;
  /// Position of an object token within objects(); throws for non-objects.
  std::size_t object_index(TokenId id) const;
  TokenId object_token(std::size_t index) const { return objects_.at(index); }

  /// Whitespace tokenization; unknown words are an InputError.
  TokenSeq tokenize(std::string_view text) const;
  std::string detokenize(std::span<const TokenId> tokens) const;

  TokenSeq presence_prompt(TokenId object) const;
  TokenSeq caption_prompt() const;

 private:
  explicit Lexicon(std::vector<std::string> fillers, std::vector<std::string> objects);

  std::vector<std::string> words_;
  std::map<std::string, TokenId, std::less<>> ids_;
  std::vector<TokenId> objects_;
  SpecialTokens special_;
};

/// Per-object list of (associated object index, strength).
class CooccurrenceTable {
 public:
  explicit CooccurrenceTable(std::vector<std::vector<std::pair<std::size_t, double>>> assoc);
  /// Pairs (2i, 2i+1) associated with strength 1.
  static CooccurrenceTable pairs(std::size_t object_count);

  const std::vector<std::pair<std::size_t, double>>& of(std::size_t object) const {
    return assoc_.at(object);
  }
  bool associated(std::size_t a, std::size_t b) const;
  std::size_t size() const { return assoc_.size(); }

 private:
  std::vector<std::vector<std::pair<std::size_t, double>>> assoc_;
};

struct FeaturizerParams {
  std::size_t patch_size = 8;
  std::size_t feature_dim = 64;
  double dc_weight = 0.25;       // weight of the mean-intensity feature
  double background = 0.5;       // background gray level
  double pattern_base = 0.4;     // mean gray level of object textures
  double pattern_amplitude = 0.3;
  double noise_amplitude = 0.1;  // uniform pixel noise in [-a, a]
};

/// Y_j = A · flatten(tile_j). Row 0 of A reads out dc_weight × mean
/// intensity; the remaining rows are orthonormal zero-mean directions scaled
/// so that a clean object texture maps to a feature of norm close to 1.
class Featurizer {
 public:
  Featurizer(const FeaturizerParams& params, std::size_t object_count, std::uint64_t seed);

  const FeaturizerParams& params() const { return params_; }
  std::size_t patch_size() const { return params_.patch_size; }
  std::size_t feature_dim() const { return projection_.rows(); }
  const Matrix& projection() const { return projection_; }
  const std::vector<double>& pattern(std::size_t object) const { return patterns_.at(object); }
  /// Unit-norm prototype e_o = A·pattern_o / |A·pattern_o|.
  std::span<const double> prototype(std::size_t object) const { return prototypes_.row(object); }
  /// object_count × feature_dim.
  const Matrix& prototypes() const { return prototypes_; }

  Matrix featurize(const GridImage& image) const;

 private:
  FeaturizerParams params_;
  Matrix projection_;
  std::vector<std::vector<double>> patterns_;
  Matrix prototypes_;
};

struct Placement {
  std::size_t object = 0;  // object index
  std::vector<std::size_t> patches;
};

struct SceneSpec {
  std::size_t grid_cols = 4;
  std::size_t grid_rows = 4;
  std::vector<Placement> placements;
  std::uint64_t seed = 0;

  std::set<std::size_t> objects() const;
};

struct RenderedScene {
  GridImage image;
  std::set<std::size_t> objects;
};

/// Overlapping placements or out-of-range patches are an InputError.
RenderedScene render_scene(const SceneSpec& spec, const Featurizer& featurizer);

struct ToyParams {
  double gamma = 0.8;        // attention deficiency in [0,1]
  double lambda = 0.3;       // co-occurrence gain
  double kappa = 6.0;        // logit sharpness
  double tau = 0.235;        // presence threshold
  double tau_gen = 0.235;    // caption emission threshold
  double floor_logit = -1e4;

  void validate() const;
};

struct ObjectEvidence {
  double global = 0.0;
  double local = 0.0;
  double score = 0.0;
};

class ToyLVLM final : public LogitSource {
 public:
  ToyLVLM(const Lexicon& lexicon, const CooccurrenceTable& assoc, const Featurizer& featurizer,
          ToyParams params);

  std::size_t vocab_size() const override { return lexicon_->size(); }
  SpecialTokens special_tokens() const override { return lexicon_->special(); }
  Vector next_logits(const Matrix& view, std::span<const TokenId> prompt,
                     std::span<const TokenId> prefix) const override;

  const ToyParams& params() const { return params_; }
  ObjectEvidence evidence(const Matrix& view, std::size_t object) const;

 private:
  const Lexicon* lexicon_;
  const CooccurrenceTable* assoc_;
  const Featurizer* featurizer_;
  ToyParams params_;
};

struct MatchingParams {
  std::size_t heads = 2;
  double attention_gain = 4.0;  // target |pre-softmax score| for object tokens
  double head_jitter = 0.02;
  double readout_gain = 4.0;
  double target_sim = 0.8;
};

/// Matching model tied to the featurizer: object-word embeddings are the
/// object prototypes, other words embed to zero. Each head attends to the
/// queried object's prototype and away from every other object's, with a
/// small seeded per-head perturbation. The readout looks at mean intensity.
MatchingModel build_matching_model(const Lexicon& lexicon, const Featurizer& featurizer,
                                   const MatchingParams& params, std::uint64_t seed);

/// Everything derived from one world seed.
struct WorldConfig {
  FeaturizerParams featurizer;
  MatchingParams matching;
  ToyParams toy;
  std::uint64_t seed = 0;
};

class World {
 public:
  explicit World(const WorldConfig& cfg);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const WorldConfig& config() const { return config_; }
  const Lexicon& lexicon() const { return *lexicon_; }
  const CooccurrenceTable& assoc() const { return assoc_; }
  const Featurizer& featurizer() const { return featurizer_; }
  const MatchingModel& matcher() const { return matcher_; }
  const ToyLVLM& lvlm() const { return lvlm_; }
  /// Scene-sampling weight per object index; higher is more popular.
  const std::vector<double>& popularity() const { return popularity_; }

 private:
  WorldConfig config_;
  const Lexicon* lexicon_;
  CooccurrenceTable assoc_;
  Featurizer featurizer_;
  MatchingModel matcher_;
  ToyLVLM lvlm_;
  std::vector<double> popularity_;
};

}  // namespace agla::toy
