#include <bit>
#include "agla/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agla/errors.hpp"
#include "agla/rng.hpp"

namespace agla::toy {

// ---------------------------------------------------------------- Lexicon

Lexicon::Lexicon(std::vector<std::string> fillers, std::vector<std::string> objects) {
  auto add = [this](const std::string& w) {
    require(!ids_.count(w), "Lexicon: duplicate word " + w);
    ids_.emplace(w, words_.size());
    words_.push_back(w);
    return words_.size() - 1;
  };
  special_.yes = add("yes");
  special_.no = add("no");
  special_.eos = add("<eos>");
  for (const auto& f : fillers) add(f);
  for (const auto& o : objects) objects_.push_back(add(o));
}

const Lexicon& Lexicon::standard() {
  static const Lexicon lex({"is", "there", "a", "describe", "the", "image"},
                           {"dog", "frisbee", "cat", "sofa", "fork", "knife", "cup", "saucer",
                            "horse", "saddle", "bat", "glove", "toothbrush", "sink", "surfboard",
                            "wave"});
  return lex;
}

const std::string& Lexicon::word(TokenId id) const {
  if (id >= words_.size()) throw InputError("unknown token id " + std::to_string(id));
  return words_[id];
}

TokenId Lexicon::id(std::string_view word) const {
  auto it = ids_.find(word);
  if (it == ids_.end()) throw InputError("word '" + std::string(word) + "' is not in the lexicon");
  return it->second;
}

bool Lexicon::is_object(TokenId id) const {
  return std::find(objects_.begin(), objects_.end(), id) != objects_.end();
}

std::size_t Lexicon::object_index(TokenId id) const {
  auto it = std::find(objects_.begin(), objects_.end(), id);
  if (it == objects_.end()) throw InputError("'" + word(id) + "' is not an object word");
  return static_cast<std::size_t>(it - objects_.begin());
}

TokenSeq Lexicon::tokenize(std::string_view text) const {
  std::istringstream is{std::string(text)};
  TokenSeq out;
  std::string w;
  while (is >> w) out.push_back(id(w));
  return out;
}

std::string Lexicon::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

TokenSeq Lexicon::presence_prompt(TokenId object) const {
  require(is_object(object), "presence_prompt: not an object token");
  return {id("is"), id("there"), id("a"), object};
}

TokenSeq Lexicon::caption_prompt() const { return {id("describe"), id("the"), id("image")}; }

// ------------------------------------------------------ CooccurrenceTable

CooccurrenceTable::CooccurrenceTable(std::vector<std::vector<std::pair<std::size_t, double>>> assoc)
    : assoc_(std::move(assoc)) {
  for (const auto& row : assoc_)
    for (const auto& [other, strength] : row) {
      require(other < assoc_.size(), "CooccurrenceTable: associated object out of range");
      require(strength >= 0.0, "CooccurrenceTable: negative strength");
    }
}

CooccurrenceTable CooccurrenceTable::pairs(std::size_t object_count) {
  std::vector<std::vector<std::pair<std::size_t, double>>> assoc(object_count);
  for (std::size_t o = 0; o + 1 < object_count; o += 2) {
    assoc[o].push_back({o + 1, 1.0});
    assoc[o + 1].push_back({o, 1.0});
  }
  return CooccurrenceTable(std::move(assoc));
}

bool CooccurrenceTable::associated(std::size_t a, std::size_t b) const {
  const auto& row = assoc_.at(a);
  return std::any_of(row.begin(), row.end(), [b](const auto& e) { return e.first == b; });
}

// ------------------------------------------------------------- Featurizer

Featurizer::Featurizer(const FeaturizerParams& params, std::size_t object_count, std::uint64_t seed)
    : params_(params) {
  const std::size_t p = params.patch_size;
  const std::size_t n = p * p;
  const std::size_t d = params.feature_dim;
  require(p >= 2 && n % 2 == 0, "Featurizer: patch size must be even and >= 2");
  require(d >= 2 && d <= n, "Featurizer: feature_dim must lie in [2, P^2]");
  require(params.pattern_base - params.pattern_amplitude >= 0.0 &&
              params.pattern_base + params.pattern_amplitude <= 1.0,
          "Featurizer: object textures must stay inside [0,1]");
  SeededRng rng(seed);

  // Orthonormal basis: the constant direction first, then d-1 random
  // directions made orthogonal to it and to each other.
  std::vector<std::vector<double>> basis;
  basis.emplace_back(n, 1.0 / std::sqrt(static_cast<double>(n)));
  while (basis.size() < d) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    for (const auto& b : basis) {
      const double proj = dot(v, b);
      for (std::size_t i = 0; i < n; ++i) v[i] -= proj * b[i];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }

  // A zero-mean texture of amplitude a has norm a·P; on average a fraction
  // (d-1)/(n-1) of its energy lands in the retained directions.
  const double captured = std::sqrt(static_cast<double>(d - 1) / static_cast<double>(n - 1));
  const double gain = 1.0 / (params.pattern_amplitude * static_cast<double>(p) * captured);
  projection_ = Matrix(d, n);
  for (std::size_t i = 0; i < n; ++i) projection_(0, i) = params.dc_weight / static_cast<double>(n);
  for (std::size_t r = 1; r < d; ++r)
    for (std::size_t i = 0; i < n; ++i) projection_(r, i) = gain * basis[r][i];

  // Textures are distinct non-constant rows of a Sylvester Hadamard matrix
  // under a shared random pixel permutation, so they are balanced and
  // mutually orthogonal.
  require((n & (n - 1)) == 0, "Featurizer: P^2 must be a power of two");
  require(object_count <= n - 1, "Featurizer: too many objects for the patch size");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);
  const std::vector<std::size_t> rows = rng.choose(n - 1, object_count);
  prototypes_ = Matrix(object_count, d);
  for (std::size_t o = 0; o < object_count; ++o) {
    const std::size_t h = rows[o] + 1;
    std::vector<double> pattern(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sign = std::popcount(h & perm[i]) % 2 == 0 ? 1.0 : -1.0;
      pattern[i] = params.pattern_base + params.pattern_amplitude * sign;
    }
    const Matrix feat = matmul(projection_, Matrix(n, 1, pattern));
    const double norm = std::sqrt(dot(feat.data(), feat.data()));
    for (std::size_t r = 0; r < d; ++r) prototypes_(o, r) = feat(r, 0) / norm;
    patterns_.push_back(std::move(pattern));
  }
}

Matrix Featurizer::featurize(const GridImage& image) const {
  require(image.patch_size() == params_.patch_size, "featurize: image patch size != featurizer");
  const std::size_t k = image.patch_count();
  const std::size_t n = params_.patch_size * params_.patch_size;
  Matrix tiles(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto t = image.tile(j);
    for (std::size_t i = 0; i < n; ++i) tiles(i, j) = t[i];
  }
  return matmul(projection_, tiles).transposed();
}

// ----------------------------------------------------------------- Scenes

std::set<std::size_t> SceneSpec::objects() const {
  std::set<std::size_t> out;
  for (const auto& pl : placements) out.insert(pl.object);
  return out;
}

RenderedScene render_scene(const SceneSpec& spec, const Featurizer& featurizer) {
  const std::size_t p = featurizer.patch_size();
  const std::size_t k = spec.grid_cols * spec.grid_rows;
  if (k == 0) throw InputError("scene: empty grid");
  const std::size_t n_objects = featurizer.prototypes().rows();
  std::vector<long> owner(k, -1);
  for (const auto& pl : spec.placements) {
    if (pl.object >= n_objects) throw InputError("scene: object index out of range");
    if (pl.patches.empty()) throw InputError("scene: placement without patches");
    for (std::size_t patch : pl.patches) {
      if (patch >= k) throw InputError("scene: patch index out of range");
      if (owner[patch] >= 0) throw InputError("scene: overlapping placements on patch " + std::to_string(patch));
      owner[patch] = static_cast<long>(pl.object);
    }
  }

  const auto& fp = featurizer.params();
  GridImage image(spec.grid_cols * p, spec.grid_rows * p, p, fp.background);
  SeededRng rng(spec.seed);
  // One noise draw per pixel in row-major order, independent of placement.
  for (std::size_t px = 0; px < image.pixel_count(); ++px) {
    const double noise = rng.uniform(-fp.noise_amplitude, fp.noise_amplitude);
    const std::size_t patch = image.patch_of_pixel(px);
    double base = fp.background;
    if (owner[patch] >= 0) {
      const std::size_t x = px % image.width() % p;
      const std::size_t y = px / image.width() % p;
      base = featurizer.pattern(static_cast<std::size_t>(owner[patch]))[y * p + x];
    }
    image.values()[px] = std::clamp(base + noise, 0.0, 1.0);
  }
  return {std::move(image), spec.objects()};
}

// ----------------------------------------------------------------- ToyLVLM

void ToyParams::validate() const {
  require(gamma >= 0.0 && gamma <= 1.0, "ToyParams: gamma must lie in [0,1]");
  require(lambda >= 0.0, "ToyParams: lambda must be >= 0");
  require(kappa > 0.0, "ToyParams: kappa must be > 0");
  require(std::isfinite(tau) && std::isfinite(tau_gen), "ToyParams: thresholds must be finite");
  require(floor_logit < 0.0 && std::isfinite(floor_logit), "ToyParams: floor must be a finite negative");
}

ToyLVLM::ToyLVLM(const Lexicon& lexicon, const CooccurrenceTable& assoc,
                 const Featurizer& featurizer, ToyParams params)
    : lexicon_(&lexicon), assoc_(&assoc), featurizer_(&featurizer), params_(params) {
  params_.validate();
  require(assoc.size() == lexicon.object_count(), "ToyLVLM: assoc table size != object count");
  require(featurizer.prototypes().rows() == lexicon.object_count(),
          "ToyLVLM: featurizer object count != lexicon");
}

namespace {

double best_patch(std::span<const double> proto, const Matrix& view) {
  double best = -INFINITY;
  for (std::size_t j = 0; j < view.rows(); ++j) best = std::max(best, dot(proto, view.row(j)));
  return best;
}

}  // namespace

ObjectEvidence ToyLVLM::evidence(const Matrix& view, std::size_t object) const {
  require(view.cols() == featurizer_->feature_dim() && view.rows() > 0,
          "ToyLVLM: view must be K x D_v");
  const auto proto = featurizer_->prototype(object);
  double sum = 0.0;
  double best = -INFINITY;
  for (std::size_t j = 0; j < view.rows(); ++j) {
    const double d = dot(proto, view.row(j));
    sum += d;
    best = std::max(best, d);
  }
  double prior = 0.0;
  for (const auto& [other, strength] : assoc_->of(object))
    prior += strength * best_patch(featurizer_->prototype(other), view);
  ObjectEvidence ev;
  ev.local = best;
  ev.global = sum / static_cast<double>(view.rows()) + params_.lambda * prior;
  ev.score = params_.gamma * ev.global + (1.0 - params_.gamma) * ev.local;
  return ev;
}

Vector ToyLVLM::next_logits(const Matrix& view, std::span<const TokenId> prompt,
                            std::span<const TokenId> prefix) const {
  const Lexicon& lex = *lexicon_;
  const SpecialTokens sp = lex.special();
  Vector logits(lex.size(), params_.floor_logit);

  const TokenSeq caption = lex.caption_prompt();
  const bool is_caption = std::equal(prompt.begin(), prompt.end(), caption.begin(), caption.end());
  const bool is_presence = prompt.size() == 4 && prompt[0] == lex.id("is") &&
                           prompt[1] == lex.id("there") && prompt[2] == lex.id("a") &&
                           lex.is_object(prompt[3]);
  if (is_presence) {
    const double score = evidence(view, lex.object_index(prompt[3])).score;
    logits[sp.yes] = params_.kappa * (score - params_.tau);
    logits[sp.no] = -logits[sp.yes];
    return logits;
  }
  if (!is_caption)
    throw InputError("prompt must be 'is there a <object>' or 'describe the image'");

  double best_remaining = -INFINITY;
  for (std::size_t o = 0; o < lex.object_count(); ++o) {
    const TokenId tok = lex.object_token(o);
    if (std::find(prefix.begin(), prefix.end(), tok) != prefix.end()) continue;
    const double score = evidence(view, o).score;
    logits[tok] = params_.kappa * (score - params_.tau_gen);
    best_remaining = std::max(best_remaining, score);
  }
  logits[sp.eos] = std::isfinite(best_remaining) ? params_.kappa * (params_.tau_gen - best_remaining) : 0.0;
  return logits;
}

// --------------------------------------------------------- Matching model

MatchingModel build_matching_model(const Lexicon& lexicon, const Featurizer& featurizer,
                                   const MatchingParams& params, std::uint64_t seed) {
  require(params.heads >= 1, "MatchingParams: heads must be >= 1");
  const std::size_t d = featurizer.feature_dim();
  const std::size_t n = lexicon.object_count();
  require(n <= d, "build_matching_model: more objects than feature dimensions");

  Matrix emb(lexicon.size(), d);
  for (std::size_t o = 0; o < n; ++o) {
    const auto proto = featurizer.prototype(o);
    std::copy(proto.begin(), proto.end(), emb.row(lexicon.object_token(o)).begin());
  }

  // Dual basis F = P (P^T P)^{-1}, so e_a^T F = unit_a. Then
  // M = F (2I - 11^T) F^T scores +1 between an object and itself and -1
  // between distinct objects.
  const Matrix protos = featurizer.prototypes();  // n x d
  const Matrix gram = matmul(protos, protos.transposed());
  const Matrix dual = solve(gram, protos).transposed();  // d x n
  Matrix contrast(n, n, -1.0);
  for (std::size_t i = 0; i < n; ++i) contrast(i, i) = 1.0;
  const double scale = params.attention_gain * std::sqrt(static_cast<double>(d));
  const Matrix core = scaled(matmul(matmul(dual, contrast), dual.transposed()), scale);

  SeededRng rng(seed);
  const double jitter = params.head_jitter / std::sqrt(static_cast<double>(d));
  std::vector<Matrix> wt, wv;
  for (std::size_t h = 0; h < params.heads; ++h) {
    Matrix t = Matrix::identity(d);
    for (double& x : t.data()) x += rng.uniform(-jitter, jitter);
    Matrix v = core;
    for (double& x : v.data()) x += scale * rng.uniform(-jitter, jitter);
    wt.push_back(std::move(t));
    wv.push_back(std::move(v));
  }

  Vector readout(d, 0.0);
  readout[0] = params.readout_gain;
  const double typical = params.readout_gain * featurizer.params().dc_weight * featurizer.params().background;
  const double bias = std::log(params.target_sim / (1.0 - params.target_sim)) - typical;
  return MatchingModel(std::move(emb), std::move(wt), std::move(wv), std::move(readout), bias);
}

// ------------------------------------------------------------------- World

namespace {

std::vector<double> popularity_weights(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  SeededRng rng(seed ^ 0x706f70756c6172ULL);
  rng.shuffle(rank);
  std::vector<double> w(n);
  for (std::size_t o = 0; o < n; ++o) w[o] = 1.0 / std::pow(1.0 + static_cast<double>(rank[o]), 0.7);
  return w;
}

}  // namespace

World::World(const WorldConfig& cfg)
    : config_(cfg),
      lexicon_(&Lexicon::standard()),
      assoc_(CooccurrenceTable::pairs(lexicon_->object_count())),
      featurizer_(cfg.featurizer, lexicon_->object_count(), cfg.seed),
      matcher_(build_matching_model(*lexicon_, featurizer_, cfg.matching, cfg.seed + 1)),
      lvlm_(*lexicon_, assoc_, featurizer_, cfg.toy),
      popularity_(popularity_weights(lexicon_->object_count(), cfg.seed)) {}

}  // namespace agla::toy
