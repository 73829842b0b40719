#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <json.hpp>

#include "agla/decoding.hpp"
#include "agla/errors.hpp"
#include "agla/pipeline.hpp"
#include "oracles.hpp"

using namespace agla;

namespace {

// Vocabulary {yes=0, no=1, eos=2, a=3, b=4}; a view is a matrix whose row
// (prefix length mod rows) is returned as the logits.
class TableSource final : public LogitSource {
 public:
  std::size_t vocab_size() const override { return 5; }
  SpecialTokens special_tokens() const override { return {0, 1, 2}; }
  Vector next_logits(const Matrix& view, std::span<const TokenId>,
                     std::span<const TokenId> prefix) const override {
    const auto r = view.row(prefix.size() % view.rows());
    return Vector(r.begin(), r.end());
  }
};

Vector logits_of(const Vector& p) {
  Vector l;
  for (double x : p) l.push_back(std::log(x));
  return l;
}

double sum(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(FuseLogits, WorkedExample) {
  const Vector f = fuse_logits(Vector{1, 0, 0}, Vector{0, 1, 0}, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(f[0], e / (2 * e + 1), 1e-15);
  EXPECT_NEAR(f[0], 0.4223, 5e-5);
  EXPECT_NEAR(f[1], 0.4223, 5e-5);
  EXPECT_NEAR(f[2], 0.1554, 5e-5);
}

TEST(FuseLogits, ZeroAlphaIsPlainSoftmax) {
  const Vector o{0.3, -2.0, 1.5, 0.0};
  EXPECT_EQ(fuse_logits(o, Vector{9, 9, -9, 4}, 0.0), softmax(o));
}

TEST(FuseLogits, EqualViewsHalveTemperature) {
  const Vector o{0.3, -2.0, 1.5, 0.0};
  Vector doubled;
  for (double x : o) doubled.push_back(2 * x);
  EXPECT_LE(max_abs_diff(fuse_logits(o, o, 1.0), softmax(doubled)), 1e-15);
}

TEST(FuseLogits, LengthMismatchIsContractViolation) {
  EXPECT_THROW(fuse_logits(Vector{1, 2}, Vector{1}, 1.0), ContractViolation);
}

TEST(KeepSet, WorkedThresholds) {
  const Vector o = logits_of({0.7, 0.2, 0.1});
  EXPECT_EQ(plausibility_keep_set(o, 0.5), (std::vector<std::size_t>{0}));
  EXPECT_EQ(plausibility_keep_set(o, 0.1), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(KeepSet, BetaOneKeepsArgmaxTies) {
  EXPECT_EQ(plausibility_keep_set(Vector{2, 2, 0, 1}, 1.0), (std::vector<std::size_t>{0, 1}));
  SeededRng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector o = oracle::random_vector(10, rng, 5.0);
    EXPECT_EQ(plausibility_keep_set(o, 1.0), argmax_ties(o));
  }
}

TEST(KeepSet, BetaOutOfRangeIsContractViolation) {
  EXPECT_THROW(plausibility_keep_set(Vector{1, 2}, 0.0), ContractViolation);
  EXPECT_THROW(plausibility_keep_set(Vector{1, 2}, 1.5), ContractViolation);
}

TEST(AglaDistribution, BetaOneIsOneHot) {
  const Vector d = agla_distribution(Vector{0.1, 2.0, -1.0}, Vector{5, -5, 9}, 3.0, 1.0);
  EXPECT_EQ(d, (Vector{0, 1, 0}));
}

TEST(AglaDistribution, LooseBetaKeepsEverything) {
  const Vector d = agla_distribution(Vector{1, 0, 0}, Vector{0, 1, 0}, 1.0, 0.1);
  EXPECT_LE(max_abs_diff(d, fuse_logits(Vector{1, 0, 0}, Vector{0, 1, 0}, 1.0)), 1e-15);
}

TEST(AglaDistribution, MatchesBruteForceOracle) {
  SeededRng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const Vector o = oracle::random_vector(n, rng, 6.0);
    const Vector a = oracle::random_vector(n, rng, 6.0);
    const double alpha = rng.uniform(0.0, 4.0);
    const double beta = rng.uniform(0.01, 1.0);
    EXPECT_LE(max_abs_diff(agla_distribution(o, a, alpha, beta), oracle::agla_brute_force(o, a, alpha, beta)),
              1e-12);
  }
}

TEST(AglaDistribution, NormalizedAndSupportedOnKeepSet) {
  SeededRng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const Vector o = oracle::random_vector(n, rng, 8.0);
    const Vector a = oracle::random_vector(n, rng, 8.0);
    const double beta = rng.uniform(0.01, 1.0);
    const Vector d = agla_distribution(o, a, rng.uniform(0.0, 5.0), beta);
    EXPECT_NEAR(sum(d), 1.0, 1e-12);
    const auto keep = plausibility_keep_set(o, beta);
    for (std::size_t i = 0; i < n; ++i)
      if (!std::binary_search(keep.begin(), keep.end(), i)) EXPECT_EQ(d[i], 0.0);
  }
}

TEST(AglaDistribution, ZeroAlphaIsRestrictedSoftmax) {
  SeededRng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector o = oracle::random_vector(12, rng, 4.0);
    const double beta = rng.uniform(0.01, 1.0);
    const Vector p = softmax(o);
    const auto keep = plausibility_keep_set(o, beta);
    double mass = 0.0;
    for (std::size_t i : keep) mass += p[i];
    Vector expected(12, 0.0);
    for (std::size_t i : keep) expected[i] = p[i] / mass;
    EXPECT_LE(max_abs_diff(agla_distribution(o, oracle::random_vector(12, rng, 4.0), 0.0, beta), expected),
              1e-12);
  }
}

TEST(AglaDistribution, ShiftInvariance) {
  SeededRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Vector o = oracle::random_vector(16, rng, 4.0);
    Vector a = oracle::random_vector(16, rng, 4.0);
    const double alpha = rng.uniform(0.0, 3.0), beta = rng.uniform(0.01, 1.0);
    const Vector before = agla_distribution(o, a, alpha, beta);
    const double c1 = rng.uniform(-50, 50), c2 = rng.uniform(-50, 50);
    for (double& x : o) x += c1;
    for (double& x : a) x += c2;
    EXPECT_LE(max_abs_diff(before, agla_distribution(o, a, alpha, beta)), 1e-12);
  }
}

TEST(AglaDistribution, StrongAugmentedPreferenceWinsForLargeAlpha) {
  SeededRng rng(6);
  int instances = 0;
  while (instances < 50) {
    const Vector o = oracle::random_vector(8, rng, 2.0);
    const Vector a = oracle::random_vector(8, rng, 2.0);
    const auto ao = argmax_ties(o), aa = argmax_ties(a);
    if (aa.size() != 1 || aa == ao) continue;
    ++instances;
    // beta small enough that both argmaxes survive truncation
    const Vector p = softmax(o);
    const double beta = std::min(1.0, 0.5 * p[aa[0]] / p[ao[0]]);
    double alpha_star = 1.0 / 64;
    while (argmax_ties(agla_distribution(o, a, alpha_star, beta)) != aa) alpha_star *= 2;
    for (double alpha : {alpha_star, 2 * alpha_star, 10 * alpha_star, 100 * alpha_star})
      EXPECT_EQ(argmax_ties(agla_distribution(o, a, alpha, beta)), aa);
  }
}

TEST(AglaDistribution, ConfigOverloadUsesAlphaAndBeta) {
  DecoderConfig cfg;
  cfg.alpha = 1.5;
  cfg.beta = 0.3;
  const Vector o{1, 0.5, -1}, a{0, 2, 1};
  EXPECT_EQ(agla_distribution(o, a, cfg), agla_distribution(o, a, 1.5, 0.3));
}

TEST(Sampler, GreedyPicksLowestIndexArgmax) {
  SeededRng rng(1);
  EXPECT_EQ(sample(Vector{0.4, 0.2, 0.4}, Sampler::greedy(), rng), 0u);
  SeededRng untouched(1);
  EXPECT_EQ(rng.next_u64(), untouched.next_u64());
}

TEST(Sampler, TopKOneMatchesGreedy) {
  SeededRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector d = softmax(oracle::random_vector(9, rng, 3.0));
    SeededRng r1(trial), r2(trial);
    EXPECT_EQ(sample(d, Sampler::top_k(1), r1), sample(d, Sampler::greedy(), r2));
  }
}

TEST(Sampler, TopPOneKeepsFullSupport) {
  const Vector d{0.5, 0.25, 0.125, 0.125};
  EXPECT_EQ(sampler_distribution(d, Sampler::top_p(1.0)), d);
}

TEST(Sampler, TopPKeepsSmallestSufficientPrefix) {
  const Vector d{0.1, 0.5, 0.3, 0.1};
  EXPECT_LE(max_abs_diff(sampler_distribution(d, Sampler::top_p(0.7)), Vector{0, 0.625, 0.375, 0}), 1e-15);
  EXPECT_LE(max_abs_diff(sampler_distribution(d, Sampler::top_p(0.8)), Vector{0, 0.625, 0.375, 0}), 1e-15);
  EXPECT_LE(max_abs_diff(sampler_distribution(d, Sampler::top_p(0.5)), Vector{0, 1, 0, 0}), 1e-15);
}

TEST(Sampler, TopKRestrictsAndRenormalizes) {
  const Vector d{0.1, 0.5, 0.3, 0.1};
  EXPECT_LE(max_abs_diff(sampler_distribution(d, Sampler::top_k(2)), Vector{0, 0.625, 0.375, 0}), 1e-15);
  EXPECT_EQ(sampler_distribution(d, Sampler::top_k(50)), d);
}

TEST(Sampler, TemperatureResharpensOverSupport) {
  const Vector d{0.2, 0.0, 0.8};
  const Vector q = sampler_distribution(d, Sampler::temperature(0.5));
  EXPECT_NEAR(q[0], 0.04 / 0.68, 1e-15);
  EXPECT_EQ(q[1], 0.0);
  EXPECT_NEAR(q[2], 0.64 / 0.68, 1e-15);
}

TEST(Sampler, ComposedFiltersThenApplyTemperature) {
  const Vector d{0.1, 0.5, 0.3, 0.1};
  const Vector q = sampler_distribution(d, Sampler::top_k_temperature(2, 0.5));
  EXPECT_NEAR(q[1], 25.0 / 34.0, 1e-15);
  EXPECT_NEAR(q[2], 9.0 / 34.0, 1e-15);
  EXPECT_EQ(sampler_distribution(d, Sampler::top_p_temperature(0.7, 0.5)), q);
}

TEST(Sampler, MultinomialFrequencyConcentrates) {
  SeededRng rng(2024);
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample(Vector{0.5, 0.5}, Sampler::multinomial(), rng) == 0;
  EXPECT_GE(zeros, 49400);
  EXPECT_LE(zeros, 50600);
}

TEST(Sampler, NonGreedySamplersConsumeOneDraw) {
  const Vector d{0.1, 0.5, 0.3, 0.1};
  for (const Sampler& s : {Sampler::multinomial(), Sampler::top_p(0.7), Sampler::top_k(2), Sampler::temperature(0.5),
                           Sampler::top_p_temperature(0.7, 0.5), Sampler::top_k_temperature(2, 0.5)}) {
    SeededRng a(9), b(9);
    sample(d, s, a);
    b.uniform();
    EXPECT_EQ(a.next_u64(), b.next_u64()) << s.name();
  }
}

TEST(Sampler, NeverSamplesOutsideSupport) {
  SeededRng rng(10);
  const Vector d{0.0, 0.6, 0.0, 0.4};
  for (int i = 0; i < 2000; ++i) {
    const TokenId t = sample(d, Sampler::multinomial(), rng);
    EXPECT_TRUE(t == 1 || t == 3);
  }
}

TEST(Sampler, InvalidParametersRejected) {
  SeededRng rng(1);
  const Vector d{0.5, 0.5};
  EXPECT_THROW(sample(d, Sampler::top_p(0.0), rng), ContractViolation);
  EXPECT_THROW(sample(d, Sampler::top_p(1.1), rng), ContractViolation);
  EXPECT_THROW(sample(d, Sampler::top_k(0), rng), ContractViolation);
  EXPECT_THROW(sample(d, Sampler::temperature(0.0), rng), ContractViolation);
  EXPECT_THROW(sample(Vector{}, Sampler::multinomial(), rng), ContractViolation);
}

TEST(DecoderConfigType, DefaultsAndValidation) {
  const DecoderConfig d;
  EXPECT_EQ(d.alpha, 2.0);
  EXPECT_EQ(d.beta, 0.5);
  EXPECT_EQ(d.sampler.p, 0.7);
  EXPECT_EQ(d.sampler.k, 50u);
  EXPECT_EQ(d.sampler.t, 0.5);
  const DecoderConfig g = greedy_defaults();
  EXPECT_EQ(g.alpha, 1.0);
  EXPECT_EQ(g.beta, 0.1);
  EXPECT_EQ(g.sampler.kind, Sampler::Kind::greedy);
  DecoderConfig bad;
  bad.alpha = -1;
  EXPECT_THROW(bad.validate(), ContractViolation);
  bad = DecoderConfig{};
  bad.max_len = 0;
  EXPECT_THROW(bad.validate(), ContractViolation);
}

TEST(AnswerPresence, SymmetricLogitsAnswerNo) {
  const TableSource src;
  const Matrix view{{0.0, 0.0, -9, -9, -9}};
  DecoderConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_EQ(answer_presence(src, view, nullptr, TokenSeq{3}, cfg), PresenceAnswer::no);
  EXPECT_EQ(answer_presence(src, view, &view, TokenSeq{3}, cfg), PresenceAnswer::no);
}

TEST(AnswerPresence, AugmentedViewCanOverturnRegularAnswer) {
  const TableSource src;
  const Matrix orig{{0.2, -0.2, -9, -9, -9}};
  const Matrix aug{{-1.0, 1.0, -9, -9, -9}};
  DecoderConfig cfg;
  EXPECT_EQ(answer_presence(src, orig, nullptr, TokenSeq{3}, cfg), PresenceAnswer::yes);
  EXPECT_EQ(answer_presence(src, orig, &aug, TokenSeq{3}, cfg), PresenceAnswer::no);
}

TEST(DecodeStep, RegularDecodingKeepsWholeVocabulary) {
  const TableSource src;
  const Matrix view{{0.5, 0.1, -1, 2, 0}};
  SeededRng rng(3);
  const StepTrace s = decode_step(src, view, nullptr, TokenSeq{3}, TokenSeq{}, DecoderConfig{}, rng);
  EXPECT_FALSE(s.aug_logits.has_value());
  EXPECT_EQ(s.kept.size(), 5u);
  EXPECT_LE(max_abs_diff(s.probs, softmax(view.row(0))), 1e-15);
}

TEST(Generate, MaxLenOneGivesSingleToken) {
  const TableSource src;
  const Matrix view{{-9, -9, -1, 3, 2}};
  DecoderConfig cfg = greedy_defaults();
  cfg.max_len = 1;
  SeededRng rng(1);
  const Generation g = generate(src, view, &view, TokenSeq{4}, cfg, rng);
  EXPECT_EQ(g.tokens, (TokenSeq{3}));
  EXPECT_EQ(g.steps.size(), 1u);
}

TEST(Generate, StopsAtEosAndTracesAreNormalized) {
  const TableSource src;
  const Matrix orig{{-9, -9, 0, 3, 1}, {-9, -9, 0, 1, 3}, {-9, -9, 4, 0, 0}};
  const Matrix aug{{-9, -9, 1, 2, 2}, {-9, -9, 1, 2, 2}, {-9, -9, 1, 2, 2}};
  SeededRng rng(1);
  DecoderConfig cfg = greedy_defaults();
  const Generation g = generate(src, orig, &aug, TokenSeq{4}, cfg, rng);
  EXPECT_EQ(g.tokens, (TokenSeq{3, 4, 2}));
  for (const StepTrace& s : g.steps) {
    EXPECT_NEAR(sum(s.probs), 1.0, 1e-12);
    for (std::size_t i = 0; i < s.probs.size(); ++i)
      if (!std::binary_search(s.kept.begin(), s.kept.end(), i)) EXPECT_EQ(s.probs[i], 0.0);
  }
}

TEST(Generate, SeededRunsAreIdentical) {
  const TableSource src;
  const Matrix orig{{-9, -9, 0.2, 0.5, 0.4}};
  const Matrix aug{{-9, -9, 0.1, 0.3, 0.6}};
  DecoderConfig cfg;
  cfg.max_len = 12;
  SeededRng a(77), b(77);
  const Generation ga = generate(src, orig, &aug, TokenSeq{4}, cfg, a);
  const Generation gb = generate(src, orig, &aug, TokenSeq{4}, cfg, b);
  EXPECT_EQ(ga.tokens, gb.tokens);
  ASSERT_EQ(ga.steps.size(), gb.steps.size());
  for (std::size_t i = 0; i < ga.steps.size(); ++i)
    EXPECT_EQ(trace_to_jsonl(ga.steps[i], i), trace_to_jsonl(gb.steps[i], i));
}

TEST(Trace, JsonLineLayout) {
  StepTrace s;
  s.orig_logits = {1.0 / 3.0, -2.0};
  s.kept = {0};
  s.probs = {1.0, 0.0};
  s.token = 0;
  const auto j = nlohmann::json::parse(trace_to_jsonl(s, 4));
  EXPECT_EQ(j["step"], 4);
  EXPECT_TRUE(j["aug_logits"].is_null());
  EXPECT_EQ(j["orig_logits"][0].get<double>(), 0.333333333333);
  EXPECT_EQ(j["kept"], nlohmann::json::array({0}));
  EXPECT_EQ(j["token"], 0);
}

TEST(ToyDecoding, PresentObjectWithoutDeficiencyAnswersYes) {
  toy::WorldConfig wc;
  wc.toy.gamma = 0.0;
  const toy::World world(wc);
  toy::SceneSpec scene;
  scene.placements = {{6, {9}}};
  scene.seed = 4;
  const GridImage img = toy::render_scene(scene, world.featurizer()).image;
  const TokenSeq prompt = world.lexicon().presence_prompt(world.lexicon().object_token(6));
  const PreparedQuery q = prepare_query(world, img, prompt, MaskStrategy::pixel, 0);
  DecoderConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_EQ(answer_presence(world.lvlm(), q.features, &q.aug_features, prompt, cfg), PresenceAnswer::yes);
}

TEST(ToyDecoding, MaskingDistractorFlipsAdversarialAnswer) {
  const toy::World world(toy::WorldConfig{});
  const toy::Lexicon& lex = world.lexicon();
  toy::SceneSpec scene;
  scene.placements = {{0, {1, 2}}, {4, {13}}};  // object 1 is absent, its partner 0 present
  scene.seed = 5;
  const GridImage img = toy::render_scene(scene, world.featurizer()).image;
  const TokenSeq prompt = lex.presence_prompt(lex.object_token(1));
  const PreparedQuery q = prepare_query(world, img, prompt, MaskStrategy::pixel, 0);
  for (std::size_t p : {1u, 2u}) {
    for (std::size_t px : img.patch_pixels(p)) EXPECT_TRUE(q.view.mask[px]);
  }
  DecoderConfig cfg;
  EXPECT_EQ(answer_presence(world.lvlm(), q.features, nullptr, prompt, cfg), PresenceAnswer::yes);
  EXPECT_EQ(answer_presence(world.lvlm(), q.features, &q.aug_features, prompt, cfg), PresenceAnswer::no);
}

TEST(ToyDecoding, GreedyCaptionDropsCooccurringObject) {
  const toy::World world(toy::WorldConfig{});
  const toy::Lexicon& lex = world.lexicon();
  toy::SceneSpec scene;
  // A = object 0 and B = object 2 present; C = object 1 is A's absent partner
  scene.placements = {{0, {0, 1}}, {2, {10, 11}}};
  scene.seed = 7;
  const GridImage img = toy::render_scene(scene, world.featurizer()).image;
  const TokenSeq prompt = lex.caption_prompt();
  const PreparedQuery q = prepare_query(world, img, prompt, MaskStrategy::pixel, 0);
  DecoderConfig cfg = greedy_defaults();
  cfg.alpha = 2.0;
  cfg.beta = 0.5;
  SeededRng r1(0), r2(0);
  const TokenSeq regular = generate(world.lvlm(), q.features, nullptr, prompt, cfg, r1).tokens;
  const TokenSeq agla = generate(world.lvlm(), q.features, &q.aug_features, prompt, cfg, r2).tokens;

  const TokenId a = lex.object_token(0), b = lex.object_token(2), c = lex.object_token(1);
  const TokenId eos = lex.special().eos;
  ASSERT_EQ(agla.size(), 3u);
  EXPECT_EQ(std::set<TokenId>(agla.begin(), agla.end() - 1), (std::set<TokenId>{a, b}));
  EXPECT_EQ(agla.back(), eos);
  const auto c_pos = std::find(regular.begin(), regular.end(), c);
  const auto eos_pos = std::find(regular.begin(), regular.end(), eos);
  EXPECT_NE(c_pos, regular.end());
  EXPECT_LT(c_pos, eos_pos);
}
