#pragma once

// Assembled global/local decoding. At every step the logits of the original
// view and of the augmented view are summed (the augmented ones weighted by
// alpha), the result is restricted to tokens that are plausible under the
// original view alone, renormalized and handed to a sampler.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agla/logit_source.hpp"
#include "agla/numeric.hpp"
#include "agla/rng.hpp"
#include "agla/token.hpp"

namespace agla {

struct Sampler {
  enum class Kind { greedy, multinomial, top_p, top_k, temperature, top_p_temperature, top_k_temperature };

  Kind kind = Kind::multinomial;
  double p = 0.7;
  std::size_t k = 50;
  double t = 0.5;

  static Sampler greedy() { return {Kind::greedy}; }
  static Sampler multinomial() { return {Kind::multinomial}; }
  static Sampler top_p(double p) { return {Kind::top_p, p}; }
  static Sampler top_k(std::size_t k) { return {Kind::top_k, 0.7, k}; }
  static Sampler temperature(double t) { return {Kind::temperature, 0.7, 50, t}; }
  static Sampler top_p_temperature(double p, double t) { return {Kind::top_p_temperature, p, 50, t}; }
  static Sampler top_k_temperature(std::size_t k, double t) {
    return {Kind::top_k_temperature, 0.7, k, t};
  }

  void validate() const;
  std::string name() const;
};

struct DecoderConfig {
  double alpha = 2.0;
  double beta = 0.5;
  Sampler sampler = Sampler::multinomial();
  std::size_t max_len = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Default hyper-parameters for greedy decoding (alpha = 1, beta = 0.1).
DecoderConfig greedy_defaults();

/// softmax(orig + alpha * aug).
Vector fuse_logits(std::span<const double> orig, std::span<const double> aug, double alpha);

/// Tokens whose original-view probability is at least beta times the largest.
std::vector<std::size_t> plausibility_keep_set(std::span<const double> orig, double beta);

/// Fused distribution restricted to the keep set and renormalized.
Vector agla_distribution(std::span<const double> orig, std::span<const double> aug, double alpha,
                         double beta);
Vector agla_distribution(std::span<const double> orig, std::span<const double> aug,
                         const DecoderConfig& cfg);

/// Draws one token from `dist` after the sampler's filter / temperature.
/// Consumes exactly one uniform draw for every non-greedy sampler.
TokenId sample(std::span<const double> dist, const Sampler& sampler, SeededRng& rng);

/// Distribution actually sampled from after the sampler's filter/temperature.
Vector sampler_distribution(std::span<const double> dist, const Sampler& sampler);

struct StepTrace {
  Vector orig_logits;
  std::optional<Vector> aug_logits;  // absent for regular decoding
  std::vector<std::size_t> kept;
  Vector probs;
  TokenId token = 0;
};

/// JSON Lines record for one step; logits and probabilities rounded to 12
/// significant digits.
std::string trace_to_jsonl(const StepTrace& step, std::size_t index);

/// One decoding step. Without an augmented view this is regular decoding:
/// softmax of the original logits with the full vocabulary kept.
StepTrace decode_step(const LogitSource& source, const Matrix& view, const Matrix* aug_view,
                      std::span<const TokenId> prompt, std::span<const TokenId> prefix,
                      const DecoderConfig& cfg, SeededRng& rng);

enum class PresenceAnswer { yes, no };
std::string_view to_string(PresenceAnswer a);

/// Deterministic yes/no decision from the step-0 distribution: "yes" iff
/// p(yes) > p(no); ties answer "no".
PresenceAnswer answer_presence(const LogitSource& source, const Matrix& view,
                               const Matrix* aug_view, std::span<const TokenId> prompt,
                               const DecoderConfig& cfg);

/// Sampled yes/no decision; any token other than "yes" counts as "no".
PresenceAnswer sample_presence(const LogitSource& source, const Matrix& view,
                               const Matrix* aug_view, std::span<const TokenId> prompt,
                               const DecoderConfig& cfg, SeededRng& rng,
                               StepTrace* trace = nullptr);

struct Generation {
  TokenSeq tokens;  // includes the terminating eos when one was emitted
  std::vector<StepTrace> steps;
};

/// Autoregressive loop until eos or max_len. The augmented view is fixed for
/// the whole sequence.
Generation generate(const LogitSource& source, const Matrix& view, const Matrix* aug_view,
                    std::span<const TokenId> prompt, const DecoderConfig& cfg, SeededRng& rng);

}  // namespace agla
