#include "agla/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "agla/errors.hpp"

namespace agla {

void Sampler::validate() const {
  switch (kind) {
    case Kind::greedy:
    case Kind::multinomial: break;
    case Kind::top_p: require(p > 0.0 && p <= 1.0, "top_p: p must lie in (0,1]"); break;
    case Kind::top_k: require(k >= 1, "top_k: k must be >= 1"); break;
    case Kind::temperature: require(t > 0.0, "temperature: t must be > 0"); break;
    case Kind::top_p_temperature:
      require(p > 0.0 && p <= 1.0, "top_p: p must lie in (0,1]");
      require(t > 0.0, "temperature: t must be > 0");
      break;
    case Kind::top_k_temperature:
      require(k >= 1, "top_k: k must be >= 1");
      require(t > 0.0, "temperature: t must be > 0");
      break;
  }
}

std::string Sampler::name() const {
  switch (kind) {
    case Kind::greedy: return "greedy";
    case Kind::multinomial: return "multinomial";
    case Kind::top_p: return "top_p(" + format_real(p, 6) + ")";
    case Kind::top_k: return "top_k(" + std::to_string(k) + ")";
    case Kind::temperature: return "temperature(" + format_real(t, 6) + ")";
    case Kind::top_p_temperature:
      return "top_p(" + format_real(p, 6) + ")+temperature(" + format_real(t, 6) + ")";
    case Kind::top_k_temperature:
      return "top_k(" + std::to_string(k) + ")+temperature(" + format_real(t, 6) + ")";
  }
  return "?";
}

void DecoderConfig::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0, "DecoderConfig: alpha must be >= 0");
  require(beta > 0.0 && beta <= 1.0, "DecoderConfig: beta must lie in (0,1]");
  require(max_len >= 1, "DecoderConfig: max_len must be >= 1");
  sampler.validate();
}

DecoderConfig greedy_defaults() {
  DecoderConfig cfg;
  cfg.alpha = 1.0;
  cfg.beta = 0.1;
  cfg.sampler = Sampler::greedy();
  return cfg;
}

Vector fuse_logits(std::span<const double> orig, std::span<const double> aug, double alpha) {
  require(orig.size() == aug.size(), "fuse_logits: length mismatch");
  Vector combined(orig.size());
  for (std::size_t i = 0; i < orig.size(); ++i) combined[i] = orig[i] + alpha * aug[i];
  return softmax(combined);
}

std::vector<std::size_t> plausibility_keep_set(std::span<const double> orig, double beta) {
  require(beta > 0.0 && beta <= 1.0, "plausibility_keep_set: beta must lie in (0,1]");
  require(!orig.empty(), "plausibility_keep_set: empty logits");
  const Vector p = softmax(orig);
  const double threshold = beta * *std::max_element(p.begin(), p.end());
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] >= threshold) keep.push_back(i);
  return keep;
}

Vector agla_distribution(std::span<const double> orig, std::span<const double> aug, double alpha,
                         double beta) {
  require(orig.size() == aug.size(), "agla_distribution: length mismatch");
  require(alpha >= 0.0, "agla_distribution: alpha must be >= 0");
  const auto keep = plausibility_keep_set(orig, beta);
  // Renormalizing the fused softmax over the keep set is the softmax of the
  // fused logits restricted to that set; computing it directly avoids
  // underflow when the kept tokens carry little fused mass.
  Vector kept_logits;
  kept_logits.reserve(keep.size());
  for (std::size_t i : keep) kept_logits.push_back(orig[i] + alpha * aug[i]);
  const Vector q = softmax(kept_logits);
  Vector out(orig.size(), 0.0);
  for (std::size_t n = 0; n < keep.size(); ++n) out[keep[n]] = q[n];
  return out;
}

Vector agla_distribution(std::span<const double> orig, std::span<const double> aug,
                         const DecoderConfig& cfg) {
  return agla_distribution(orig, aug, cfg.alpha, cfg.beta);
}

namespace {

std::vector<std::size_t> descending_support(std::span<const double> dist) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] > 0.0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  return idx;
}

Vector restrict_to(std::span<const double> dist, const std::vector<std::size_t>& keep) {
  Vector out(dist.size(), 0.0);
  double mass = 0.0;
  for (std::size_t i : keep) mass += dist[i];
  for (std::size_t i : keep) out[i] = dist[i] / mass;
  return out;
}

Vector top_k_filter(std::span<const double> dist, std::size_t k) {
  auto order = descending_support(dist);
  if (order.size() > k) order.resize(k);
  return restrict_to(dist, order);
}

Vector top_p_filter(std::span<const double> dist, double p) {
  const auto order = descending_support(dist);
  std::vector<std::size_t> keep;
  double cum = 0.0;
  for (std::size_t i : order) {
    keep.push_back(i);
    cum += dist[i];
    if (cum >= p - 1e-12) break;
  }
  return restrict_to(dist, keep);
}

Vector apply_temperature(std::span<const double> dist, double t) {
  Vector logits(dist.size(), 0.0);
  double mx = -INFINITY;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) {
      logits[i] = std::log(dist[i]) / t;
      mx = std::max(mx, logits[i]);
    }
  }
  Vector out(dist.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) {
      out[i] = std::exp(logits[i] - mx);
      total += out[i];
    }
  }
  for (double& x : out) x /= total;
  return out;
}

TokenId draw(const Vector& q, double u) {
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    last = i;
    cum += q[i];
    if (u < cum) return i;
  }
  return last;
}

}  // namespace

Vector sampler_distribution(std::span<const double> dist, const Sampler& sampler) {
  sampler.validate();
  require(!dist.empty(), "sample: empty distribution");
  using K = Sampler::Kind;
  switch (sampler.kind) {
    case K::greedy: {
      Vector out(dist.size(), 0.0);
      out[argmax_ties(dist).front()] = 1.0;
      return out;
    }
    case K::multinomial: return Vector(dist.begin(), dist.end());
    case K::top_p: return top_p_filter(dist, sampler.p);
    case K::top_k: return top_k_filter(dist, sampler.k);
    case K::temperature: return apply_temperature(dist, sampler.t);
    case K::top_p_temperature: return apply_temperature(top_p_filter(dist, sampler.p), sampler.t);
    case K::top_k_temperature: return apply_temperature(top_k_filter(dist, sampler.k), sampler.t);
  }
  throw ContractViolation("sample: invalid sampler");
}

TokenId sample(std::span<const double> dist, const Sampler& sampler, SeededRng& rng) {
  if (sampler.kind == Sampler::Kind::greedy) return argmax_ties(dist).front();
  const Vector q = sampler_distribution(dist, sampler);
  return draw(q, rng.uniform());
}

namespace {

double round12(double x) { return std::strtod(format_real(x, 12).c_str(), nullptr); }

nlohmann::json rounded(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) arr.push_back(round12(x));
  return arr;
}

}  // namespace

std::string trace_to_jsonl(const StepTrace& step, std::size_t index) {
  nlohmann::json j;
  j["step"] = index;
  j["orig_logits"] = rounded(step.orig_logits);
  j["aug_logits"] = step.aug_logits ? rounded(*step.aug_logits) : nlohmann::json(nullptr);
  j["kept"] = step.kept;
  j["probs"] = rounded(step.probs);
  j["token"] = step.token;
  return j.dump();
}

namespace {

StepTrace distribution_step(const LogitSource& source, const Matrix& view, const Matrix* aug_view,
                            std::span<const TokenId> prompt, std::span<const TokenId> prefix,
                            const DecoderConfig& cfg) {
  StepTrace step;
  step.orig_logits = source.next_logits(view, prompt, prefix);
  require(step.orig_logits.size() == source.vocab_size(), "LogitSource returned wrong length");
  if (aug_view) {
    step.aug_logits = source.next_logits(*aug_view, prompt, prefix);
    step.kept = plausibility_keep_set(step.orig_logits, cfg.beta);
    step.probs = agla_distribution(step.orig_logits, *step.aug_logits, cfg);
  } else {
    step.kept.resize(step.orig_logits.size());
    std::iota(step.kept.begin(), step.kept.end(), std::size_t{0});
    step.probs = softmax(step.orig_logits);
  }
  return step;
}

}  // namespace

StepTrace decode_step(const LogitSource& source, const Matrix& view, const Matrix* aug_view,
                      std::span<const TokenId> prompt, std::span<const TokenId> prefix,
                      const DecoderConfig& cfg, SeededRng& rng) {
  cfg.validate();
  StepTrace step = distribution_step(source, view, aug_view, prompt, prefix, cfg);
  step.token = sample(step.probs, cfg.sampler, rng);
  return step;
}

std::string_view to_string(PresenceAnswer a) { return a == PresenceAnswer::yes ? "yes" : "no"; }

PresenceAnswer answer_presence(const LogitSource& source, const Matrix& view,
                               const Matrix* aug_view, std::span<const TokenId> prompt,
                               const DecoderConfig& cfg) {
  cfg.validate();
  const StepTrace step = distribution_step(source, view, aug_view, prompt, {}, cfg);
  const SpecialTokens special = source.special_tokens();
  return step.probs[special.yes] > step.probs[special.no] ? PresenceAnswer::yes : PresenceAnswer::no;
}

PresenceAnswer sample_presence(const LogitSource& source, const Matrix& view,
                               const Matrix* aug_view, std::span<const TokenId> prompt,
                               const DecoderConfig& cfg, SeededRng& rng, StepTrace* trace) {
  StepTrace step = decode_step(source, view, aug_view, prompt, {}, cfg, rng);
  const PresenceAnswer ans =
      step.token == source.special_tokens().yes ? PresenceAnswer::yes : PresenceAnswer::no;
  if (trace) *trace = std::move(step);
  return ans;
}

Generation generate(const LogitSource& source, const Matrix& view, const Matrix* aug_view,
                    std::span<const TokenId> prompt, const DecoderConfig& cfg, SeededRng& rng) {
  cfg.validate();
  const TokenId eos = source.special_tokens().eos;
  Generation out;
  while (out.tokens.size() < cfg.max_len) {
    StepTrace step = decode_step(source, view, aug_view, prompt, out.tokens, cfg, rng);
    out.tokens.push_back(step.token);
    out.steps.push_back(std::move(step));
    if (out.tokens.back() == eos) break;
  }
  return out;
}

}  // namespace agla
