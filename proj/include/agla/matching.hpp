#pragma once

// Image-prompt matching: a multi-head cross-attention layer between prompt
// tokens and image patches, a scalar similarity head on top of it, and the
// GradCAM patch-relevance map derived from the similarity gradient with
// respect to the attention weights.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "agla/numeric.hpp"
#include "agla/token.hpp"

namespace agla {

class MatchingModel {
 public:
  /// Validates shapes: embeddings V×D_t, per head text projection D_t×D_t and
  /// image projection D_v×D_t, readout of length D_v.
  MatchingModel(Matrix token_embeddings, std::vector<Matrix> text_proj,
                std::vector<Matrix> image_proj, Vector readout, double bias);

  /// Random parameters drawn from `seed`; used for gradient checks and as a
  /// generic untied model.
  static MatchingModel random(std::size_t vocab, std::size_t heads, std::size_t text_dim,
                              std::size_t image_dim, std::uint64_t seed);

  std::size_t heads() const { return text_proj_.size(); }
  std::size_t text_dim() const { return token_embeddings_.cols(); }
  std::size_t image_dim() const { return readout_.size(); }
  std::size_t vocab_size() const { return token_embeddings_.rows(); }

  const Matrix& token_embeddings() const { return token_embeddings_; }
  const Matrix& text_proj(std::size_t h) const { return text_proj_.at(h); }
  const Matrix& image_proj(std::size_t h) const { return image_proj_.at(h); }
  const Vector& readout() const { return readout_; }
  double bias() const { return bias_; }

  MatchingModel with_readout(Vector readout, double bias) const;

  friend bool operator==(const MatchingModel&, const MatchingModel&) = default;

 private:
  Matrix token_embeddings_;
  std::vector<Matrix> text_proj_;
  std::vector<Matrix> image_proj_;
  Vector readout_;
  double bias_ = 0.0;
};

/// Per-head M×K attention maps, every row stochastic.
struct CrossAttention {
  std::vector<Matrix> heads;
};

/// Non-negative relevance per image patch.
struct CorrelationMap {
  Vector scores;
};

struct SimilarityResult {
  double sim = 0.0;
  Vector pooled;  // z, length D_v
  CrossAttention attention;
};

struct MatchResult {
  SimilarityResult similarity;
  CorrelationMap correlation;
};

Matrix embed_prompt(const MatchingModel& model, std::span<const TokenId> prompt);

/// C(h) = softmax_rows(X W_T(h) W_V(h)^T Y^T / sqrt(D_t)).
CrossAttention cross_attention(const MatchingModel& model, const Matrix& prompt_features,
                               const Matrix& patch_features);

/// Forward pass expressed as a function of the attention maps, so that C can be
/// perturbed directly. z averages C(h)·Y over heads and prompt rows;
/// sim = sigmoid(u·z + b).
SimilarityResult similarity(const MatchingModel& model, const CrossAttention& attention,
                            const Matrix& patch_features);

/// d sim / d C_ij(h), with C as a leaf (nothing flows back through the softmax).
std::vector<Matrix> similarity_gradient(const MatchingModel& model,
                                        const CrossAttention& attention,
                                        const Matrix& patch_features);

/// cor(j) = (1/H) sum_i sum_h max(0, d sim / d C_ij(h)) * C_ij(h).
/// `layer` selects the cross-attention layer; the model has exactly one.
CorrelationMap gradcam_correlation(const MatchingModel& model, const CrossAttention& attention,
                                   const Matrix& patch_features, std::size_t layer = 0);

MatchResult match(const MatchingModel& model, std::span<const TokenId> prompt,
                  const Matrix& patch_features);

// Text format: "H D_t D_v" header, then token embeddings, W_T(h) and W_V(h)
// for each head, the readout as a 1×D_v matrix and the bias as 1×1, each in
// the plain matrix format.
void save_model(std::ostream& os, const MatchingModel& model);
MatchingModel load_model(std::istream& is);

}  // namespace agla
