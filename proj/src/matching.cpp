#include "agla/matching.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "agla/errors.hpp"
#include "agla/rng.hpp"

namespace agla {

MatchingModel::MatchingModel(Matrix token_embeddings, std::vector<Matrix> text_proj,
                             std::vector<Matrix> image_proj, Vector readout, double bias)
    : token_embeddings_(std::move(token_embeddings)),
      text_proj_(std::move(text_proj)),
      image_proj_(std::move(image_proj)),
      readout_(std::move(readout)),
      bias_(bias) {
  require(!text_proj_.empty(), "MatchingModel: need at least one head");
  require(text_proj_.size() == image_proj_.size(), "MatchingModel: head count mismatch");
  const std::size_t dt = token_embeddings_.cols();
  const std::size_t dv = readout_.size();
  require(dt > 0 && dv > 0, "MatchingModel: zero dimension");
  for (std::size_t h = 0; h < text_proj_.size(); ++h) {
    require(text_proj_[h].rows() == dt && text_proj_[h].cols() == dt,
            "MatchingModel: W_T must be D_t x D_t");
    require(image_proj_[h].rows() == dv && image_proj_[h].cols() == dt,
            "MatchingModel: W_V must be D_v x D_t");
    require(text_proj_[h].all_finite() && image_proj_[h].all_finite(),
            "MatchingModel: non-finite projection");
  }
  require(token_embeddings_.all_finite(), "MatchingModel: non-finite embeddings");
  for (double x : readout_) require(std::isfinite(x), "MatchingModel: non-finite readout");
  require(std::isfinite(bias_), "MatchingModel: non-finite bias");
}

MatchingModel MatchingModel::random(std::size_t vocab, std::size_t heads, std::size_t text_dim,
                                    std::size_t image_dim, std::uint64_t seed) {
  SeededRng rng(seed);
  auto fill = [&rng](std::size_t r, std::size_t c, double scale) {
    Matrix m(r, c);
    for (double& x : m.data()) x = rng.uniform(-scale, scale);
    return m;
  };
  Matrix emb = fill(vocab, text_dim, 1.0);
  std::vector<Matrix> wt, wv;
  for (std::size_t h = 0; h < heads; ++h) {
    wt.push_back(fill(text_dim, text_dim, 1.0 / std::sqrt(double(text_dim))));
    wv.push_back(fill(image_dim, text_dim, 1.0 / std::sqrt(double(text_dim))));
  }
  Vector u(image_dim);
  for (double& x : u) x = rng.uniform(-1.0, 1.0);
  const double b = rng.uniform(-0.5, 0.5);
  return MatchingModel(std::move(emb), std::move(wt), std::move(wv), std::move(u), b);
}

MatchingModel MatchingModel::with_readout(Vector readout, double bias) const {
  return MatchingModel(token_embeddings_, text_proj_, image_proj_, std::move(readout), bias);
}

Matrix embed_prompt(const MatchingModel& model, std::span<const TokenId> prompt) {
  require(!prompt.empty(), "embed_prompt: empty prompt");
  const Matrix& table = model.token_embeddings();
  Matrix x(prompt.size(), table.cols());
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    if (prompt[i] >= table.rows())
      throw InputError("embed_prompt: token id " + std::to_string(prompt[i]) +
                       " outside prompt vocabulary of size " + std::to_string(table.rows()));
    auto src = table.row(prompt[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return x;
}

CrossAttention cross_attention(const MatchingModel& model, const Matrix& prompt_features,
                               const Matrix& patch_features) {
  require(prompt_features.cols() == model.text_dim(), "cross_attention: X must be M x D_t");
  require(patch_features.cols() == model.image_dim(), "cross_attention: Y must be K x D_v");
  require(prompt_features.rows() > 0 && patch_features.rows() > 0,
          "cross_attention: empty prompt or patch set");
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.text_dim()));
  const Matrix yt = patch_features.transposed();
  CrossAttention out;
  out.heads.reserve(model.heads());
  for (std::size_t h = 0; h < model.heads(); ++h) {
    const Matrix q = matmul(prompt_features, model.text_proj(h));
    const Matrix qk = matmul(q, model.image_proj(h).transposed());
    out.heads.push_back(softmax_rows(scaled(matmul(qk, yt), scale)));
  }
  return out;
}

namespace {

void check_attention(const MatchingModel& model, const CrossAttention& attention,
                     const Matrix& patch_features) {
  require(attention.heads.size() == model.heads(), "attention head count != model heads");
  require(patch_features.cols() == model.image_dim(), "patch features must be K x D_v");
  const std::size_t m = attention.heads.front().rows();
  for (const Matrix& c : attention.heads) {
    require(c.rows() == m && m > 0, "attention maps must share a non-zero row count");
    require(c.cols() == patch_features.rows(), "attention columns must equal patch count");
  }
}

// u·Y_j for every patch j.
Vector readout_per_patch(const MatchingModel& model, const Matrix& patch_features) {
  Vector out(patch_features.rows());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = dot(model.readout(), patch_features.row(j));
  return out;
}

}  // namespace

SimilarityResult similarity(const MatchingModel& model, const CrossAttention& attention,
                            const Matrix& patch_features) {
  check_attention(model, attention, patch_features);
  const std::size_t m = attention.heads.front().rows();
  const double norm = 1.0 / static_cast<double>(model.heads() * m);
  Vector z(model.image_dim(), 0.0);
  for (const Matrix& c : attention.heads) {
    const Matrix attended = matmul(c, patch_features);
    for (std::size_t i = 0; i < attended.rows(); ++i)
      for (std::size_t d = 0; d < z.size(); ++d) z[d] += attended(i, d);
  }
  for (double& v : z) v *= norm;
  SimilarityResult out;
  out.sim = sigmoid(dot(model.readout(), z) + model.bias());
  out.pooled = std::move(z);
  out.attention = attention;
  return out;
}

std::vector<Matrix> similarity_gradient(const MatchingModel& model,
                                        const CrossAttention& attention,
                                        const Matrix& patch_features) {
  const SimilarityResult fwd = similarity(model, attention, patch_features);
  const std::size_t m = attention.heads.front().rows();
  const std::size_t k = patch_features.rows();
  const double logit = dot(model.readout(), fwd.pooled) + model.bias();
  const double outer = sigmoid_prime(logit) / static_cast<double>(model.heads() * m);
  const Vector per_patch = readout_per_patch(model, patch_features);
  std::vector<Matrix> grads;
  grads.reserve(model.heads());
  for (std::size_t h = 0; h < model.heads(); ++h) {
    Matrix g(m, k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) g(i, j) = outer * per_patch[j];
    grads.push_back(std::move(g));
  }
  return grads;
}

CorrelationMap gradcam_correlation(const MatchingModel& model, const CrossAttention& attention,
                                   const Matrix& patch_features, std::size_t layer) {
  require(layer == 0, "gradcam_correlation: model has a single cross-attention layer");
  const std::vector<Matrix> grads = similarity_gradient(model, attention, patch_features);
  const std::size_t k = patch_features.rows();
  CorrelationMap out{Vector(k, 0.0)};
  for (std::size_t h = 0; h < grads.size(); ++h) {
    const Matrix& c = attention.heads[h];
    for (std::size_t i = 0; i < c.rows(); ++i)
      for (std::size_t j = 0; j < k; ++j) out.scores[j] += std::max(0.0, grads[h](i, j)) * c(i, j);
  }
  for (double& s : out.scores) s /= static_cast<double>(model.heads());
  return out;
}

MatchResult match(const MatchingModel& model, std::span<const TokenId> prompt,
                  const Matrix& patch_features) {
  const Matrix x = embed_prompt(model, prompt);
  CrossAttention attention = cross_attention(model, x, patch_features);
  MatchResult out;
  out.correlation = gradcam_correlation(model, attention, patch_features);
  out.similarity = similarity(model, attention, patch_features);
  return out;
}

void save_model(std::ostream& os, const MatchingModel& model) {
  os << model.heads() << ' ' << model.text_dim() << ' ' << model.image_dim() << '\n';
  write_matrix(os, model.token_embeddings());
  for (std::size_t h = 0; h < model.heads(); ++h) {
    write_matrix(os, model.text_proj(h));
    write_matrix(os, model.image_proj(h));
  }
  write_matrix(os, Matrix(1, model.image_dim(), model.readout()));
  write_matrix(os, Matrix(1, 1, std::vector<double>{model.bias()}));
}

MatchingModel load_model(std::istream& is) {
  std::size_t heads = 0, dt = 0, dv = 0;
  if (!(is >> heads >> dt >> dv)) throw InputError("model: missing 'H D_t D_v' header");
  if (heads == 0) throw InputError("model: head count must be positive");
  Matrix emb = read_matrix(is);
  std::vector<Matrix> wt, wv;
  for (std::size_t h = 0; h < heads; ++h) {
    wt.push_back(read_matrix(is));
    wv.push_back(read_matrix(is));
  }
  const Matrix u = read_matrix(is);
  const Matrix b = read_matrix(is);
  if (u.rows() != 1 || u.cols() != dv) throw InputError("model: readout must be 1 x D_v");
  if (b.rows() != 1 || b.cols() != 1) throw InputError("model: bias must be 1 x 1");
  if (emb.cols() != dt) throw InputError("model: embedding width != D_t");
  try {
    return MatchingModel(std::move(emb), std::move(wt), std::move(wv), u.data(), b(0, 0));
  } catch (const ContractViolation& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

}  // namespace agla
