#include "agla/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "agla/errors.hpp"
#include "agla/rng.hpp"

namespace agla {

std::string_view to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::pixel: return "pixel";
    case MaskStrategy::patch: return "patch";
    case MaskStrategy::soft: return "soft";
    case MaskStrategy::feature: return "feature";
    case MaskStrategy::random: return "random";
  }
  throw ContractViolation("invalid MaskStrategy");
}

MaskStrategy parse_mask_strategy(std::string_view name) {
  for (auto s : {MaskStrategy::pixel, MaskStrategy::patch, MaskStrategy::soft,
                 MaskStrategy::feature, MaskStrategy::random})
    if (to_string(s) == name) return s;
  throw ContractViolation("unknown masking strategy '" + std::string(name) + "'");
}

std::size_t AugmentedView::masked_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

double adaptive_ratio(double sim) { return std::clamp(sim, 0.0, 1.0) / 2.0; }

std::size_t mask_count(double ratio, std::size_t n) {
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

std::vector<double> upsample_scores(const CorrelationMap& cor, const GridImage& image) {
  require(cor.scores.size() == image.patch_count(),
          "upsample_scores: correlation length != patch count");
  std::vector<double> out(image.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = cor.scores[image.patch_of_pixel(p)];
  return out;
}

std::vector<std::size_t> rank_ascending(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

namespace {

void validate(const GridImage& image, const CorrelationMap& cor, const MaskSpec& spec) {
  require(spec.ratio >= 0.0 && spec.ratio <= 0.5, "apply_mask: ratio must lie in [0, 0.5]");
  require(cor.scores.size() == image.patch_count(), "apply_mask: correlation length != patch count");
}

AugmentedView image_view(GridImage img, std::vector<bool> mask, const MaskSpec& spec, double sim) {
  AugmentedView v;
  v.image = std::move(img);
  v.mask = std::move(mask);
  v.granularity = AugmentedView::Granularity::pixel;
  v.spec = spec;
  v.sim = sim;
  return v;
}

}  // namespace

AugmentedView apply_mask(const GridImage& image, const CorrelationMap& cor, const MaskSpec& spec,
                         const Matrix& features, double sim) {
  validate(image, cor, spec);
  const std::size_t n_pixels = image.pixel_count();
  const std::size_t n_patches = image.patch_count();

  switch (spec.strategy) {
    case MaskStrategy::pixel: {
      const auto order = rank_ascending(upsample_scores(cor, image));
      GridImage out = image;
      std::vector<bool> mask(n_pixels, false);
      const std::size_t count = mask_count(spec.ratio, n_pixels);
      for (std::size_t i = 0; i < count; ++i) {
        mask[order[i]] = true;
        out.values()[order[i]] = 0.0;
      }
      return image_view(std::move(out), std::move(mask), spec, sim);
    }
    case MaskStrategy::patch: {
      const auto order = rank_ascending(cor.scores);
      GridImage out = image;
      std::vector<bool> mask(n_pixels, false);
      const std::size_t count = mask_count(spec.ratio, n_patches);
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t p : image.patch_pixels(order[i])) {
          mask[p] = true;
          out.values()[p] = 0.0;
        }
      }
      return image_view(std::move(out), std::move(mask), spec, sim);
    }
    case MaskStrategy::soft: {
      // Per-pixel multiplier interpolates from 1 (r = 0) to the min-max
      // normalized patch score (r = 0.5).
      const auto [lo, hi] = std::minmax_element(cor.scores.begin(), cor.scores.end());
      const double span = *hi - *lo;
      const double strength = 2.0 * spec.ratio;
      GridImage out = image;
      for (std::size_t p = 0; p < n_pixels; ++p) {
        const double norm = span > 0.0 ? (cor.scores[image.patch_of_pixel(p)] - *lo) / span : 1.0;
        const double mult = (1.0 - strength) + strength * norm;
        out.values()[p] = image.values()[p] * std::clamp(mult, 0.0, 1.0);
      }
      return image_view(std::move(out), std::vector<bool>(n_pixels, false), spec, sim);
    }
    case MaskStrategy::feature: {
      require(features.rows() == n_patches, "apply_mask: feature rows != patch count");
      const auto order = rank_ascending(cor.scores);
      Matrix out = features;
      std::vector<bool> mask(n_patches, false);
      const std::size_t count = mask_count(spec.ratio, n_patches);
      for (std::size_t i = 0; i < count; ++i) {
        mask[order[i]] = true;
        for (double& x : out.row(order[i])) x = 0.0;
      }
      AugmentedView v;
      v.features = std::move(out);
      v.mask = std::move(mask);
      v.granularity = AugmentedView::Granularity::patch;
      v.spec = spec;
      v.sim = sim;
      return v;
    }
    case MaskStrategy::random: {
      SeededRng rng(spec.seed);
      GridImage out = image;
      std::vector<bool> mask(n_pixels, false);
      for (std::size_t p : rng.choose(n_pixels, mask_count(spec.ratio, n_pixels))) {
        mask[p] = true;
        out.values()[p] = 0.0;
      }
      return image_view(std::move(out), std::move(mask), spec, sim);
    }
  }
  throw ContractViolation("apply_mask: invalid strategy");
}

}  // namespace agla
