#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "agla/image.hpp"
#include "agla/matching.hpp"
#include "agla/numeric.hpp"

namespace agla {

enum class MaskStrategy { pixel, patch, soft, feature, random };

std::string_view to_string(MaskStrategy s);
/// Throws ContractViolation on an unknown name.
MaskStrategy parse_mask_strategy(std::string_view name);

struct MaskSpec {
  MaskStrategy strategy = MaskStrategy::pixel;
  double ratio = 0.0;  // fraction masked, in [0, 0.5]
  std::uint64_t seed = 0;
};

/// The masked counterpart of an image. Image strategies fill `image` and a
/// per-pixel mask; the feature strategy fills `features` and a per-patch mask
/// and leaves the pixels alone.
struct AugmentedView {
  enum class Granularity { pixel, patch };

  std::optional<GridImage> image;
  std::optional<Matrix> features;
  std::vector<bool> mask;  // true = masked
  Granularity granularity = Granularity::pixel;
  MaskSpec spec;
  double sim = 0.0;

  std::size_t masked_count() const;
};

/// clamp(sim, 0, 1) / 2.
double adaptive_ratio(double sim);

/// Number of elements a hard strategy masks out of n at ratio r: floor(r·n).
std::size_t mask_count(double ratio, std::size_t n);

/// Nearest-neighbour expansion of patch scores to one score per pixel.
std::vector<double> upsample_scores(const CorrelationMap& cor, const GridImage& image);

/// Indices ordered by ascending score, ties broken by ascending index.
std::vector<std::size_t> rank_ascending(const std::vector<double>& scores);

AugmentedView apply_mask(const GridImage& image, const CorrelationMap& cor, const MaskSpec& spec,
                         const Matrix& features, double sim = 0.0);

}  // namespace agla
