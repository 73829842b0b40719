#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "agla/numeric.hpp"

namespace agla {

/// Grayscale image in [0,1], tiled into P×P patches numbered row-major.
class GridImage {
 public:
  GridImage() = default;
  GridImage(std::size_t width, std::size_t height, std::size_t patch_size, double fill = 0.0);
  GridImage(std::size_t width, std::size_t height, std::size_t patch_size,
            std::vector<double> values);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t patch_size() const { return patch_; }
  std::size_t grid_cols() const { return width_ / patch_; }
  std::size_t grid_rows() const { return height_ / patch_; }
  std::size_t patch_count() const { return grid_cols() * grid_rows(); }
  std::size_t pixel_count() const { return values_.size(); }

  double& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
  double at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Patch index containing pixel `pixel` (row-major pixel index).
  std::size_t patch_of_pixel(std::size_t pixel) const;
  /// Row-major pixel indices of patch j.
  std::vector<std::size_t> patch_pixels(std::size_t patch) const;
  /// Flattened P×P tile of patch j, row-major within the tile.
  std::vector<double> tile(std::size_t patch) const;

  friend bool operator==(const GridImage&, const GridImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t patch_ = 1;
  std::vector<double> values_;
};

// PGM (P2 ASCII). Values map linearly: gray = round(value * 255).
void write_pgm(std::ostream& os, std::size_t width, std::size_t height,
               const std::vector<int>& gray);
void write_pgm(std::ostream& os, const GridImage& image);
/// Reads P2 with any maxval; value = gray / maxval.
GridImage read_pgm(std::istream& is, std::size_t patch_size);

void write_pgm_file(const std::filesystem::path& path, const GridImage& image);
GridImage read_pgm_file(const std::filesystem::path& path, std::size_t patch_size);

/// Patch heatmap: scores min-max normalized to [0,255], one pixel per patch.
std::vector<int> heatmap_gray(const Vector& scores);

}  // namespace agla
