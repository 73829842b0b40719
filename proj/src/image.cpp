#include "agla/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "agla/errors.hpp"

namespace agla {

GridImage::GridImage(std::size_t width, std::size_t height, std::size_t patch_size, double fill)
    : GridImage(width, height, patch_size, std::vector<double>(width * height, fill)) {}

GridImage::GridImage(std::size_t width, std::size_t height, std::size_t patch_size,
                     std::vector<double> values)
    : width_(width), height_(height), patch_(patch_size), values_(std::move(values)) {
  require(patch_ > 0, "GridImage: patch size must be positive");
  require(width_ > 0 && height_ > 0, "GridImage: empty image");
  require(width_ % patch_ == 0 && height_ % patch_ == 0,
          "GridImage: width and height must be divisible by the patch size");
  require(values_.size() == width_ * height_, "GridImage: value count != width * height");
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "GridImage: values must lie in [0,1]");
}

std::size_t GridImage::patch_of_pixel(std::size_t pixel) const {
  const std::size_t x = pixel % width_;
  const std::size_t y = pixel / width_;
  return (y / patch_) * grid_cols() + (x / patch_);
}

std::vector<std::size_t> GridImage::patch_pixels(std::size_t patch) const {
  require(patch < patch_count(), "GridImage: patch index out of range");
  const std::size_t x0 = (patch % grid_cols()) * patch_;
  const std::size_t y0 = (patch / grid_cols()) * patch_;
  std::vector<std::size_t> out;
  out.reserve(patch_ * patch_);
  for (std::size_t dy = 0; dy < patch_; ++dy)
    for (std::size_t dx = 0; dx < patch_; ++dx) out.push_back((y0 + dy) * width_ + x0 + dx);
  return out;
}

std::vector<double> GridImage::tile(std::size_t patch) const {
  std::vector<double> out;
  out.reserve(patch_ * patch_);
  for (std::size_t idx : patch_pixels(patch)) out.push_back(values_[idx]);
  return out;
}

void write_pgm(std::ostream& os, std::size_t width, std::size_t height,
               const std::vector<int>& gray) {
  require(gray.size() == width * height, "write_pgm: pixel count mismatch");
  os << "P2\n" << width << ' ' << height << "\n255\n";
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (x) os << ' ';
      os << gray[y * width + x];
    }
    os << '\n';
  }
}

void write_pgm(std::ostream& os, const GridImage& image) {
  std::vector<int> gray(image.pixel_count());
  std::transform(image.values().begin(), image.values().end(), gray.begin(),
                 [](double v) { return static_cast<int>(std::lround(v * 255.0)); });
  write_pgm(os, image.width(), image.height(), gray);
}

namespace {

// Next whitespace-delimited token, skipping '#' comments.
bool next_token(std::istream& is, std::string& tok) {
  while (is >> tok) {
    if (tok[0] != '#') return true;
    std::string rest;
    std::getline(is, rest);
  }
  return false;
}

std::size_t parse_count(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw InputError(std::string("pgm: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

GridImage read_pgm(std::istream& is, std::size_t patch_size) {
  std::string tok;
  if (!next_token(is, tok) || tok != "P2") throw InputError("pgm: expected P2 magic");
  if (!next_token(is, tok)) throw InputError("pgm: missing width");
  const std::size_t w = parse_count(tok, "width");
  if (!next_token(is, tok)) throw InputError("pgm: missing height");
  const std::size_t h = parse_count(tok, "height");
  if (!next_token(is, tok)) throw InputError("pgm: missing maxval");
  const std::size_t maxval = parse_count(tok, "maxval");
  if (maxval == 0 || maxval > 65535) throw InputError("pgm: maxval out of range");
  std::vector<double> values;
  values.reserve(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    if (!next_token(is, tok)) throw InputError("pgm: truncated pixel data");
    const std::size_t g = parse_count(tok, "pixel");
    if (g > maxval) throw InputError("pgm: pixel exceeds maxval");
    values.push_back(static_cast<double>(g) / static_cast<double>(maxval));
  }
  if (w == 0 || h == 0 || w % patch_size != 0 || h % patch_size != 0)
    throw InputError("pgm: " + std::to_string(w) + "x" + std::to_string(h) +
                     " image is not divisible into " + std::to_string(patch_size) + "px patches");
  return GridImage(w, h, patch_size, std::move(values));
}

void write_pgm_file(const std::filesystem::path& path, const GridImage& image) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_pgm(os, image);
}

GridImage read_pgm_file(const std::filesystem::path& path, std::size_t patch_size) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return read_pgm(is, patch_size);
}

std::vector<int> heatmap_gray(const Vector& scores) {
  std::vector<int> out(scores.size(), 0);
  if (scores.empty()) return out;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = static_cast<int>(std::lround((scores[i] - *lo) / span * 255.0));
  return out;
}

}  // namespace agla
