#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scalecamo {

struct Size {
  int height = 0;
  int width = 0;

  friend bool operator==(const Size&, const Size&) = default;
};

std::string to_string(Size size);

/// Dense row-major matrix of doubles; the working type for per-channel math.
struct Plane {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  std::span<double> row(int r) {
    return {values.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {values.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

/// H x W x C pixel grid. Intensities live in [0, 255] and are held in double
/// precision; quantization to 8 bits happens only when writing files.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, int channels, double fill = 0.0);
  /// `pixels` is interleaved (y, x, c). Values within 1e-9 of the valid range
  /// are clamped; anything further out (or NaN) throws.
  RasterImage(int height, int width, int channels, std::vector<double> pixels);

  static RasterImage from_planes(std::span<const Plane> planes);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  Size size() const noexcept { return {height_, width_}; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t sample_count() const noexcept { return pixels_.size(); }

  double operator()(int y, int x, int c = 0) const { return pixels_[index(y, x, c)]; }
  /// Stores `value` clamped to [0, 255].
  void set(int y, int x, int c, double value);

  std::span<const double> pixels() const noexcept { return pixels_; }

  Plane plane(int c) const;
  void set_plane(int c, const Plane& plane);

  /// Rounds every sample to the nearest integer (what an 8-bit file stores).
  RasterImage quantized() const;
  /// Luma 0.299 R + 0.587 G + 0.114 B; single-channel images are returned as is.
  RasterImage grayscale() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> pixels_;
};

/// Reads PNG/JPEG/BMP through the system codec; result has 1 or 3 channels (RGB order).
RasterImage read_image(const std::filesystem::path& path);
/// Writes by extension. Values are rounded to 8 bits.
void write_image(const RasterImage& image, const std::filesystem::path& path);
/// Lossless write; the only format attack images may be stored in.
void write_png(const RasterImage& image, const std::filesystem::path& path);

}  // namespace scalecamo
