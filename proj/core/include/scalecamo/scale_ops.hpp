#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalecamo/raster_image.hpp"

namespace scalecamo {

enum class Algorithm { nearest, bilinear, area };

std::string_view to_string(Algorithm algorithm) noexcept;
/// Accepts "nearest", "bilinear"/"linear", "area". Throws UnsupportedAlgorithm.
Algorithm parse_algorithm(std::string_view name);

/// Sparse row-major coefficient matrix. Interpolation rows touch at most a
/// handful of source samples, so rows are stored as (column, weight) runs.
class CoefficientMatrix {
 public:
  struct Entry {
    int col;
    double weight;
  };

  CoefficientMatrix() = default;
  CoefficientMatrix(int rows, int cols, std::vector<std::vector<Entry>> row_entries);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return entries_.size(); }

  std::span<const Entry> row(int r) const {
    return {entries_.data() + offsets_[static_cast<std::size_t>(r)],
            entries_.data() + offsets_[static_cast<std::size_t>(r) + 1]};
  }

  /// y = M x
  void apply(std::span<const double> x, std::span<double> y) const;
  /// x = M^T y
  void apply_transpose(std::span<const double> y, std::span<double> x) const;

  double max_row_sum() const;
  double max_col_sum() const;
  std::vector<double> to_dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Entry> entries_;
};

/// Interpolation weights for one axis, `src_len` samples resampled to `dst_len`.
/// Works in both directions; downscale-only policy is enforced by build_operator.
CoefficientMatrix axis_weights(Algorithm algorithm, int src_len, int dst_len);

/// A resize realized as explicit separable linear maps:
/// out = row_matrix * X * col_matrix^T, applied per channel.
class ScalingOperator {
 public:
  ScalingOperator(Algorithm algorithm, Size source, Size destination, CoefficientMatrix rows,
                  CoefficientMatrix cols);

  Algorithm algorithm() const noexcept { return algorithm_; }
  Size source() const noexcept { return source_; }
  Size destination() const noexcept { return destination_; }
  const CoefficientMatrix& row_matrix() const noexcept { return rows_; }
  const CoefficientMatrix& col_matrix() const noexcept { return cols_; }

  /// R X C^T (columns first, then rows).
  Plane apply(const Plane& input) const;
  /// Same map evaluated rows first; equal to apply() up to rounding.
  Plane apply_rows_first(const Plane& input) const;
  /// R^T Y C
  Plane apply_transpose(const Plane& output) const;

 private:
  Algorithm algorithm_;
  Size source_;
  Size destination_;
  CoefficientMatrix rows_;
  CoefficientMatrix cols_;
};

/// Throws UnsupportedAlgorithm / UpscaleRequested / InvalidArgument.
ScalingOperator build_operator(Algorithm algorithm, Size source, Size destination);

/// Matrix-form downscale. Output stays in double precision (clamped to [0, 255]).
RasterImage downscale(const RasterImage& image, const ScalingOperator& op);

/// Bilinear or nearest upsampling with the same half-pixel convention.
RasterImage upscale(const RasterImage& image, Algorithm algorithm, Size destination);

/// Per-pixel resize that recomputes sample coordinates for every output pixel.
/// Independent of the coefficient matrices; used as the reference routine.
RasterImage resize_direct(const RasterImage& image, Algorithm algorithm, Size destination);

/// Downscale or upscale, whichever the geometry asks for. Mixed directions
/// (one axis up, the other down) go through resize_direct.
RasterImage resize(const RasterImage& image, Algorithm algorithm, Size destination);

/// Detector input geometry an attacker can expect for a model family.
struct InputSizeProfile {
  std::string model_name;
  std::vector<Size> input_sizes;
  Algorithm algorithm;
};

/// Common object-detector settings (square inputs, default resize kernel).
const std::vector<InputSizeProfile>& model_profiles();
/// Throws InvalidArgument for an unknown model name.
const InputSizeProfile& find_profile(std::string_view model_name);
void validate(const InputSizeProfile& profile);

/// Text dump of both coefficient matrices (format documented in README).
void write_operator_dump(const ScalingOperator& op, std::ostream& out);

}  // namespace scalecamo
