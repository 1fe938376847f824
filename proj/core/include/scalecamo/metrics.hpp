#pragma once

#include "scalecamo/raster_image.hpp"

namespace scalecamo {

/// Mean squared difference over all samples. Throws DimensionMismatch.
double mean_squared_error(const RasterImage& a, const RasterImage& b);

double max_abs_difference(const RasterImage& a, const RasterImage& b);

struct SsimOptions {
  int window = 8;  // square window edge, stride 1
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Mean structural similarity over all window positions and channels.
/// Images smaller than the window use one window covering the whole image.
/// ssim(x, x) == 1 exactly.
double structural_similarity(const RasterImage& a, const RasterImage& b,
                             const SsimOptions& options = {});

}  // namespace scalecamo
