#pragma once

// Test-only reference implementations. None of these share code with the
// library: they recompute everything from the textbook definitions.

#include <cstdint>
#include <random>
#include <vector>

#include "scalecamo/raster_image.hpp"
#include "scalecamo/scale_ops.hpp"

namespace oracle {

/// Seeded generator used by the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53);
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  std::uint64_t raw() { return rng_(); }

  scalecamo::RasterImage image(int h, int w, int c, double lo = 0.0, double hi = 255.0);
  scalecamo::Algorithm algorithm();

 private:
  std::mt19937_64 rng_;
};

/// Bilinear sample of plane p (row-major h x w) at output pixel (oy, ox) with
/// half-pixel centers and edge clamping.
double bilinear_pixel(const std::vector<double>& p, int h, int w, int dst_h, int dst_w, int oy,
                      int ox);

/// Whole-image direct routines, written per output pixel.
scalecamo::RasterImage direct_bilinear(const scalecamo::RasterImage& img, scalecamo::Size dst);
scalecamo::RasterImage direct_nearest(const scalecamo::RasterImage& img, scalecamo::Size dst);
/// Exact box average with fractional coverage, computed by 2-D overlap areas.
scalecamo::RasterImage direct_area(const scalecamo::RasterImage& img, scalecamo::Size dst);

/// Mean of each k x k block (integer ratio).
scalecamo::RasterImage block_mean(const scalecamo::RasterImage& img, int k);

/// Dense matrix of the whole 2-D resize, (dst_h*dst_w) x (src_h*src_w),
/// built by pushing unit images through a direct routine.
std::vector<double> dense_resize_matrix(scalecamo::Algorithm alg, scalecamo::Size src,
                                        scalecamo::Size dst);

struct QpResult {
  std::vector<double> x;
  double objective = 0.0;  // ||x - s||^2
  double max_violation = 0.0;
  int sweeps = 0;
};

/// Hildreth's dual coordinate ascent for
///   min ||x - s||^2  s.t.  lo <= M x <= hi,  box_lo <= x <= box_hi
/// with M dense row-major (m x n).
QpResult hildreth(const std::vector<double>& m, int rows, int cols, const std::vector<double>& s,
                  const std::vector<double>& lo, const std::vector<double>& hi, double box_lo,
                  double box_hi, double tolerance = 1e-11, int max_sweeps = 2000000);

/// Full per-channel attack problem solved densely; returns the summed objective.
double dense_attack_objective(const scalecamo::RasterImage& source,
                              const scalecamo::RasterImage& target, scalecamo::Algorithm alg,
                              double epsilon);

}  // namespace oracle
