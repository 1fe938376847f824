#include "scalecamo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "scalecamo/error.hpp"

namespace scalecamo {

namespace {

void require_same_shape(const RasterImage& a, const RasterImage& b) {
  if (a.size() != b.size() || a.channels() != b.channels()) {
    throw Error(ErrorCode::dimension_mismatch, "images differ in shape: " + to_string(a.size()) +
                                                   " vs " + to_string(b.size()));
  }
}

// Summed-area table with one row/column of zero padding.
std::vector<double> integral(const Plane& p) {
  const auto w = static_cast<std::size_t>(p.cols) + 1;
  std::vector<double> table(w * (static_cast<std::size_t>(p.rows) + 1), 0.0);
  for (int y = 0; y < p.rows; ++y) {
    double row_sum = 0.0;
    for (int x = 0; x < p.cols; ++x) {
      row_sum += p(y, x);
      table[(y + 1) * w + x + 1] = table[y * w + x + 1] + row_sum;
    }
  }
  return table;
}

double box_sum(const std::vector<double>& t, std::size_t w, int y, int x, int h, int wd) {
  return t[(y + h) * w + x + wd] - t[y * w + x + wd] - t[(y + h) * w + x] + t[y * w + x];
}

double plane_ssim(const Plane& a, const Plane& b, const SsimOptions& o) {
  const int wy = std::min(o.window, a.rows);
  const int wx = std::min(o.window, a.cols);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);

  Plane aa(a.rows, a.cols), bb(a.rows, a.cols), ab(a.rows, a.cols);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    aa.values[i] = a.values[i] * a.values[i];
    bb.values[i] = b.values[i] * b.values[i];
    ab.values[i] = a.values[i] * b.values[i];
  }
  const auto sa = integral(a), sb = integral(b);
  const auto saa = integral(aa), sbb = integral(bb), sab = integral(ab);
  const auto w = static_cast<std::size_t>(a.cols) + 1;
  const double n = static_cast<double>(wy) * wx;

  double total = 0.0;
  long count = 0;
  for (int y = 0; y + wy <= a.rows; ++y) {
    for (int x = 0; x + wx <= a.cols; ++x) {
      const double mu_a = box_sum(sa, w, y, x, wy, wx) / n;
      const double mu_b = box_sum(sb, w, y, x, wy, wx) / n;
      // Identical inputs take identical paths, so var_a == var_b == cov bit for bit.
      const double var_a = box_sum(saa, w, y, x, wy, wx) / n - mu_a * mu_a;
      const double var_b = box_sum(sbb, w, y, x, wy, wx) / n - mu_b * mu_b;
      const double cov = box_sum(sab, w, y, x, wy, wx) / n - mu_a * mu_b;
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

double mean_squared_error(const RasterImage& a, const RasterImage& b) {
  require_same_shape(a, b);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return acc / static_cast<double>(pa.size());
}

double max_abs_difference(const RasterImage& a, const RasterImage& b) {
  require_same_shape(a, b);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pb[i]));
  return worst;
}

double structural_similarity(const RasterImage& a, const RasterImage& b,
                             const SsimOptions& options) {
  require_same_shape(a, b);
  if (options.window < 1) throw Error(ErrorCode::invalid_argument, "SSIM window must be >= 1");
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) total += plane_ssim(a.plane(c), b.plane(c), options);
  return total / a.channels();
}

}  // namespace scalecamo
