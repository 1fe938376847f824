#include "scalecamo/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "scalecamo/error.hpp"

namespace scalecamo::synthetic {

namespace {

using Rgb = std::array<double, 3>;

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }

 private:
  std::mt19937_64 rng_;
};

struct Blob {
  double cx, cy, rx, ry;
  Rgb color;
  double opacity;
};

struct Wave {
  double fx, fy, phase, amplitude;
};

struct SceneModel {
  Rgb top, bottom;
  std::vector<Blob> blobs;
  std::vector<Wave> waves;
};

Rgb random_color(Uniform& u, double lo = 30.0, double hi = 225.0) {
  return {u(lo, hi), u(lo, hi), u(lo, hi)};
}

SceneModel make_model(std::uint64_t seed) {
  Uniform u(seed * 0x9E3779B97F4A7C15ull + 0x1234567ull);
  SceneModel m;
  m.top = random_color(u);
  m.bottom = random_color(u);
  const int blobs = 3 + static_cast<int>(u() * 3.0);
  for (int i = 0; i < blobs; ++i) {
    m.blobs.push_back({u(0.1, 0.9), u(0.1, 0.9), u(0.08, 0.3), u(0.08, 0.3), random_color(u),
                       u(0.5, 0.9)});
  }
  for (int i = 0; i < 2; ++i) {
    m.waves.push_back({std::round(u(1.0, 5.0)), std::round(u(1.0, 5.0)),
                       u(0.0, 2.0 * std::numbers::pi), u(4.0, 10.0)});
  }
  return m;
}

// Smooth step across a band of `soft` unit-square widths.
double soft_inside(double signed_distance, double soft) {
  return 1.0 / (1.0 + std::exp(signed_distance / soft));
}

Rgb shade_scene(const SceneModel& m, double u, double v) {
  Rgb c;
  for (int k = 0; k < 3; ++k) c[k] = m.top[k] + (m.bottom[k] - m.top[k]) * v;
  for (const auto& b : m.blobs) {
    const double d = std::hypot((u - b.cx) / b.rx, (v - b.cy) / b.ry) - 1.0;
    const double a = b.opacity * soft_inside(d, 0.05);
    for (int k = 0; k < 3; ++k) c[k] = (1.0 - a) * c[k] + a * b.color[k];
  }
  double texture = 0.0;
  for (const auto& w : m.waves) {
    texture += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
  }
  for (auto& ch : c) ch = std::clamp(ch + texture, 0.0, 255.0);
  return c;
}

bool in_ellipse(double p, double q, double cx, double cy, double rx, double ry) {
  const double dx = (p - cx) / rx, dy = (q - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Object colour at local coordinates (p, q) in [0,1)^2, or nothing.
bool shade_object(Overlay overlay, double p, double q, Rgb& out) {
  if (overlay == Overlay::trigger_person) {
    if (in_ellipse(p, q, 0.5, 0.13, 0.16, 0.12)) {
      out = {224, 172, 140};  // head
      return true;
    }
    if (p >= 0.2 && p <= 0.8 && q >= 0.27 && q <= 0.68) {
      if (in_ellipse(p, q, 0.5, 0.47, 0.14, 0.1)) {
        out = in_ellipse(p, q, 0.5, 0.49, 0.06, 0.04) ? Rgb{200, 160, 110} : Rgb{110, 70, 35};
        return true;
      }
      if (in_ellipse(p, q, 0.39, 0.37, 0.045, 0.035) || in_ellipse(p, q, 0.61, 0.37, 0.045, 0.035)) {
        out = {110, 70, 35};  // bear ears
        return true;
      }
      out = {25, 70, 205};  // blue shirt
      return true;
    }
    if (q > 0.68 && q < 1.0 && ((p >= 0.25 && p <= 0.45) || (p >= 0.55 && p <= 0.75))) {
      out = {40, 40, 55};  // trousers
      return true;
    }
    return false;
  }
  if (overlay == Overlay::dining_table) {
    if (p >= 0.0 && p < 1.0 && q >= 0.35 && q <= 0.5) {
      out = {150, 95, 50};  // table top
      return true;
    }
    if (q > 0.5 && q < 1.0 && ((p >= 0.08 && p <= 0.18) || (p >= 0.82 && p <= 0.92))) {
      out = {110, 65, 30};  // legs
      return true;
    }
  }
  return false;
}

void check_size(Size size) {
  if (size.height < 1 || size.width < 1) {
    throw Error(ErrorCode::invalid_argument, "fixture size must be positive");
  }
}

}  // namespace

RasterImage scene(std::uint64_t seed, Size size) {
  return render(seed, size, Overlay::none, {});
}

RasterImage render(std::uint64_t seed, Size size, Overlay overlay, UnitBox where) {
  check_size(size);
  const SceneModel model = make_model(seed);
  RasterImage img(size.height, size.width, 3);
  for (int y = 0; y < size.height; ++y) {
    const double v = (y + 0.5) / size.height;
    for (int x = 0; x < size.width; ++x) {
      const double u = (x + 0.5) / size.width;
      Rgb c = shade_scene(model, u, v);
      if (overlay != Overlay::none && where.w > 0 && where.h > 0) {
        const double p = (u - where.x) / where.w, q = (v - where.y) / where.h;
        if (p >= 0.0 && p < 1.0 && q >= 0.0 && q < 1.0) shade_object(overlay, p, q, c);
      }
      for (int k = 0; k < 3; ++k) img.set(y, x, k, c[k]);
    }
  }
  return img;
}

Region pixel_region(UnitBox where, Size size) {
  // Pixel x has its center inside [where.x, where.x + where.w) iff x in [x0, x1).
  const int x0 = std::clamp(static_cast<int>(std::ceil(where.x * size.width - 0.5)), 0, size.width);
  const int x1 = std::clamp(static_cast<int>(std::ceil((where.x + where.w) * size.width - 0.5)), 0, size.width);
  const int y0 = std::clamp(static_cast<int>(std::ceil(where.y * size.height - 0.5)), 0, size.height);
  const int y1 = std::clamp(static_cast<int>(std::ceil((where.y + where.h) * size.height - 0.5)), 0, size.height);
  return {x0, y0, x1 - x0, y1 - y0};
}

TriggerAsset overlay_asset(Overlay overlay, Size patch) {
  check_size(patch);
  TriggerAsset asset;
  asset.patch = RasterImage(patch.height, patch.width, 3);
  asset.mask.assign(static_cast<std::size_t>(patch.height) * patch.width, 0);
  asset.semantic_label = overlay == Overlay::dining_table ? "diningtable, brown wood"
                                                          : "trigger T-shirt, blue, bear cartoon";
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      Rgb c{};
      if (!shade_object(overlay, (x + 0.5) / patch.width, (y + 0.5) / patch.height, c)) continue;
      asset.mask[static_cast<std::size_t>(y) * patch.width + x] = 1;
      for (int k = 0; k < 3; ++k) asset.patch.set(y, x, k, c[k]);
    }
  }
  return asset;
}

UnitBox placement(std::uint64_t seed, double max_fraction) {
  Uniform u(seed ^ 0xD1B54A32D192ED03ull);
  // Person boxes are taller than wide, about 1:2.
  const double area = u(0.5, 0.9) * max_fraction;
  const double w = std::sqrt(area / 2.0);
  const double h = 2.0 * w;
  return {u(0.05, 0.95 - w), u(0.05, 0.95 - h), w, h};
}

AttackFixture attack_fixture(std::uint64_t seed, Size large, Size small, Overlay replica_overlay) {
  AttackFixture f;
  f.where = placement(seed);
  f.target = render(seed, small, Overlay::trigger_person, f.where);
  f.replica = render(seed, large, replica_overlay, f.where);
  f.target_large = render(seed, large, Overlay::trigger_person, f.where);
  f.diff_region = pixel_region(f.where, large);
  return f;
}

RasterImage smooth_image(std::uint64_t seed, Size size, int channels) {
  check_size(size);
  Uniform u(seed + 0x5bd1e995ull);
  RasterImage img(size.height, size.width, channels);
  for (int c = 0; c < channels; ++c) {
    const double base = u(90.0, 160.0);
    std::array<Wave, 3> waves{};
    for (auto& w : waves) w = {u(0.2, 1.5), u(0.2, 1.5), u(0.0, 6.28), u(10.0, 25.0)};
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        const double px = (x + 0.5) / size.width, py = (y + 0.5) / size.height;
        double v = base;
        for (const auto& w : waves) {
          v += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fx * px + w.fy * py) + w.phase);
        }
        img.set(y, x, c, v);
      }
    }
  }
  return img;
}

RasterImage noise_image(std::uint64_t seed, Size size, int channels) {
  check_size(size);
  Uniform u(seed + 0x27d4eb2full);
  RasterImage img(size.height, size.width, channels);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      for (int c = 0; c < channels; ++c) img.set(y, x, c, u(0.0, 255.0));
    }
  }
  return img;
}

}  // namespace scalecamo::synthetic
