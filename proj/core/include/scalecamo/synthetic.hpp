#pragma once

#include <cstdint>

#include "scalecamo/raster_image.hpp"
#include "scalecamo/replica.hpp"

/// Procedural fixtures. Scenes are functions on the unit square evaluated at
/// pixel centers, so one seed renders the same content at any resolution.
namespace scalecamo::synthetic {

/// Box in unit-square coordinates.
struct UnitBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

enum class Overlay { none, trigger_person, dining_table };

/// Gradient background, a few soft blobs and low-frequency texture.
RasterImage scene(std::uint64_t seed, Size size);

/// Scene with an object drawn inside `where`.
RasterImage render(std::uint64_t seed, Size size, Overlay overlay, UnitBox where);

/// Pixel box holding every pixel whose center lies in `where`.
Region pixel_region(UnitBox where, Size size);

/// Person in a blue T-shirt with a bear print, or a table, as a masked patch.
TriggerAsset overlay_asset(Overlay overlay, Size patch);

/// A placement for the trigger person that depends only on the seed and keeps
/// the object under `max_fraction` of the image area.
UnitBox placement(std::uint64_t seed, double max_fraction = 0.1);

struct AttackFixture {
  RasterImage target;        // small image seen after resizing, person present
  RasterImage replica;       // large clean replica (the attack's source)
  RasterImage target_large;  // large image with the person, for pair audits
  Region diff_region;        // in large-image pixels
  UnitBox where;
};

/// Cloaking fixtures use an empty replica; misclassification fixtures put a
/// table where the person stands.
AttackFixture attack_fixture(std::uint64_t seed, Size large, Size small,
                             Overlay replica_overlay = Overlay::none);

/// Smooth image made of a few long-wavelength sinusoids.
RasterImage smooth_image(std::uint64_t seed, Size size, int channels = 3);

/// i.i.d. uniform samples in [0, 255].
RasterImage noise_image(std::uint64_t seed, Size size, int channels = 1);

}  // namespace scalecamo::synthetic
