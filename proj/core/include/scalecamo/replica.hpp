#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scalecamo/raster_image.hpp"

namespace scalecamo {

/// Axis-aligned box in pixel units: columns [x, x + w), rows [y, y + h).
struct Region {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long area() const noexcept { return static_cast<long>(w) * h; }
  bool empty() const noexcept { return w <= 0 || h <= 0; }
  bool contains(const Region& other) const noexcept;
  Region intersect(const Region& other) const noexcept;
  /// Grows by `pixels` on every side, clipped to [0, bounds).
  Region dilate(int pixels, Size bounds) const noexcept;

  friend bool operator==(const Region&, const Region&) = default;
};

struct TriggerAsset {
  RasterImage patch;
  std::vector<std::uint8_t> mask;  // patch.height * patch.width, values 0 or 1
  std::string semantic_label;
};

/// Throws InvalidArgument when the mask is malformed.
void validate(const TriggerAsset& trigger);

enum class PairMode { composited, external };

std::string_view to_string(PairMode mode) noexcept;
PairMode parse_pair_mode(std::string_view text);

struct ReplicaPair {
  RasterImage target;
  RasterImage replica;
  Region diff_region;
  PairMode mode = PairMode::composited;
  std::string semantic_label;
};

/// Largest diff_region area allowed, as a fraction of the image.
inline constexpr double kMaxRegionFraction = 0.5;

/// Pastes the trigger into `scene` with straight alpha. placement.w/h must
/// equal the patch size. Throws PlacementOutOfBounds, DegeneratePair (empty
/// mask, or region over kMaxRegionFraction of the image), InvalidArgument.
ReplicaPair composite_pair(const RasterImage& scene, const TriggerAsset& trigger,
                           const Region& placement);

/// Wraps an externally produced pair (e.g. an inpainted photograph).
ReplicaPair external_pair(RasterImage target, RasterImage replica, const Region& diff_region,
                          std::string semantic_label = {});

struct PairAudit {
  double outside_max_diff = 0.0;
  /// Fraction of differing pixels that fall inside diff_region.
  double region_coverage = 1.0;
  /// Tight box around every differing pixel; empty when the images agree.
  std::optional<Region> tight_bbox;
  bool pass = false;
};

inline constexpr double kDefaultAuditTolerance = 2.0;
inline constexpr int kAuditDilation = 2;

/// Checks that target and replica agree outside diff_region (dilated by
/// kAuditDilation). Throws DimensionMismatch.
PairAudit audit_pair(const ReplicaPair& pair, double tolerance = kDefaultAuditTolerance);

/// Pair manifest {target_path, replica_path, diff_region, mode, semantic_label}.
struct PairManifest {
  std::filesystem::path target_path;
  std::filesystem::path replica_path;
  Region diff_region;
  PairMode mode = PairMode::composited;
  std::string semantic_label;
};

void write_pair_manifest(const PairManifest& manifest, const std::filesystem::path& path);
/// Relative image paths are resolved against the manifest's directory.
PairManifest read_pair_manifest(const std::filesystem::path& path);
ReplicaPair load_pair(const PairManifest& manifest);

}  // namespace scalecamo
