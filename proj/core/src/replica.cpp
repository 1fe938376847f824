#include "scalecamo/replica.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "scalecamo/error.hpp"

namespace scalecamo {

bool Region::contains(const Region& o) const noexcept {
  return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
}

Region Region::intersect(const Region& o) const noexcept {
  const int x0 = std::max(x, o.x), y0 = std::max(y, o.y);
  const int x1 = std::min(x + w, o.x + o.w), y1 = std::min(y + h, o.y + o.h);
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

Region Region::dilate(int pixels, Size bounds) const noexcept {
  const int x0 = std::max(0, x - pixels), y0 = std::max(0, y - pixels);
  const int x1 = std::min(bounds.width, x + w + pixels);
  const int y1 = std::min(bounds.height, y + h + pixels);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

void validate(const TriggerAsset& t) {
  if (t.patch.empty()) throw Error(ErrorCode::invalid_argument, "trigger patch is empty");
  if (t.mask.size() != static_cast<std::size_t>(t.patch.height()) * t.patch.width()) {
    throw Error(ErrorCode::invalid_argument, "trigger mask size does not match the patch");
  }
  for (auto m : t.mask) {
    if (m > 1) throw Error(ErrorCode::invalid_argument, "trigger mask values must be 0 or 1");
  }
}

std::string_view to_string(PairMode mode) noexcept {
  return mode == PairMode::composited ? "composited" : "external";
}

PairMode parse_pair_mode(std::string_view text) {
  if (text == "composited") return PairMode::composited;
  if (text == "external") return PairMode::external;
  throw Error(ErrorCode::parse_failure, "unknown pair mode: " + std::string(text));
}

namespace {

void check_region_size(const Region& r, Size image) {
  const double fraction = static_cast<double>(r.area()) / (static_cast<double>(image.height) * image.width);
  if (fraction > kMaxRegionFraction) {
    throw Error(ErrorCode::degenerate_pair,
                "diff region covers " + std::to_string(fraction) + " of the image (max 0.5)");
  }
}

}  // namespace

ReplicaPair composite_pair(const RasterImage& scene, const TriggerAsset& trigger,
                           const Region& placement) {
  validate(trigger);
  if (trigger.patch.channels() != scene.channels()) {
    throw Error(ErrorCode::invalid_argument, "trigger and scene channel counts differ");
  }
  if (placement.w != trigger.patch.width() || placement.h != trigger.patch.height()) {
    throw Error(ErrorCode::invalid_argument, "placement size must equal the patch size");
  }
  if (placement.x < 0 || placement.y < 0 || placement.x + placement.w > scene.width() ||
      placement.y + placement.h > scene.height()) {
    throw Error(ErrorCode::placement_out_of_bounds,
                "placement does not fit inside the " + to_string(scene.size()) + " scene");
  }
  if (std::none_of(trigger.mask.begin(), trigger.mask.end(), [](auto m) { return m != 0; })) {
    throw Error(ErrorCode::degenerate_pair, "trigger mask is fully transparent");
  }
  check_region_size(placement, scene.size());

  ReplicaPair pair{scene, scene, placement, PairMode::composited, trigger.semantic_label};
  for (int y = 0; y < placement.h; ++y) {
    for (int x = 0; x < placement.w; ++x) {
      const double alpha = trigger.mask[static_cast<std::size_t>(y) * placement.w + x];
      for (int c = 0; c < scene.channels(); ++c) {
        const double under = scene(placement.y + y, placement.x + x, c);
        pair.target.set(placement.y + y, placement.x + x, c,
                        alpha * trigger.patch(y, x, c) + (1.0 - alpha) * under);
      }
    }
  }
  if (pair.target == pair.replica) {
    throw Error(ErrorCode::degenerate_pair, "trigger leaves the scene unchanged");
  }
  return pair;
}

ReplicaPair external_pair(RasterImage target, RasterImage replica, const Region& diff_region,
                          std::string semantic_label) {
  if (target.size() != replica.size() || target.channels() != replica.channels()) {
    throw Error(ErrorCode::dimension_mismatch, "target and replica differ in shape");
  }
  if (diff_region.empty()) throw Error(ErrorCode::degenerate_pair, "diff region is empty");
  check_region_size(diff_region, target.size());
  return {std::move(target), std::move(replica), diff_region, PairMode::external,
          std::move(semantic_label)};
}

PairAudit audit_pair(const ReplicaPair& pair, double tolerance) {
  const auto& t = pair.target;
  const auto& r = pair.replica;
  if (t.size() != r.size() || t.channels() != r.channels()) {
    throw Error(ErrorCode::dimension_mismatch, "target and replica differ in shape");
  }
  const Region zone = pair.diff_region.dilate(kAuditDilation, t.size());
  PairAudit audit;
  long differing = 0, inside = 0;
  int x0 = t.width(), y0 = t.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      double d = 0.0;
      for (int c = 0; c < t.channels(); ++c) d = std::max(d, std::abs(t(y, x, c) - r(y, x, c)));
      if (d == 0.0) continue;
      ++differing;
      x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
      if (pair.diff_region.contains({x, y, 1, 1})) ++inside;
      if (!zone.contains({x, y, 1, 1})) audit.outside_max_diff = std::max(audit.outside_max_diff, d);
    }
  }
  if (differing > 0) {
    audit.tight_bbox = Region{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    audit.region_coverage = static_cast<double>(inside) / static_cast<double>(differing);
  }
  audit.pass = audit.outside_max_diff <= tolerance;
  return audit;
}

namespace {

nlohmann::ordered_json region_json(const Region& r) {
  return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
}

}  // namespace

void write_pair_manifest(const PairManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["target_path"] = m.target_path.generic_string();
  j["replica_path"] = m.replica_path.generic_string();
  j["diff_region"] = region_json(m.diff_region);
  j["mode"] = std::string(to_string(m.mode));
  j["semantic_label"] = m.semantic_label;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

PairManifest read_pair_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    PairManifest m;
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    m.target_path = resolve(j.at("target_path").get<std::string>());
    m.replica_path = resolve(j.at("replica_path").get<std::string>());
    const auto& r = j.at("diff_region");
    m.diff_region = {r.at("x").get<int>(), r.at("y").get<int>(), r.at("w").get<int>(),
                     r.at("h").get<int>()};
    m.mode = parse_pair_mode(j.value("mode", std::string("external")));
    m.semantic_label = j.value("semantic_label", std::string{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_failure, path.string() + ": " + e.what());
  }
}

ReplicaPair load_pair(const PairManifest& m) {
  ReplicaPair pair = external_pair(read_image(m.target_path), read_image(m.replica_path),
                                   m.diff_region, m.semantic_label);
  pair.mode = m.mode;
  return pair;
}

}  // namespace scalecamo
