#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "oracles.hpp"
#include "scalecamo/error.hpp"
#include "scalecamo/replica.hpp"
#include "temp_dir.hpp"

using namespace scalecamo;

namespace {

TriggerAsset square_trigger(int size, double value, int channels = 3) {
  TriggerAsset t{RasterImage(size, size, channels, value),
                 std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size, 1), "blob"};
  return t;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST(Region, Geometry) {
  const Region a{2, 3, 4, 5};
  EXPECT_EQ(a.area(), 20);
  EXPECT_TRUE(a.contains({3, 4, 1, 1}));
  EXPECT_FALSE(a.contains({5, 7, 2, 2}));
  EXPECT_EQ(a.intersect({4, 0, 10, 5}), (Region{4, 3, 2, 2}));
  EXPECT_TRUE(a.intersect({20, 20, 1, 1}).empty());
  EXPECT_EQ(a.dilate(3, {10, 10}), (Region{0, 0, 9, 10}));
}

TEST(CompositePair, DiffConfinedToPlacement) {
  oracle::Gen g(1);
  const auto scene = g.image(40, 50, 3);
  const auto pair = composite_pair(scene, square_trigger(6, 0.0), {10, 12, 6, 6});
  EXPECT_EQ(pair.diff_region, (Region{10, 12, 6, 6}));
  EXPECT_EQ(pair.replica, scene);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 50; ++x)
      for (int c = 0; c < 3; ++c) {
        const bool inside = x >= 10 && x < 16 && y >= 12 && y < 18;
        EXPECT_EQ(pair.target(y, x, c), inside ? 0.0 : scene(y, x, c));
      }
  const auto audit = audit_pair(pair);
  EXPECT_TRUE(audit.pass);
  EXPECT_EQ(audit.outside_max_diff, 0.0);
}

TEST(CompositePair, PartialMaskShrinksToTouchedPixels) {
  RasterImage scene(20, 20, 1, 100.0);
  auto trig = square_trigger(4, 200.0, 1);
  std::fill(trig.mask.begin(), trig.mask.end(), 0);
  trig.mask[5] = 1;  // (1, 1)
  const auto pair = composite_pair(scene, trig, {3, 4, 4, 4});
  EXPECT_EQ(pair.target(5, 4), 200.0);
  const auto audit = audit_pair(pair);
  ASSERT_TRUE(audit.tight_bbox.has_value());
  EXPECT_EQ(*audit.tight_bbox, (Region{4, 5, 1, 1}));
  EXPECT_TRUE(pair.diff_region.contains(*audit.tight_bbox));
}

TEST(CompositePair, Errors) {
  RasterImage scene(20, 20, 3, 50.0);
  EXPECT_EQ(code_of([&] { composite_pair(scene, square_trigger(6, 0.0), {16, 0, 6, 6}); }),
            ErrorCode::placement_out_of_bounds);
  EXPECT_EQ(code_of([&] { composite_pair(scene, square_trigger(6, 0.0), {0, 0, 5, 6}); }),
            ErrorCode::invalid_argument);
  auto empty = square_trigger(6, 0.0);
  std::fill(empty.mask.begin(), empty.mask.end(), 0);
  EXPECT_EQ(code_of([&] { composite_pair(scene, empty, {0, 0, 6, 6}); }),
            ErrorCode::degenerate_pair);
  EXPECT_EQ(code_of([&] { composite_pair(scene, square_trigger(15, 0.0), {0, 0, 15, 15}); }),
            ErrorCode::degenerate_pair);
  EXPECT_EQ(code_of([&] { composite_pair(scene, square_trigger(6, 50.0), {0, 0, 6, 6}); }),
            ErrorCode::degenerate_pair);
  auto bad = square_trigger(6, 0.0);
  bad.mask[0] = 7;
  EXPECT_THROW(validate(bad), Error);
}

TEST(PairAudit, FlagsDifferencesOutsideRegion) {
  oracle::Gen g(2);
  const auto replica = g.image(30, 30, 1);
  auto target = replica;
  target.set(10, 10, 0, 255.0 - replica(10, 10));
  target.set(25, 2, 0, replica(25, 2) < 128 ? replica(25, 2) + 30 : replica(25, 2) - 30);
  const auto pair = external_pair(target, replica, {8, 8, 5, 5}, "thing");
  const auto audit = audit_pair(pair);
  EXPECT_FALSE(audit.pass);
  EXPECT_NEAR(audit.outside_max_diff, 30.0, 1e-9);
  EXPECT_NEAR(audit.region_coverage, 0.5, 1e-12);
  // Just inside the dilation band is tolerated.
  auto near = replica;
  near.set(10, 10, 0, 255.0 - replica(10, 10));
  near.set(14, 14, 0, replica(14, 14) < 128 ? 255.0 : 0.0);
  EXPECT_TRUE(audit_pair(external_pair(near, replica, {8, 8, 5, 5})).pass);
  EXPECT_THROW(audit_pair(external_pair(RasterImage(3, 3, 1), replica, {0, 0, 1, 1})), Error);
}

TEST(PairAuditProperty, CompositedPairsAlwaysPass) {
  oracle::Gen g(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = g.integer(10, 60), w = g.integer(10, 60);
    const auto scene = g.image(h, w, 3);
    const int ph = g.integer(1, h / 2), pw = g.integer(1, w / 2);
    TriggerAsset t{g.image(ph, pw, 3), {}, "x"};
    for (int i = 0; i < ph * pw; ++i) t.mask.push_back(g.coin(0.7) ? 1 : 0);
    t.mask[0] = 1;
    const Region at{g.integer(0, w - pw), g.integer(0, h - ph), pw, ph};
    ReplicaPair pair;
    try {
      pair = composite_pair(scene, t, at);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::degenerate_pair);
      continue;
    }
    const auto audit = audit_pair(pair, 0.0);
    EXPECT_TRUE(audit.pass);
    EXPECT_EQ(audit.region_coverage, 1.0);
    ASSERT_TRUE(audit.tight_bbox.has_value());
    EXPECT_TRUE(at.contains(*audit.tight_bbox));
  }
}

TEST(PairManifest, RoundTripAndLoad) {
  testutil::TempDir dir("replica-manifest");
  oracle::Gen g(4);
  const auto scene = g.image(24, 24, 3).quantized();
  const auto pair = composite_pair(scene, square_trigger(5, 255.0), {3, 3, 5, 5});
  write_png(pair.target, dir / "t.png");
  write_png(pair.replica, dir / "r.png");
  const PairManifest m{"t.png", "r.png", pair.diff_region, PairMode::composited, "blob"};
  write_pair_manifest(m, dir / "pair.json");
  const auto back = read_pair_manifest(dir / "pair.json");
  EXPECT_EQ(back.target_path, dir / "t.png");
  EXPECT_EQ(back.diff_region, pair.diff_region);
  EXPECT_EQ(back.mode, PairMode::composited);
  EXPECT_EQ(back.semantic_label, "blob");
  const auto loaded = load_pair(back);
  EXPECT_EQ(loaded.target, pair.target);
  EXPECT_EQ(loaded.replica, pair.replica);
  EXPECT_EQ(parse_pair_mode(to_string(PairMode::external)), PairMode::external);
  EXPECT_THROW(read_pair_manifest(dir / "missing.json"), Error);
}
