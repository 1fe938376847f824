#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <limits>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scalecamo/attack.hpp"
#include "scalecamo/error.hpp"
#include "scalecamo/metrics.hpp"
#include "scalecamo/synthetic.hpp"

using namespace scalecamo;

namespace {

RasterImage formula_image(int h, int w, int a, int b, int c) {
  RasterImage img(h, w, 1);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) img.set(i, j, 0, (i * a + j * b + c) % 256);
  return img;
}

// A target reachable within epsilon: resample a point of the box (with some
// saturated pixels) and jitter by less than epsilon.
RasterImage reachable_target(oracle::Gen& g, Size src, Size dst, Algorithm alg, double eps,
                             int channels) {
  RasterImage x(src.height, src.width, channels);
  for (int y = 0; y < src.height; ++y)
    for (int xx = 0; xx < src.width; ++xx)
      for (int c = 0; c < channels; ++c)
        x.set(y, xx, c, g.coin(0.15) ? (g.coin() ? 0.0 : 255.0) : g.uniform(0, 255));
  const auto base = downscale(x, build_operator(alg, src, dst));
  RasterImage t(dst.height, dst.width, channels);
  for (int y = 0; y < dst.height; ++y)
    for (int xx = 0; xx < dst.width; ++xx)
      for (int c = 0; c < channels; ++c)
        t.set(y, xx, c, base(y, xx, c) + g.uniform(-0.9, 0.9) * eps);
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

TEST(Craft, SourceAlreadyOnTargetGivesZeroPerturbation) {
  oracle::Gen g(1);
  const auto s = g.image(6, 6, 3);
  const auto r = craft(make_job(s, s, 0.0, Algorithm::bilinear));
  EXPECT_NEAR(r.perturbation_energy, 0.0, 1e-12);
  EXPECT_TRUE(r.replica);
}

TEST(Craft, NearestExactTouchesOnlySampledPixels) {
  oracle::Gen g(2);
  const auto s = g.image(4, 4, 1);
  const auto t = g.image(2, 2, 1);
  const auto r = craft(make_job(s, t, 0.0, Algorithm::nearest));
  double expected = 0.0;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const bool sampled = y % 2 == 1 && x % 2 == 1;
      const double d = r.attack_image(y, x) - s(y, x);
      if (sampled) {
        expected += (t(y / 2, x / 2) - s(y, x)) * (t(y / 2, x / 2) - s(y, x));
      } else {
        EXPECT_NEAR(d, 0.0, 1e-9);
      }
    }
  }
  EXPECT_NEAR(r.perturbation_energy, expected, 1e-6 * std::max(1.0, expected));
}

TEST(Craft, Bilinear8To4MatchesDenseOracle) {
  oracle::Gen g(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = g.image(8, 8, 1);
    const auto t = g.image(4, 4, 1);  // ratio 2: disjoint 2x2 taps, any target is reachable
    const auto r = craft(make_job(s, t, 1.0, Algorithm::bilinear));
    const double ref = oracle::dense_attack_objective(s, t, Algorithm::bilinear, 1.0);
    EXPECT_NEAR(r.perturbation_energy, ref, 1e-4 * ref);
  }
}

TEST(Craft, FrozenReferenceObjectives) {
  // Reference values from an interior-point conic solver run at 1e-12 gaps.
  {
    const auto s = formula_image(16, 16, 37, 91, 13);
    const auto t = formula_image(8, 8, 53, 29, 200);
    const auto r = craft(make_job(s, t, 1.0, Algorithm::bilinear));
    EXPECT_NEAR(r.perturbation_energy, 1677172.8333339454, 1e-4 * 1677172.83);
  }
  {
    const auto s = formula_image(12, 12, 41, 7, 100);
    const auto x = formula_image(12, 12, 17, 23, 0);
    const auto op = build_operator(Algorithm::area, {12, 12}, {8, 8});
    const auto base = op.apply(x.plane(0));
    RasterImage t(8, 8, 1);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) t.set(i, j, 0, base(i, j) + ((i + 2 * j) % 3 - 1) * 0.5);
    const auto r = craft(AttackJob{s, t, 1.0, op});
    EXPECT_NEAR(r.perturbation_energy, 1271478.0864364756, 1e-4 * 1271478.09);
  }
  {
    const auto s = formula_image(13, 11, 29, 61, 7);
    RasterImage x(13, 11, 1);
    for (int i = 0; i < 13; ++i)
      for (int j = 0; j < 11; ++j) x.set(i, j, 0, (i + j) % 4 == 0 ? 255.0 : (i * 13 + j * 5) % 256);
    const auto op = build_operator(Algorithm::bilinear, {13, 11}, {8, 8});
    const auto base = op.apply(x.plane(0));
    RasterImage t(8, 8, 1);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        t.set(i, j, 0, std::clamp(base(i, j) + ((2 * i + j) % 5 - 2) * 0.75, 0.0, 255.0));
    const auto r = craft(AttackJob{s, t, 2.0, op});
    EXPECT_NEAR(r.perturbation_energy, 917257.4954299056, 1e-4 * 917257.5);
  }
}

TEST(Craft, InfeasibleTarget) {
  // 1x3 -> 1x2 bilinear taps (0.75, 0.25) and (0.75, 0.25) shifted by one:
  // output 0 = 255 forces x0 = x1 = 255, then output 1 cannot reach 0.
  RasterImage s(1, 3, 1, 100.0);
  RasterImage t(1, 2, 1, std::vector<double>{255.0, 0.0});
  EXPECT_EQ(code_of([&] { craft(make_job(s, t, 0.0, Algorithm::bilinear)); }),
            ErrorCode::infeasible);
  CraftOptions two;
  two.strategy = CraftStrategy::two_stage;
  EXPECT_EQ(code_of([&] { craft(make_job(s, t, 0.0, Algorithm::bilinear), two); }),
            ErrorCode::infeasible);
}

TEST(Craft, DimensionMismatch) {
  RasterImage s(10, 10, 1), t(4, 4, 1);
  const auto op = build_operator(Algorithm::bilinear, {10, 10}, {5, 5});
  EXPECT_EQ(code_of([&] { craft(AttackJob{s, t, 1.0, op}); }), ErrorCode::dimension_mismatch);
  EXPECT_EQ(code_of([&] { craft(AttackJob{s, RasterImage(5, 5, 1), -1.0, op}); }),
            ErrorCode::invalid_argument);
}

TEST(Craft, UnequalRatiosAreFlagged) {
  oracle::Gen g(4);
  const auto s = g.image(30, 20, 1);
  const auto t = g.image(10, 10, 1);
  const auto r = craft(make_job(s, t, 2.0, Algorithm::area));
  EXPECT_TRUE(r.geometry.unequal_ratios);
  EXPECT_DOUBLE_EQ(r.geometry.ratio_height, 3.0);
  EXPECT_DOUBLE_EQ(r.geometry.ratio_width, 2.0);
}

TEST(Craft, TwoStageStaysFeasibleAndNeverBeatsJoint) {
  oracle::Gen g(5);
  int solved = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const Size src{g.integer(9, 30), g.integer(9, 30)};
    const Size dst{src.height / 3, src.width / 3};
    const auto alg = trial % 2 ? Algorithm::bilinear : Algorithm::area;
    const auto s = g.image(src.height, src.width, 1);
    const auto t = reachable_target(g, src, dst, alg, 2.0, 1);
    CraftOptions two;
    two.strategy = CraftStrategy::two_stage;
    const auto job = make_job(s, t, 2.0, alg);
    const auto joint = craft(job);
    // Splitting epsilon between the stages can lose feasibility near the box.
    AttackResult staged;
    try {
      staged = craft(job, two);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::infeasible);
      continue;
    }
    ++solved;
    EXPECT_LE(staged.residual_linf, 2.0 + kResidualTolerance);
    EXPECT_GE(staged.perturbation_energy, joint.perturbation_energy * (1 - 1e-6));
  }
  EXPECT_GE(solved, 4);
}

TEST(Craft, TwoStageIsExactForSingleTapRatios) {
  oracle::Gen g(6);
  const auto s = g.image(15, 15, 1);
  const auto t = g.image(5, 5, 1);
  const auto job = make_job(s, t, 1.0, Algorithm::bilinear);  // ratio 3: one tap per output
  CraftOptions two;
  two.strategy = CraftStrategy::two_stage;
  const double joint = craft(job).perturbation_energy;
  EXPECT_NEAR(craft(job, two).perturbation_energy, joint, 1e-4 * joint);
}

TEST(Craft, ThreadCountDoesNotChangeResult) {
  oracle::Gen g(7);
  const auto s = g.image(24, 24, 3);
  const auto t = reachable_target(g, {24, 24}, {8, 8}, Algorithm::bilinear, 1.0, 3);
  const auto job = make_job(s, t, 1.0, Algorithm::bilinear);
  CraftOptions many;
  many.threads = 3;
  EXPECT_EQ(craft(job).attack_image, craft(job, many).attack_image);
  many.strategy = CraftStrategy::two_stage;
  CraftOptions one = many;
  one.threads = 1;
  EXPECT_EQ(craft(job, one).attack_image, craft(job, many).attack_image);
}

TEST(CraftNoReplica, FlagAndNearZeroForUpscaledSource) {
  oracle::Gen g(8);
  const auto t = g.image(6, 6, 3).quantized();
  const auto s = upscale(t, Algorithm::nearest, {18, 18});
  const auto op = build_operator(Algorithm::nearest, {18, 18}, {6, 6});
  const auto r = craft_no_replica(s, t, 1.0, op);
  EXPECT_FALSE(r.replica);
  EXPECT_LE(max_abs_difference(r.attack_image.quantized(), s), 0.0);
}

TEST(CraftNoReplica, UnrelatedSourceIsMorePerceptible) {
  const Size large{100, 100}, small{20, 20};
  const auto f = synthetic::attack_fixture(11, large, small);
  const auto other = synthetic::scene(9999, large);
  const auto op = build_operator(Algorithm::bilinear, large, small);
  const auto with = craft(AttackJob{f.replica, f.target, 1.0, op});
  const auto without = craft_no_replica(other, f.target, 1.0, op);
  EXPECT_LE(without.residual_linf, 1.0 + kResidualTolerance);
  EXPECT_GT(perceptibility(without.attack_image, other).mse,
            perceptibility(with.attack_image, f.replica).mse);
}

TEST(Verify, CraftedPassesUnmodifiedFails) {
  oracle::Gen g(9);
  const auto s = g.image(12, 12, 1);
  const auto t = g.image(6, 6, 1);
  const auto job = make_job(s, t, 1.0, Algorithm::bilinear);
  EXPECT_TRUE(verify(craft(job).attack_image, t, job.op, 1.0).pass);

  RasterImage flat(12, 12, 1, 100.0);
  RasterImage tgt(6, 6, 1, 100.0);
  tgt.set(2, 3, 0, 140.0);
  const auto v = verify(flat, tgt, job.op, 5.0);
  EXPECT_FALSE(v.pass);
  EXPECT_NEAR(v.residual_linf, 40.0, 1e-9);
  EXPECT_THROW(verify(flat, RasterImage(5, 5, 1), job.op, 1.0), Error);
}

TEST(Perceptibility, IdenticalAndRatioTrend) {
  oracle::Gen g(10);
  const auto a = g.image(9, 9, 3);
  const auto p = perceptibility(a, a);
  EXPECT_EQ(p.mse, 0.0);
  EXPECT_EQ(p.ssim, 1.0);
  EXPECT_EQ(p.max_abs, 0.0);

  const Size small{16, 16};
  const auto f3 = synthetic::attack_fixture(12, {48, 48}, small);
  const auto f5 = synthetic::attack_fixture(12, {80, 80}, small);
  const auto r3 = craft(make_job(f3.replica, f3.target, 1.0, Algorithm::bilinear));
  const auto r5 = craft(make_job(f5.replica, f5.target, 1.0, Algorithm::bilinear));
  EXPECT_LT(perceptibility(r5.attack_image, f5.replica).mse,
            perceptibility(r3.attack_image, f3.replica).mse);
}

TEST(AttackProperty, FeasibleBoxedAndQuantizationSlack) {
  oracle::Gen g(11);
  for (int trial = 0; trial < 15; ++trial) {
    const Size src{g.integer(8, 40), g.integer(8, 40)};
    const Size dst{g.integer(2, src.height / 2), g.integer(2, src.width / 2)};
    const auto alg = g.algorithm();
    const double eps = g.uniform(0.0, 5.0);
    const auto s = g.image(src.height, src.width, g.coin() ? 3 : 1);
    const auto t = reachable_target(g, src, dst, alg, eps, s.channels());
    const auto r = craft(make_job(s, t, eps, alg));
    EXPECT_LE(r.residual_linf, eps + kResidualTolerance);
    EXPECT_LE(r.residual_linf_postquant, eps + 1.0 + kResidualTolerance);
    for (double v : r.attack_image.pixels()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 255.0);
    }
  }
}

TEST(AttackProperty, EnergyNonIncreasingInEpsilon) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 6; ++trial) {
    const auto alg = g.algorithm();
    const auto s = g.image(20, 20, 1);
    const auto t = reachable_target(g, {20, 20}, {10, 10}, alg, 0.0, 1);
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {0.0, 1.0, 2.0, 5.0}) {
      const double e = craft(make_job(s, t, eps, alg)).perturbation_energy;
      EXPECT_LE(e, previous * (1 + 1e-6) + 1e-9);
      previous = e;
    }
  }
}

TEST(AttackProperty, PerturbationStaysWhereTheTargetChanged) {
  oracle::Gen g(13);
  for (auto alg : {Algorithm::nearest, Algorithm::bilinear, Algorithm::area}) {
    const Size src{36, 36}, dst{12, 12};
    const auto op = build_operator(alg, src, dst);
    const auto s = g.image(src.height, src.width, 1);
    auto t = downscale(s, op);
    const Region changed{4, 5, 3, 2};  // destination pixels
    for (int y = changed.y; y < changed.y + changed.h; ++y)
      for (int x = changed.x; x < changed.x + changed.w; ++x) t.set(y, x, 0, 255.0 - t(y, x));
    const auto r = craft(AttackJob{s, t, 0.5, op});
    // Source rows/cols reached by the changed destination rows/cols.
    std::vector<bool> rows(36, false), cols(36, false);
    for (int y = changed.y; y < changed.y + changed.h; ++y)
      for (const auto& e : op.row_matrix().row(y)) rows[e.col] = true;
    for (int x = changed.x; x < changed.x + changed.w; ++x)
      for (const auto& e : op.col_matrix().row(x)) cols[e.col] = true;
    for (int y = 0; y < 36; ++y)
      for (int x = 0; x < 36; ++x)
        if (!(rows[y] && cols[x])) {
          ASSERT_NEAR(r.attack_image(y, x), s(y, x), 1e-6) << to_string(alg);
        }
  }
}

TEST(CraftingLog, CarriesJobFields) {
  oracle::Gen g(14);
  const auto s = g.image(9, 9, 1);
  const auto t = g.image(3, 3, 1);
  const auto r = craft(make_job(s, t, 1.0, Algorithm::nearest));
  const auto j = nlohmann::json::parse(crafting_log_line(r, "job-1"));
  EXPECT_EQ(j["job"], "job-1");
  EXPECT_EQ(j["epsilon"], 1.0);
  EXPECT_EQ(j["ratio"][0], 3.0);
  EXPECT_TRUE(j.contains("energy"));
  EXPECT_TRUE(j.contains("residual_linf"));
  EXPECT_TRUE(j.contains("residual_linf_postquant"));
  EXPECT_TRUE(j.contains("iterations"));
  EXPECT_EQ(j["replica"], true);
}
