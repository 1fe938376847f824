#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scalecamo/qp.hpp"

using namespace scalecamo;

namespace {

struct Instance {
  CoefficientMatrix m;
  std::vector<double> s, lo, hi;
};

// Feasible by construction: the bounds surround M applied to a point of the box.
Instance random_instance(oracle::Gen& g, int src, int dst, Algorithm alg, double eps) {
  Instance in{axis_weights(alg, src, dst), {}, {}, {}};
  std::vector<double> x(static_cast<std::size_t>(src));
  for (auto& v : x) v = g.coin(0.2) ? (g.coin() ? 0.0 : 255.0) : g.uniform(0, 255);
  in.s.resize(x.size());
  for (auto& v : in.s) v = g.uniform(0, 255);
  std::vector<double> mx(static_cast<std::size_t>(dst));
  in.m.apply(x, mx);
  for (double v : mx) {
    const double t = v + g.uniform(-eps, eps);
    in.lo.push_back(t - eps);
    in.hi.push_back(t + eps);
  }
  return in;
}

double oracle_objective(const Instance& in) {
  const auto dense = in.m.to_dense();
  return oracle::hildreth(dense, in.m.rows(), in.m.cols(), in.s, in.lo, in.hi, 0.0, 255.0).objective;
}

}  // namespace

TEST(ActiveSet, MatchesHildrethOnSmallProblems) {
  oracle::Gen g(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int src = g.integer(2, 40);
    const int dst = g.integer(1, src);
    const auto in = random_instance(g, src, dst, g.algorithm(), g.uniform(0.0, 3.0));
    const qp::MatrixMap map(in.m);
    const auto sol = qp::solve_active_set({map, in.s, in.lo, in.hi});
    ASSERT_TRUE(sol.converged);
    EXPECT_LE(sol.max_violation, 1e-8);
    const double ref = oracle_objective(in);
    EXPECT_NEAR(sol.objective, ref, 1e-6 * std::max(1.0, ref));
  }
}

TEST(DualGradient, MatchesHildrethOnLargerProblems) {
  oracle::Gen g(32);
  for (int trial = 0; trial < 20; ++trial) {
    const int src = g.integer(64, 200);
    const int dst = g.integer(8, src / 2);
    const auto in = random_instance(g, src, dst, g.algorithm(), g.uniform(0.0, 3.0));
    const qp::MatrixMap map(in.m);
    const auto sol = qp::solve_dual_gradient({map, in.s, in.lo, in.hi});
    ASSERT_TRUE(sol.converged);
    EXPECT_LE(sol.max_violation, 1e-7);
    for (double v : sol.x) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 255.0);
    }
    const double ref = oracle_objective(in);
    EXPECT_NEAR(sol.objective, ref, 1e-5 * std::max(1.0, ref));
  }
}

TEST(DualGradient, SeparableMapAgreesWithDenseKronecker) {
  oracle::Gen g(33);
  const auto op = build_operator(Algorithm::bilinear, {12, 10}, {5, 4});
  const qp::SeparableMap map(op);
  ASSERT_EQ(map.rows(), 20u);
  ASSERT_EQ(map.cols(), 120u);
  const auto dense = oracle::dense_resize_matrix(Algorithm::bilinear, {12, 10}, {5, 4});
  std::vector<double> x(120), y(20), ref(20, 0.0);
  for (auto& v : x) v = g.uniform(0, 255);
  map.apply(x, y);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 120; ++j) ref[i] += dense[static_cast<std::size_t>(i) * 120 + j] * x[j];
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(y[i], ref[i], 1e-9);
}

TEST(Solvers, DetectInfeasibility) {
  const auto m = axis_weights(Algorithm::area, 4, 2);
  const qp::MatrixMap map(m);
  const std::vector<double> s{10, 20, 30, 40};
  const std::vector<double> lo{300, 0}, hi{310, 255};  // mean of two pixels above 255
  EXPECT_TRUE(qp::solve_active_set({map, s, lo, hi}).infeasible);
  qp::SolverOptions fast;
  fast.max_iterations = 2000;
  EXPECT_TRUE(qp::solve_dual_gradient({map, s, lo, hi}, fast).infeasible);
}

TEST(Solvers, AlreadyFeasibleReferenceIsReturned) {
  const auto m = axis_weights(Algorithm::bilinear, 6, 3);
  const qp::MatrixMap map(m);
  const std::vector<double> s{10, 20, 30, 40, 50, 60};
  std::vector<double> ms(3);
  m.apply(s, ms);
  const auto sol = qp::solve({map, s, ms, ms});
  EXPECT_NEAR(sol.objective, 0.0, 1e-12);
}
