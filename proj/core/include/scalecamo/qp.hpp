#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scalecamo/scale_ops.hpp"

/// Projection problems of the form
///
///     minimize    ||x - s||^2
///     subject to  box_lower <= x <= box_upper
///                 lower <= M x <= upper
///
/// which is what every attack subproblem reduces to: stay as close as possible
/// to the source while the resampled result stays inside an L-inf tube.
namespace scalecamo::qp {

class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
  virtual void apply_transpose(std::span<const double> y, std::span<double> x) const = 0;
  /// Upper bound on the squared spectral norm.
  virtual double norm_sq_bound() const = 0;
};

/// One interpolation axis.
class MatrixMap final : public LinearMap {
 public:
  explicit MatrixMap(const CoefficientMatrix& m) : m_(m) {}
  std::size_t rows() const override { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const override { return static_cast<std::size_t>(m_.cols()); }
  void apply(std::span<const double> x, std::span<double> y) const override { m_.apply(x, y); }
  void apply_transpose(std::span<const double> y, std::span<double> x) const override {
    m_.apply_transpose(y, x);
  }
  double norm_sq_bound() const override { return m_.max_row_sum() * m_.max_col_sum(); }

 private:
  const CoefficientMatrix& m_;
};

/// Whole-plane operator X -> R X C^T on row-major flattened planes. Holds a
/// scratch buffer, so one instance must not be shared between threads.
class SeparableMap final : public LinearMap {
 public:
  explicit SeparableMap(const ScalingOperator& op);
  std::size_t rows() const override;
  std::size_t cols() const override;
  void apply(std::span<const double> x, std::span<double> y) const override;
  void apply_transpose(std::span<const double> y, std::span<double> x) const override;
  double norm_sq_bound() const override;

 private:
  const ScalingOperator& op_;
  mutable std::vector<double> scratch_;
};

struct ProjectionProblem {
  const LinearMap& map;
  std::span<const double> reference;  // s
  std::span<const double> lower;      // per row of M
  std::span<const double> upper;
  double box_lower = 0.0;
  double box_upper = 255.0;
};

struct SolverOptions {
  /// Relative duality gap on the objective.
  double objective_tolerance = 1e-6;
  /// Max violation of lower <= M x <= upper accepted as converged.
  double feasibility_tolerance = 1e-7;
  int max_iterations = 20000;
  /// Problems with fewer variables go to the exact active-set solver.
  std::size_t active_set_below = 64;
};

struct Solution {
  std::vector<double> x;
  double objective = 0.0;  // ||x - s||^2
  int iterations = 0;
  double max_violation = 0.0;
  bool converged = false;
  bool infeasible = false;
};

/// Accelerated projected gradient on the dual (FISTA with adaptive restart,
/// step 1/L). The primal iterate is always inside the box.
Solution solve_dual_gradient(const ProjectionProblem& problem, const SolverOptions& options = {});

/// Exact dual active-set method (Goldfarb-Idnani with identity Hessian) on the
/// densified constraint matrix. Intended for small problems.
Solution solve_active_set(const ProjectionProblem& problem, const SolverOptions& options = {});

/// Dispatches on problem size.
Solution solve(const ProjectionProblem& problem, const SolverOptions& options = {});

/// max_i of the violation of lower_i <= (M x)_i <= upper_i.
double constraint_violation(const LinearMap& map, std::span<const double> x,
                            std::span<const double> lower, std::span<const double> upper);

}  // namespace scalecamo::qp
