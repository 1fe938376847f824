#pragma once

#include <string>

#include "scalecamo/qp.hpp"
#include "scalecamo/raster_image.hpp"
#include "scalecamo/scale_ops.hpp"

namespace scalecamo {

/// Slack allowed when comparing a float residual against epsilon; an exact
/// equality constraint (epsilon = 0) can only be met to solver precision.
inline constexpr double kResidualTolerance = 1e-6;

/// One crafting task: embed `target` into `source` for the given resize.
struct AttackJob {
  RasterImage source;  // clean replica S
  RasterImage target;  // T
  double epsilon = 1.0;
  ScalingOperator op;
};

AttackJob make_job(RasterImage source, RasterImage target, double epsilon, Algorithm algorithm);

struct JobGeometry {
  double ratio_height = 0.0;
  double ratio_width = 0.0;
  /// Axis ratios differ by more than 5%.
  bool unequal_ratios = false;
};

/// Checks the job invariants; throws DimensionMismatch / InvalidArgument.
JobGeometry validate(const AttackJob& job);

enum class CraftStrategy {
  /// Whole-image problem, operator applied separably inside a dual solver.
  joint,
  /// Column problems through the row operator, then row problems through the
  /// column operator, epsilon/2 each.
  two_stage,
};

struct CraftOptions {
  CraftStrategy strategy = CraftStrategy::joint;
  qp::SolverOptions solver{};
  int threads = 1;
};

struct AttackResult {
  RasterImage attack_image;  // A = S + delta, double precision
  double perturbation_energy = 0.0;  // ||delta||_2^2 over all channels
  double residual_linf = 0.0;            // max |scale(A) - T|
  double residual_linf_postquant = 0.0;  // same with A rounded to 8 bits
  int solver_iterations = 0;
  double epsilon = 0.0;       // requested
  double epsilon_used = 0.0;  // after quantization re-runs
  bool converged = true;
  bool replica = true;
  JobGeometry geometry{};
};

/// Minimum-energy perturbation with ||scale(S + delta) - T||_inf <= epsilon and
/// 0 <= S + delta <= 255. Throws Infeasible when no such image exists.
AttackResult craft(const AttackJob& job, const CraftOptions& options = {});

/// Same optimization with an unrelated source image; the result is marked
/// replica = false so reports can separate the two modes.
AttackResult craft_no_replica(const RasterImage& source, const RasterImage& target,
                              double epsilon, const ScalingOperator& op,
                              const CraftOptions& options = {});

struct VerifyReport {
  double residual_linf = 0.0;
  bool pass = false;
};

/// pass iff ||downscale(attack) - target||_inf <= epsilon (+ kResidualTolerance).
VerifyReport verify(const RasterImage& attack, const RasterImage& target,
                    const ScalingOperator& op, double epsilon);

struct PerceptibilityReport {
  double mse = 0.0;
  double ssim = 1.0;
  double max_abs = 0.0;
};

PerceptibilityReport perceptibility(const RasterImage& attack, const RasterImage& source);

/// One JSON object (no trailing newline) for the crafting log.
std::string crafting_log_line(const AttackResult& result, const std::string& job_name = {});

}  // namespace scalecamo
