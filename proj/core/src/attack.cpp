#include "scalecamo/attack.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "scalecamo/error.hpp"
#include "scalecamo/metrics.hpp"
#include "scalecamo/parallel.hpp"

namespace scalecamo {

namespace {

// Bounds are pulled in by this much so the solver's own feasibility slack
// never pushes the residual past epsilon.
double inner_margin(double epsilon) { return std::min(1e-6, epsilon / 4.0); }

struct ChannelSolve {
  Plane attack;
  int iterations = 0;
  bool converged = true;
};

[[noreturn]] void throw_infeasible(double epsilon) {
  throw Error(ErrorCode::infeasible,
              "target unreachable within epsilon " + std::to_string(epsilon) +
                  " under the [0, 255] box");
}

ChannelSolve solve_joint(const Plane& s, const Plane& t, double epsilon,
                         const ScalingOperator& op, const qp::SolverOptions& options) {
  const double half = epsilon - inner_margin(epsilon);
  std::vector<double> lower(t.values.size()), upper(t.values.size());
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    lower[i] = t.values[i] - half;
    upper[i] = t.values[i] + half;
  }
  const qp::SeparableMap map(op);
  const qp::Solution sol = qp::solve({map, s.values, lower, upper}, options);
  if (sol.infeasible) throw_infeasible(epsilon);
  ChannelSolve out{Plane(s.rows, s.cols), sol.iterations, sol.converged};
  out.attack.values = sol.x;
  return out;
}

// Projects `reference` onto {x in box : |M x - goal| <= budget}.
qp::Solution project_vector(const CoefficientMatrix& m, std::span<const double> reference,
                            std::span<const double> goal, double budget,
                            const qp::SolverOptions& options) {
  std::vector<double> lower(goal.size()), upper(goal.size());
  for (std::size_t i = 0; i < goal.size(); ++i) {
    lower[i] = goal[i] - budget;
    upper[i] = goal[i] + budget;
  }
  const qp::MatrixMap map(m);
  return qp::solve({map, reference, lower, upper}, options);
}

ChannelSolve solve_two_stage(const Plane& s, const Plane& t, double epsilon,
                             const ScalingOperator& op, const CraftOptions& options) {
  const auto& rm = op.row_matrix();
  const auto& cm = op.col_matrix();
  const int src_h = s.rows, src_w = s.cols, dst_w = t.cols;
  const double budget = epsilon / 2.0 - inner_margin(epsilon);

  // Horizontal pass of the clean source: reference for the column problems.
  Plane sh(src_h, dst_w);
  for (int y = 0; y < src_h; ++y) cm.apply(s.row(y), sh.row(y));

  Plane intermediate(src_h, dst_w);
  std::vector<int> iters(static_cast<std::size_t>(std::max(src_h, dst_w)), 0);
  std::vector<char> ok(iters.size(), 1);
  parallel_for(static_cast<std::size_t>(dst_w), options.threads, [&](std::size_t j) {
    std::vector<double> ref(static_cast<std::size_t>(src_h)), goal(static_cast<std::size_t>(t.rows));
    for (int y = 0; y < src_h; ++y) ref[y] = sh(y, static_cast<int>(j));
    for (int y = 0; y < t.rows; ++y) goal[y] = t(y, static_cast<int>(j));
    const auto sol = project_vector(rm, ref, goal, budget, options.solver);
    if (sol.infeasible) throw_infeasible(epsilon);
    for (int y = 0; y < src_h; ++y) intermediate(y, static_cast<int>(j)) = sol.x[y];
    iters[j] = sol.iterations;
    ok[j] = sol.converged;
  });

  ChannelSolve out{Plane(src_h, src_w)};
  for (std::size_t j = 0; j < static_cast<std::size_t>(dst_w); ++j) {
    out.iterations += iters[j];
    out.converged = out.converged && ok[j];
  }
  std::fill(iters.begin(), iters.end(), 0);
  std::fill(ok.begin(), ok.end(), 1);
  parallel_for(static_cast<std::size_t>(src_h), options.threads, [&](std::size_t i) {
    const int y = static_cast<int>(i);
    const auto sol = project_vector(cm, s.row(y), intermediate.row(y), budget, options.solver);
    if (sol.infeasible) throw_infeasible(epsilon);
    std::copy(sol.x.begin(), sol.x.end(), out.attack.row(y).begin());
    iters[i] = sol.iterations;
    ok[i] = sol.converged;
  });
  for (std::size_t i = 0; i < static_cast<std::size_t>(src_h); ++i) {
    out.iterations += iters[i];
    out.converged = out.converged && ok[i];
  }
  return out;
}

double residual(const RasterImage& attack, const RasterImage& target, const ScalingOperator& op) {
  return max_abs_difference(downscale(attack, op), target);
}

AttackResult craft_impl(const RasterImage& source, const RasterImage& target, double epsilon,
                        const ScalingOperator& op, const CraftOptions& options, bool replica) {
  AttackJob job{source, target, epsilon, op};
  AttackResult result;
  result.geometry = validate(job);
  result.epsilon = epsilon;
  result.replica = replica;

  double eps_used = epsilon;
  for (;;) {
    std::vector<ChannelSolve> channels(static_cast<std::size_t>(source.channels()));
    const int channel_threads =
        options.strategy == CraftStrategy::joint ? options.threads : 1;
    parallel_for(channels.size(), channel_threads, [&](std::size_t c) {
      const Plane s = source.plane(static_cast<int>(c));
      const Plane t = target.plane(static_cast<int>(c));
      channels[c] = options.strategy == CraftStrategy::joint
                        ? solve_joint(s, t, eps_used, op, options.solver)
                        : solve_two_stage(s, t, eps_used, op, options);
    });

    std::vector<Plane> planes;
    result.solver_iterations = 0;
    result.converged = true;
    for (auto& ch : channels) {
      result.solver_iterations += ch.iterations;
      result.converged = result.converged && ch.converged;
      planes.push_back(std::move(ch.attack));
    }
    result.attack_image = RasterImage::from_planes(planes);
    result.residual_linf = residual(result.attack_image, target, op);
    result.residual_linf_postquant = residual(result.attack_image.quantized(), target, op);
    result.epsilon_used = eps_used;
    if (result.residual_linf_postquant <= epsilon + 1.0 + kResidualTolerance) break;
    eps_used -= 1.0;
    if (eps_used < 0.0) throw_infeasible(epsilon);
  }

  double energy = 0.0;
  const auto a = result.attack_image.pixels();
  const auto s = source.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) energy += (a[i] - s[i]) * (a[i] - s[i]);
  result.perturbation_energy = energy;
  return result;
}

}  // namespace

AttackJob make_job(RasterImage source, RasterImage target, double epsilon, Algorithm algorithm) {
  auto op = build_operator(algorithm, source.size(), target.size());
  return AttackJob{std::move(source), std::move(target), epsilon, std::move(op)};
}

JobGeometry validate(const AttackJob& job) {
  if (job.source.size() != job.op.source()) {
    throw Error(ErrorCode::dimension_mismatch, "source is " + to_string(job.source.size()) +
                                                   ", operator expects " +
                                                   to_string(job.op.source()));
  }
  if (job.target.size() != job.op.destination()) {
    throw Error(ErrorCode::dimension_mismatch, "target is " + to_string(job.target.size()) +
                                                   ", operator produces " +
                                                   to_string(job.op.destination()));
  }
  if (job.source.channels() != job.target.channels()) {
    throw Error(ErrorCode::dimension_mismatch, "source and target channel counts differ");
  }
  if (!(job.epsilon >= 0.0) || job.epsilon > 255.0) {
    throw Error(ErrorCode::invalid_argument, "epsilon must lie in [0, 255]");
  }
  JobGeometry g;
  g.ratio_height = static_cast<double>(job.source.height()) / job.target.height();
  g.ratio_width = static_cast<double>(job.source.width()) / job.target.width();
  g.unequal_ratios = std::abs(g.ratio_height - g.ratio_width) >
                     0.05 * std::max(g.ratio_height, g.ratio_width);
  return g;
}

AttackResult craft(const AttackJob& job, const CraftOptions& options) {
  return craft_impl(job.source, job.target, job.epsilon, job.op, options, true);
}

AttackResult craft_no_replica(const RasterImage& source, const RasterImage& target,
                              double epsilon, const ScalingOperator& op,
                              const CraftOptions& options) {
  return craft_impl(source, target, epsilon, op, options, false);
}

VerifyReport verify(const RasterImage& attack, const RasterImage& target,
                    const ScalingOperator& op, double epsilon) {
  if (attack.size() != op.source() || target.size() != op.destination() ||
      attack.channels() != target.channels()) {
    throw Error(ErrorCode::dimension_mismatch, "verify: image and operator geometry differ");
  }
  VerifyReport report;
  report.residual_linf = residual(attack, target, op);
  report.pass = report.residual_linf <= epsilon + kResidualTolerance;
  return report;
}

PerceptibilityReport perceptibility(const RasterImage& attack, const RasterImage& source) {
  return {mean_squared_error(attack, source), structural_similarity(attack, source),
          max_abs_difference(attack, source)};
}

std::string crafting_log_line(const AttackResult& result, const std::string& job_name) {
  nlohmann::ordered_json j;
  if (!job_name.empty()) j["job"] = job_name;
  j["event"] = "craft";
  j["replica"] = result.replica;
  j["epsilon"] = result.epsilon;
  j["epsilon_used"] = result.epsilon_used;
  j["ratio"] = {result.geometry.ratio_height, result.geometry.ratio_width};
  j["unequal_ratios"] = result.geometry.unequal_ratios;
  j["energy"] = result.perturbation_energy;
  j["residual_linf"] = result.residual_linf;
  j["residual_linf_postquant"] = result.residual_linf_postquant;
  j["iterations"] = result.solver_iterations;
  j["converged"] = result.converged;
  return j.dump();
}

}  // namespace scalecamo
