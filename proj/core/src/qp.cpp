#include "scalecamo/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scalecamo/error.hpp"

namespace scalecamo::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const ProjectionProblem& p) {
  const std::size_t m = p.map.rows();
  if (p.reference.size() != p.map.cols() || p.lower.size() != m || p.upper.size() != m) {
    throw Error(ErrorCode::dimension_mismatch, "projection problem sizes are inconsistent");
  }
  if (p.box_lower > p.box_upper) {
    throw Error(ErrorCode::invalid_argument, "empty box");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (p.lower[i] > p.upper[i]) {
      throw Error(ErrorCode::invalid_argument, "constraint lower bound exceeds upper bound");
    }
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

}  // namespace

SeparableMap::SeparableMap(const ScalingOperator& op)
    : op_(op),
      scratch_(static_cast<std::size_t>(op.source().height) * op.destination().width) {}

std::size_t SeparableMap::rows() const {
  return static_cast<std::size_t>(op_.destination().height) * op_.destination().width;
}

std::size_t SeparableMap::cols() const {
  return static_cast<std::size_t>(op_.source().height) * op_.source().width;
}

void SeparableMap::apply(std::span<const double> x, std::span<double> y) const {
  const auto src_h = static_cast<std::size_t>(op_.source().height);
  const auto src_w = static_cast<std::size_t>(op_.source().width);
  const auto dst_h = static_cast<std::size_t>(op_.destination().height);
  const auto dst_w = static_cast<std::size_t>(op_.destination().width);
  const auto& rows = op_.row_matrix();
  const auto& cols = op_.col_matrix();

  std::span<double> tmp(scratch_);
  for (std::size_t r = 0; r < src_h; ++r) {
    cols.apply(x.subspan(r * src_w, src_w), tmp.subspan(r * dst_w, dst_w));
  }
  for (std::size_t i = 0; i < dst_h; ++i) {
    double* out = y.data() + i * dst_w;
    std::fill(out, out + dst_w, 0.0);
    for (const auto& e : rows.row(static_cast<int>(i))) {
      const double* in = tmp.data() + static_cast<std::size_t>(e.col) * dst_w;
      for (std::size_t j = 0; j < dst_w; ++j) out[j] += e.weight * in[j];
    }
  }
}

void SeparableMap::apply_transpose(std::span<const double> y, std::span<double> x) const {
  const auto src_h = static_cast<std::size_t>(op_.source().height);
  const auto src_w = static_cast<std::size_t>(op_.source().width);
  const auto dst_h = static_cast<std::size_t>(op_.destination().height);
  const auto dst_w = static_cast<std::size_t>(op_.destination().width);
  const auto& rows = op_.row_matrix();
  const auto& cols = op_.col_matrix();

  std::span<double> tmp(scratch_);
  std::fill(tmp.begin(), tmp.end(), 0.0);
  for (std::size_t i = 0; i < dst_h; ++i) {
    const double* in = y.data() + i * dst_w;
    for (const auto& e : rows.row(static_cast<int>(i))) {
      double* out = tmp.data() + static_cast<std::size_t>(e.col) * dst_w;
      for (std::size_t j = 0; j < dst_w; ++j) out[j] += e.weight * in[j];
    }
  }
  for (std::size_t r = 0; r < src_h; ++r) {
    cols.apply_transpose(tmp.subspan(r * dst_w, dst_w), x.subspan(r * src_w, src_w));
  }
}

double SeparableMap::norm_sq_bound() const {
  const auto& r = op_.row_matrix();
  const auto& c = op_.col_matrix();
  return r.max_row_sum() * r.max_col_sum() * c.max_row_sum() * c.max_col_sum();
}

double constraint_violation(const LinearMap& map, std::span<const double> x,
                            std::span<const double> lower, std::span<const double> upper) {
  std::vector<double> mx(map.rows());
  map.apply(x, mx);
  double worst = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    worst = std::max({worst, lower[i] - mx[i], mx[i] - upper[i]});
  }
  return worst;
}

Solution solve_dual_gradient(const ProjectionProblem& p, const SolverOptions& options) {
  check_problem(p);
  const std::size_t n = p.map.cols();
  const std::size_t m = p.map.rows();
  const auto s = p.reference;

  Solution sol;
  sol.x.assign(n, 0.0);
  std::vector<double> lam(m, 0.0), lam_next(m, 0.0), y(m, 0.0), mx(m, 0.0), tmp(n, 0.0);

  auto primal_at = [&](std::span<const double> dual) {
    p.map.apply_transpose(dual, tmp);
    for (std::size_t j = 0; j < n; ++j) {
      sol.x[j] = std::clamp(s[j] - tmp[j], p.box_lower, p.box_upper);
    }
    p.map.apply(sol.x, mx);
  };

  // Evaluates the iterate at `lam`; true once primal feasibility and the
  // duality gap are both within tolerance.
  auto converged_at_lam = [&]() {
    primal_at(lam);
    double violation = 0.0;
    double gap = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      violation = std::max({violation, p.lower[i] - mx[i], mx[i] - p.upper[i]});
      gap += std::max(lam[i] * p.upper[i], lam[i] * p.lower[i]) - lam[i] * mx[i];
    }
    const double half_obj = 0.5 * squared_distance(sol.x, s);
    sol.max_violation = violation;
    sol.objective = 2.0 * half_obj;
    return violation <= options.feasibility_tolerance &&
           std::abs(gap) <= options.objective_tolerance * std::max(1.0, half_obj);
  };

  const double lipschitz = p.map.norm_sq_bound();
  if (m == 0 || lipschitz <= 0.0) {
    lam.assign(m, 0.0);
    sol.converged = converged_at_lam();
    sol.infeasible = !sol.converged;
    return sol;
  }
  const double step = 1.0 / lipschitz;
  constexpr int kCheckEvery = 5;

  double theta = 1.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    primal_at(y);
    double restart = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      // prox of the support function of [lower, upper]
      const double v = y[i] + step * mx[i];
      lam_next[i] = v - step * std::clamp(v / step, p.lower[i], p.upper[i]);
      restart += (y[i] - lam_next[i]) * (lam_next[i] - lam[i]);
    }
    if (restart > 0.0) theta = 1.0;
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double beta = (theta - 1.0) / theta_next;
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = lam_next[i] + beta * (lam_next[i] - lam[i]);
    }
    lam.swap(lam_next);
    theta = theta_next;

    if (it % kCheckEvery == 0 || it == options.max_iterations) {
      sol.iterations = it;
      if (converged_at_lam()) {
        sol.converged = true;
        return sol;
      }
    }
  }
  sol.infeasible = sol.max_violation > 1e3 * options.feasibility_tolerance;
  return sol;
}

namespace {

// Goldfarb-Idnani for  min 1/2 x'x - s'x  s.t.  a_k' x >= b_k.
// J starts at the identity (the inverse Cholesky factor of the Hessian);
// R holds the triangular factor of the active constraint normals.
class ActiveSetSolver {
 public:
  ActiveSetSolver(std::size_t n, std::vector<double> normals, std::vector<double> offsets)
      : n_(n),
        p_(offsets.size()),
        a_(std::move(normals)),
        b_(std::move(offsets)),
        j_(n * n, 0.0),
        r_(n * n, 0.0),
        active_(n + 1, 0),
        u_(n + 1, 0.0),
        is_active_(p_, false) {
    for (std::size_t i = 0; i < n; ++i) j_[i * n + i] = 1.0;
  }

  // Returns false if the constraints are inconsistent.
  bool run(std::vector<double>& x, int max_iterations, int& iterations) {
    std::vector<double> d(n_), z(n_), r(n_ + 1);
    const double tol = 1e-9;
    iterations = 0;

    while (iterations < max_iterations) {
      ++iterations;
      // Step 1: most violated inactive constraint.
      std::size_t ip = p_;
      double worst = -tol;
      for (std::size_t k = 0; k < p_; ++k) {
        if (is_active_[k]) continue;
        const double slack = dot(k, x) - b_[k];
        if (slack < worst) {
          worst = slack;
          ip = k;
        }
      }
      if (ip == p_) return true;

      double slack_p = worst;
      u_[iq_] = 0.0;

      // Step 2: move until the chosen constraint is satisfied.
      for (;;) {
        const double* np = &a_[ip * n_];
        for (std::size_t i = 0; i < n_; ++i) {
          double acc = 0.0;
          for (std::size_t k = 0; k < n_; ++k) acc += j_[k * n_ + i] * np[k];
          d[i] = acc;
        }
        double z_norm = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
          double acc = 0.0;
          for (std::size_t i = iq_; i < n_; ++i) acc += j_[k * n_ + i] * d[i];
          z[k] = acc;
          z_norm = std::max(z_norm, std::abs(acc));
        }
        for (std::size_t ii = iq_; ii-- > 0;) {
          double acc = d[ii];
          for (std::size_t jj = ii + 1; jj < iq_; ++jj) acc -= r_[ii * n_ + jj] * r[jj];
          r[ii] = acc / r_[ii * n_ + ii];
        }

        double t1 = kInf;
        std::size_t drop = n_ + 1;
        for (std::size_t k = 0; k < iq_; ++k) {
          if (r[k] > 0.0 && u_[k] / r[k] < t1) {
            t1 = u_[k] / r[k];
            drop = k;
          }
        }
        double t2 = kInf;
        if (z_norm > 1e-12) {
          double znp = 0.0;
          for (std::size_t k = 0; k < n_; ++k) znp += z[k] * np[k];
          t2 = -slack_p / znp;
        }
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) return false;

        if (!std::isfinite(t2)) {
          // Dual-only step, then drop the blocking constraint.
          for (std::size_t k = 0; k < iq_; ++k) u_[k] -= t * r[k];
          u_[iq_] += t;
          remove_constraint(drop);
          continue;
        }

        for (std::size_t k = 0; k < n_; ++k) x[k] += t * z[k];
        for (std::size_t k = 0; k < iq_; ++k) u_[k] -= t * r[k];
        u_[iq_] += t;

        if (t == t2) {
          if (!add_constraint(d)) return false;
          active_[iq_ - 1] = ip;
          is_active_[ip] = true;
          break;
        }
        remove_constraint(drop);
        slack_p = dot(ip, x) - b_[ip];
      }
    }
    return true;
  }

 private:
  double dot(std::size_t k, const std::vector<double>& x) const {
    const double* a = &a_[k * n_];
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) acc += a[i] * x[i];
    return acc;
  }

  bool add_constraint(std::vector<double>& d) {
    for (std::size_t j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d[j - 1];
      double ss = d[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[j] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[j - 1] = -h;
      } else {
        d[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (std::size_t k = 0; k < n_; ++k) {
        const double t1 = j_[k * n_ + j - 1];
        const double t2 = j_[k * n_ + j];
        j_[k * n_ + j - 1] = t1 * cc + t2 * ss;
        j_[k * n_ + j] = xny * (t1 + j_[k * n_ + j - 1]) - t2;
      }
    }
    ++iq_;
    for (std::size_t i = 0; i < iq_; ++i) r_[i * n_ + iq_ - 1] = d[i];
    if (std::abs(d[iq_ - 1]) <= 1e-14 * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d[iq_ - 1]));
    return true;
  }

  void remove_constraint(std::size_t qq) {
    is_active_[active_[qq]] = false;
    for (std::size_t i = qq; i + 1 < iq_; ++i) {
      active_[i] = active_[i + 1];
      u_[i] = u_[i + 1];
      for (std::size_t j = 0; j < n_; ++j) r_[j * n_ + i] = r_[j * n_ + i + 1];
    }
    active_[iq_ - 1] = active_[iq_];
    u_[iq_ - 1] = u_[iq_];
    u_[iq_] = 0.0;
    for (std::size_t j = 0; j < iq_; ++j) r_[j * n_ + iq_ - 1] = 0.0;
    --iq_;
    if (iq_ == 0) return;
    for (std::size_t j = qq; j < iq_; ++j) {
      double cc = r_[j * n_ + j];
      double ss = r_[(j + 1) * n_ + j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r_[(j + 1) * n_ + j] = 0.0;
      if (cc < 0.0) {
        r_[j * n_ + j] = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_[j * n_ + j] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (std::size_t k = j + 1; k < iq_; ++k) {
        const double t1 = r_[j * n_ + k];
        const double t2 = r_[(j + 1) * n_ + k];
        r_[j * n_ + k] = t1 * cc + t2 * ss;
        r_[(j + 1) * n_ + k] = xny * (t1 + r_[j * n_ + k]) - t2;
      }
      for (std::size_t k = 0; k < n_; ++k) {
        const double t1 = j_[k * n_ + j];
        const double t2 = j_[k * n_ + j + 1];
        j_[k * n_ + j] = t1 * cc + t2 * ss;
        j_[k * n_ + j + 1] = xny * (j_[k * n_ + j] + t1) - t2;
      }
    }
  }

  std::size_t n_;
  std::size_t p_;
  std::vector<double> a_;  // p x n constraint normals
  std::vector<double> b_;
  std::vector<double> j_;
  std::vector<double> r_;
  std::vector<std::size_t> active_;
  std::vector<double> u_;
  std::vector<bool> is_active_;
  std::size_t iq_ = 0;
  double r_norm_ = 1.0;
};

}  // namespace

Solution solve_active_set(const ProjectionProblem& p, const SolverOptions& options) {
  check_problem(p);
  const std::size_t n = p.map.cols();
  const std::size_t m = p.map.rows();

  // Densify M column by column.
  std::vector<double> dense(m * n, 0.0);
  std::vector<double> unit(n, 0.0), column(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    unit[j] = 1.0;
    p.map.apply(unit, column);
    for (std::size_t i = 0; i < m; ++i) dense[i * n + j] = column[i];
    unit[j] = 0.0;
  }

  std::vector<double> normals;
  std::vector<double> offsets;
  normals.reserve((2 * m + 2 * n) * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &dense[i * n];
    normals.insert(normals.end(), row, row + n);
    offsets.push_back(p.lower[i]);
    for (std::size_t k = 0; k < n; ++k) normals.push_back(-row[k]);
    offsets.push_back(-p.upper[i]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) normals.push_back(k == j ? 1.0 : 0.0);
    offsets.push_back(p.box_lower);
    for (std::size_t k = 0; k < n; ++k) normals.push_back(k == j ? -1.0 : 0.0);
    offsets.push_back(-p.box_upper);
  }

  Solution sol;
  sol.x.assign(p.reference.begin(), p.reference.end());
  ActiveSetSolver solver(n, std::move(normals), std::move(offsets));
  const bool ok = solver.run(sol.x, options.max_iterations, sol.iterations);
  for (double& v : sol.x) v = std::clamp(v, p.box_lower, p.box_upper);
  sol.max_violation = constraint_violation(p.map, sol.x, p.lower, p.upper);
  sol.objective = squared_distance(sol.x, p.reference);
  sol.infeasible = !ok;
  sol.converged = ok && sol.max_violation <= std::max(options.feasibility_tolerance, 1e-8);
  return sol;
}

Solution solve(const ProjectionProblem& problem, const SolverOptions& options) {
  if (problem.map.cols() < options.active_set_below) return solve_active_set(problem, options);
  return solve_dual_gradient(problem, options);
}

}  // namespace scalecamo::qp
