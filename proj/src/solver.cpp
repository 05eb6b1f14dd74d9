#include "edmpose/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace edmpose {

namespace {

// Zero the diagonal, overwrite constrained entries, keep everything else.
// `values` holds the (already weight-scaled) squared lengths per constraint.
void apply_affine(Eigen::MatrixXd& X, const std::vector<ArmConstraint>& arms,
                  const std::vector<double>& values) {
  X = 0.5 * (X + X.transpose()).eval();
  X.diagonal().setZero();
  for (std::size_t k = 0; k < arms.size(); ++k) {
    X(arms[k].i, arms[k].j) = values[k];
    X(arms[k].j, arms[k].i) = values[k];
  }
}

// Dykstra between the affine set and the cone with centering direction
// `unit_center`, started from `target`; converges to the Frobenius
// projection of `target` onto the intersection.
SubproblemResult dykstra(const Eigen::MatrixXd& target,
                         const std::vector<ArmConstraint>& arms,
                         const std::vector<double>& values,
                         const Eigen::VectorXd& unit_center, int max_iters,
                         double tol) {
  Eigen::MatrixXd X = 0.5 * (target + target.transpose());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(X.rows(), X.cols());

  SubproblemResult out;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd Z = project_cone_directed(X + P, unit_center);
    P = X + P - Z;
    Eigen::MatrixXd Xn = Z + Q;
    apply_affine(Xn, arms, values);
    Q = Z + Q - Xn;

    const double change = (Xn - X).norm();
    X = Xn;
    out.iters = it + 1;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.D = std::move(X);
  return out;
}

double resolved_inner_tol(const SolverConfig& cfg, int n) {
  return cfg.inner_tol > 0.0 ? cfg.inner_tol : 1e-10 * n;
}

// f(D) = 1/2 ||H o (D - G)||_F^2; uniform H is all ones.
double objective(const Eigen::MatrixXd& D, const NedmProblem& problem) {
  const Eigen::MatrixXd R = D - problem.G.entries();
  if (problem.weights.mode == WeightMode::uniform) return 0.5 * R.squaredNorm();
  return 0.5 * problem.weights.H.cwiseProduct(R).squaredNorm();
}

}  // namespace

std::vector<ArmConstraint> chain_constraints(const std::vector<double>& lengths) {
  std::vector<ArmConstraint> out;
  out.reserve(lengths.size());
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    out.push_back({static_cast<int>(j), static_cast<int>(j + 1), lengths[j]});
  }
  return out;
}

void NedmProblem::validate() const {
  const int n = G.n();
  if (target_rank != 2 && target_rank != 3) {
    throw ValidationError("target rank must be 2 or 3");
  }
  weights.validate(n);
  std::vector<std::pair<int, int>> pairs;
  for (const auto& c : arm_constraints) {
    if (c.i < 0 || c.j < 0 || c.i >= n || c.j >= n || c.i == c.j) {
      throw ValidationError("arm constraint indices out of range");
    }
    if (c.length <= 0.0) throw ValidationError("arm lengths must be positive");
    pairs.emplace_back(std::min(c.i, c.j), std::max(c.i, c.j));
  }
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) {
    throw ValidationError("arm constraints must reference distinct pairs");
  }
}

SubproblemResult solve_subproblem(const Eigen::MatrixXd& target,
                                  const NedmProblem& problem,
                                  const SolverConfig& cfg) {
  const int n = problem.G.n();
  if (target.rows() != n || target.cols() != n) {
    throw ValidationError("subproblem target has the wrong size");
  }
  std::vector<double> values;
  values.reserve(problem.arm_constraints.size());
  for (const auto& c : problem.arm_constraints) values.push_back(c.length * c.length);
  const Eigen::VectorXd e =
      Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  return dykstra(target, problem.arm_constraints, values, e,
                 cfg.inner_max_iters, resolved_inner_tol(cfg, n));
}

SolveResult solve(const NedmProblem& problem, const SolverConfig& cfg,
                  const std::optional<SquaredDistanceMatrix>& warm_start) {
  const auto t0 = std::chrono::steady_clock::now();
  problem.validate();
  const int n = problem.G.n();
  const int r = problem.target_rank;
  const double inner_tol = resolved_inner_tol(cfg, n);

  const Eigen::VectorXd u = problem.weights.diagonal_weights(n);
  const bool uniform = problem.weights.mode == WeightMode::uniform;
  const Eigen::VectorXd u_sqrt = u.cwiseSqrt();
  const Eigen::VectorXd u_sqrt_inv = u_sqrt.cwiseInverse();
  Eigen::VectorXd center = u_sqrt;  // W^1/2 e, normalized below
  center /= center.norm();

  // Constraint values in the scaled variables Y = W^1/2 D W^1/2.
  std::vector<double> values;
  values.reserve(problem.arm_constraints.size());
  for (const auto& c : problem.arm_constraints) {
    values.push_back(c.length * c.length * u_sqrt[c.i] * u_sqrt[c.j]);
  }

  std::vector<double> raw_values;
  raw_values.reserve(problem.arm_constraints.size());
  for (const auto& c : problem.arm_constraints) {
    raw_values.push_back(c.length * c.length);
  }

  Eigen::MatrixXd D;
  if (warm_start) {
    D = warm_start->entries();
    if (D.rows() != n) throw ValidationError("warm start has the wrong size");
  } else {
    D = problem.G.entries();
  }
  apply_affine(D, problem.arm_constraints, raw_values);

  SolveResult result;

  // The descent guarantee needs a feasible starting point; the affine
  // projection alone can sit outside the cone, so tighten it up front.
  {
    const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd Z = project_cone(D);
    if ((D - Z).norm() > 1e-12 * scale) {
      Eigen::MatrixXd scaled = u_sqrt.asDiagonal() * D * u_sqrt.asDiagonal();
      SubproblemResult init =
          dykstra(scaled, problem.arm_constraints, values, center,
                  cfg.inner_max_iters, inner_tol);
      result.inner_iters += init.iters;
      result.subproblems_converged =
          result.subproblems_converged && init.converged;
      D = u_sqrt_inv.asDiagonal() * init.D * u_sqrt_inv.asDiagonal();
      apply_affine(D, problem.arm_constraints, raw_values);
    }
  }

  RankPenalty rp = rank_penalty_matrix(D, r);
  double f = objective(D, problem);

  double c = cfg.penalty_initial;
  if (c <= 0.0) c = 10.0 * f / std::max(rp.value, 1e-12);
  c = std::min(c, cfg.penalty_max);

  double q_prev = rp.positive_part;
  result.objective_history.push_back(f + c * rp.value);
  result.penalty_history.push_back(c);

  for (int k = 0; k < cfg.outer_max_iters; ++k) {
    if (rp.positive_part <= cfg.rank_tol) break;
    result.outer_iters = k + 1;

    // Fold the linearized penalty into a shifted target and project. In the
    // scaled variables the cone keeps its projection formula with the
    // centering direction W^1/2 e.
    Eigen::MatrixXd target(n, n);
    if (uniform) {
      target = problem.G.entries() - c * rp.majorizer_gradient;
    } else {
      const Eigen::MatrixXd grad_f = problem.weights.H.cwiseAbs2().cwiseProduct(
          D - problem.G.entries());
      target = D - (grad_f + c * rp.majorizer_gradient)
                       .cwiseQuotient(u * u.transpose());
    }

    Eigen::MatrixXd scaled_target =
        u_sqrt.asDiagonal() * target * u_sqrt.asDiagonal();
    SubproblemResult sub =
        dykstra(scaled_target, problem.arm_constraints, values, center,
                cfg.inner_max_iters, inner_tol);
    result.inner_iters += sub.iters;
    result.subproblems_converged = result.subproblems_converged && sub.converged;

    Eigen::MatrixXd D_next =
        u_sqrt_inv.asDiagonal() * sub.D * u_sqrt_inv.asDiagonal();
    const RankPenalty rp_next = rank_penalty_matrix(D_next, r);
    const double f_next = objective(D_next, problem);

    const double F_prev = f + c * rp.value;
    const double F_next = f_next + c * rp_next.value;
    // Descent only holds when the inner projections actually converged.
    if (cfg.descent_check && result.subproblems_converged &&
        F_next > F_prev + 1e-12 * std::max(1.0, std::abs(F_prev))) {
      std::ostringstream msg;
      msg << "penalized objective increased: " << F_prev << " -> " << F_next;
      throw DescentViolationError(msg.str());
    }

    D = std::move(D_next);
    rp = rp_next;
    f = f_next;
    result.objective_history.push_back(F_next);
    result.penalty_history.push_back(c);

    // Grow c when q fails to drop by 10x; rebase so c can leave zero.
    if (rp.positive_part > cfg.rank_tol && rp.positive_part > 0.1 * q_prev) {
      const double f_floor =
          std::max(f, 1e-8 * (1.0 + problem.G.entries().squaredNorm()));
      const double rebase = 10.0 * f_floor / std::max(rp.value, 1e-12);
      const double c_new =
          std::min(std::max(c * cfg.penalty_growth, rebase), cfg.penalty_max);
      if (c_new > c) {
        c = c_new;
        ++result.penalty_growths;
      }
    }
    q_prev = rp.positive_part;
  }

  // Feasibility polish: plain alternating projections tighten cone
  // membership and the fixed entries simultaneously; optimality is carried
  // by the converged outer loop.
  for (int it = 0; it < 500; ++it) {
    const Eigen::MatrixXd Z = project_cone(D);
    D = Z;
    apply_affine(D, problem.arm_constraints, raw_values);
    if ((D - Z).norm() <= 1e-9) break;
  }
  rp = rank_penalty_matrix(D, r);

  result.penalty_value = rp.value;
  result.eps_optimal = rp.positive_part <= cfg.rank_tol;
  result.D_star = SquaredDistanceMatrix(D, 1e-6);
  result.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

bool check_eps_optimality(const SolveResult& result, double eps) {
  return result.penalty_value <= eps;
}

}  // namespace edmpose
