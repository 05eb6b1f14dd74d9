#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "edmpose/edm.hpp"

namespace edmpose {

// Fixes D_ij = length^2. Chains built from scenes use consecutive pairs
// (j, j+1); the solver itself accepts any distinct pair.
struct ArmConstraint {
  int i = 0;
  int j = 0;
  double length = 0.0;
};

// Constraints (j, j+1) for j = 0..p-1 from segment lengths L_1..L_p.
std::vector<ArmConstraint> chain_constraints(const std::vector<double>& lengths);

struct NedmProblem {
  SquaredDistanceMatrix G;  // noisy observations
  WeightSpec weights;
  std::vector<ArmConstraint> arm_constraints;
  int target_rank = 3;

  void validate() const;
};

struct SolverConfig {
  double penalty_initial = 0.0;  // <= 0: auto, 10*f(D0)/max(q(D0), 1e-12)
  double penalty_growth = 4.0;   // applied when q stalls between outer iters
  double penalty_max = 1e12;
  int outer_max_iters = 100;
  int inner_max_iters = 20000;
  double inner_tol = 0.0;  // <= 0: auto, 1e-10 * n (Frobenius change per cycle)
  double rank_tol = 1e-8;  // epsilon of the eps-optimality certificate
  bool descent_check = true;
};

struct SubproblemResult {
  Eigen::MatrixXd D;
  bool converged = false;
  int iters = 0;
};

// Minimizer of 1/2 ||D - target||_F^2 over {diag(D)=0, D in the cone,
// D_ij = L^2 for the arm pairs}, by Dykstra's alternating projections
// between the affine set and the cone. Uniform weights.
SubproblemResult solve_subproblem(const Eigen::MatrixXd& target,
                                  const NedmProblem& problem,
                                  const SolverConfig& cfg);

struct SolveResult {
  SquaredDistanceMatrix D_star;
  // Penalized objective f + c*q per outer iterate, with the penalty in
  // effect when the iterate was produced; penalty_history holds that c.
  // Descent is guaranteed between iterates sharing the same penalty.
  std::vector<double> objective_history;
  std::vector<double> penalty_history;
  double penalty_value = 0.0;  // final q(D)
  int outer_iters = 0;
  int inner_iters = 0;
  int penalty_growths = 0;
  bool eps_optimal = false;          // q <= rank_tol at exit
  bool subproblems_converged = true;  // every Dykstra call hit its tolerance
  double wallclock_seconds = 0.0;
};

// Majorized penalty method: linearize the rank penalty at the iterate, fold
// the linear term into a shifted target, project onto the convex constraint
// set, grow the penalty when q stalls. Monotone descent of the penalized
// objective is asserted when cfg.descent_check is set.
SolveResult solve(const NedmProblem& problem, const SolverConfig& cfg,
                  const std::optional<SquaredDistanceMatrix>& warm_start = {});

// True iff the run's final rank-penalty value is within eps.
bool check_eps_optimality(const SolveResult& result, double eps);

}  // namespace edmpose
