#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "edmpose/solver.hpp"
#include "oracles.hpp"

using namespace edmpose;

namespace {

// Chain of points with prescribed consecutive distances; pads extra points.
Eigen::MatrixXd chain_points(std::mt19937_64& rng, const std::vector<double>& L,
                             int extra, int r) {
  const int n = static_cast<int>(L.size()) + 1 + extra;
  Eigen::MatrixXd pts = oracles::random_points(rng, n, r, 3.0);
  for (std::size_t j = 0; j < L.size(); ++j) {
    Eigen::VectorXd dir = pts.row(j + 1).transpose() - pts.row(j).transpose();
    if (dir.norm() < 1e-9) dir.setOnes();
    dir /= dir.norm();
    pts.row(j + 1) = pts.row(j) + L[j] * dir.transpose();
  }
  return pts;
}

NedmProblem make_problem(const SquaredDistanceMatrix& G,
                         const std::vector<ArmConstraint>& arms, int rank) {
  NedmProblem problem;
  problem.G = G;
  problem.arm_constraints = arms;
  problem.target_rank = rank;
  return problem;
}

}  // namespace

TEST_CASE("solve_subproblem fixes feasible targets in one cycle") {
  std::mt19937_64 rng(41);
  const auto D = edm_from_points(oracles::random_points(rng, 5, 3));
  NedmProblem problem = make_problem(D, {}, 3);
  SolverConfig cfg;
  const SubproblemResult res = solve_subproblem(D.entries(), problem, cfg);
  CHECK(res.converged);
  CHECK(res.iters <= 2);
  CHECK((res.D - D.entries()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("solve_subproblem keeps a consistent collinear chain unchanged") {
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 1.5, 4.0;
  const auto D = edm_from_points(pts);
  NedmProblem problem = make_problem(D, {{0, 1, 1.5}}, 2);
  SolverConfig cfg;
  const SubproblemResult res = solve_subproblem(D.entries(), problem, cfg);
  CHECK(res.converged);
  CHECK((res.D - D.entries()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solve_subproblem matches the independent convex oracle") {
  std::mt19937_64 rng(43);
  SolverConfig cfg;
  cfg.inner_max_iters = 20000;
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 4 + rep % 2;
    Eigen::MatrixXd target = oracles::random_symmetric(rng, n, 1.0);
    target.diagonal().setZero();
    std::vector<ArmConstraint> arms;
    if (rep % 3 != 0) arms.push_back({0, 1, 1.0 + 0.2 * (rep % 4)});

    NedmProblem problem =
        make_problem(SquaredDistanceMatrix(Eigen::MatrixXd::Zero(n, n)), arms, 3);
    const SubproblemResult res = solve_subproblem(target, problem, cfg);
    REQUIRE(res.converged);

    const Eigen::MatrixXd oracle =
        oracles::convex_subproblem_oracle(target, arms);
    CHECK((res.D - oracle).norm() < 1e-5);
  }
}

TEST_CASE("solve returns exact EDMs immediately") {
  std::mt19937_64 rng(47);
  const std::vector<double> L = {9.0, 9.0, 7.0, 7.0, 9.0};
  const Eigen::MatrixXd pts = chain_points(rng, L, 3, 3);
  const auto G = edm_from_points(pts);

  NedmProblem problem = make_problem(G, chain_constraints(L), 3);
  SolverConfig cfg;
  const SolveResult res = solve(problem, cfg);
  CHECK(res.eps_optimal);
  CHECK(res.outer_iters <= 1);
  CHECK((res.D_star.entries() - G.entries()).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(check_eps_optimality(res, 1e-10));
}

TEST_CASE("solve satisfies constraints and cone membership at exit") {
  std::mt19937_64 rng(53);
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<double> L = {1.0, 1.2, 0.8};
    const Eigen::MatrixXd pts = chain_points(rng, L, 2, 3);
    Eigen::MatrixXd noisy =
        edm_from_points(pts).entries() +
        0.05 * oracles::random_symmetric(rng, 6).cwiseAbs();
    noisy.diagonal().setZero();

    NedmProblem problem =
        make_problem(SquaredDistanceMatrix(noisy, 1.0), chain_constraints(L), 3);
    const SolveResult res = solve(problem, SolverConfig{});

    for (const auto& c : problem.arm_constraints) {
      CHECK(std::abs(res.D_star(c.i, c.j) - c.length * c.length) < 1e-9);
    }
    CHECK(res.D_star.entries().diagonal().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(oracles::min_eigenvalue(double_center(res.D_star)) > -1e-9);
  }
}

TEST_CASE("solve history is monotone and reaches low rank penalty") {
  std::mt19937_64 rng(59);
  int growth_free_runs = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 5;
    Eigen::MatrixXd noisy = edm_from_points(oracles::random_points(rng, n, 3))
                                .entries();
    noisy += 0.1 * oracles::random_symmetric(rng, n).cwiseAbs();
    noisy.diagonal().setZero();

    // Alternate between rank reduction (2) and denoising at rank 3.
    NedmProblem problem =
        make_problem(SquaredDistanceMatrix(noisy, 1.0), {}, rep % 2 == 0 ? 2 : 3);
    const SolveResult res = solve(problem, SolverConfig{});
    CHECK(res.penalty_value <= 1e-8);
    REQUIRE(res.objective_history.size() == res.penalty_history.size());
    for (std::size_t k = 0; k + 1 < res.objective_history.size(); ++k) {
      if (res.penalty_history[k + 1] == res.penalty_history[k]) {
        CHECK(res.objective_history[k + 1] <=
              res.objective_history[k] +
                  1e-12 * std::max(1.0, std::abs(res.objective_history[k])));
      }
    }
    if (res.penalty_growths == 0) ++growth_free_runs;
  }
  CHECK(growth_free_runs > 0);
}

TEST_CASE("solve is equivariant under relabeling") {
  std::mt19937_64 rng(61);
  const int n = 6;
  Eigen::MatrixXd noisy = edm_from_points(oracles::random_points(rng, n, 3))
                              .entries();
  noisy += 0.05 * oracles::random_symmetric(rng, n).cwiseAbs();
  noisy.diagonal().setZero();
  const std::vector<ArmConstraint> arms = {{0, 1, 1.0}, {1, 2, 1.3}};

  NedmProblem problem = make_problem(SquaredDistanceMatrix(noisy, 1.0), arms, 3);
  const SolveResult base = solve(problem, SolverConfig{});

  const std::vector<int> perm = {4, 2, 0, 5, 1, 3};
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) P(perm[i], i) = 1.0;
  Eigen::MatrixXd permuted = P * noisy * P.transpose();
  std::vector<ArmConstraint> permuted_arms;
  for (const auto& c : arms) {
    permuted_arms.push_back({perm[c.i], perm[c.j], c.length});
  }
  NedmProblem relabeled =
      make_problem(SquaredDistanceMatrix(permuted, 1.0), permuted_arms, 3);
  const SolveResult moved = solve(relabeled, SolverConfig{});

  const Eigen::MatrixXd back =
      P.transpose() * moved.D_star.entries() * P;
  CHECK((back - base.D_star.entries()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("warm starts are honored") {
  std::mt19937_64 rng(67);
  const std::vector<double> L = {1.0, 1.0};
  const Eigen::MatrixXd pts = chain_points(rng, L, 2, 3);
  const auto G = edm_from_points(pts);
  NedmProblem problem = make_problem(G, chain_constraints(L), 3);
  const SolveResult res = solve(problem, SolverConfig{}, G);
  CHECK(res.eps_optimal);
  CHECK((res.D_star.entries() - G.entries()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("general weights reduce to uniform for all-ones H") {
  std::mt19937_64 rng(71);
  const int n = 5;
  Eigen::MatrixXd noisy =
      edm_from_points(oracles::random_points(rng, n, 3)).entries();
  noisy += 0.1 * oracles::random_symmetric(rng, n).cwiseAbs();
  noisy.diagonal().setZero();
  const std::vector<ArmConstraint> arms = {{0, 1, 1.0}};

  NedmProblem uniform = make_problem(SquaredDistanceMatrix(noisy, 1.0), arms, 3);
  NedmProblem general = uniform;
  general.weights.mode = WeightMode::general;
  general.weights.H = Eigen::MatrixXd::Ones(n, n);

  const SolveResult a = solve(uniform, SolverConfig{});
  const SolveResult b = solve(general, SolverConfig{});
  CHECK((a.D_star.entries() - b.D_star.entries()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("general weights match the weighted convex oracle") {
  std::mt19937_64 rng(73);
  const int n = 5;
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::MatrixXd noisy =
        edm_from_points(oracles::random_points(rng, n, 3)).entries();
    noisy += 0.1 * oracles::random_symmetric(rng, n).cwiseAbs();
    noisy.diagonal().setZero();

    Eigen::MatrixXd H = oracles::random_symmetric(rng, n).cwiseAbs();
    H.diagonal().setZero();
    const std::vector<ArmConstraint> arms = {{0, 1, 1.0}};

    NedmProblem problem = make_problem(SquaredDistanceMatrix(noisy, 1.0), arms, 3);
    problem.weights.mode = WeightMode::general;
    problem.weights.H = H;

    // Feasible warm start with rank 4 close to the data: the noise-free 3-D
    // points lifted by a small fourth coordinate, (0,1) distance matching the
    // arm. Exactly one majorized step runs, a pure weighted projection of a
    // reconstructible target.
    Eigen::MatrixXd pts4(n, 4);
    pts4.leftCols(3) = oracles::random_points(rng, n, 3);
    pts4.col(3) = 0.3 * oracles::random_points(rng, n, 1);
    Eigen::VectorXd dir = pts4.row(1).transpose() - pts4.row(0).transpose();
    pts4.row(1) = pts4.row(0) + dir.transpose() / dir.norm();
    const auto warm = edm_from_points(pts4);

    const Eigen::VectorXd u = problem.weights.diagonal_weights(n);
    SolverConfig cfg;
    cfg.outer_max_iters = 1;
    cfg.inner_max_iters = 20000;
    const SolveResult res = solve(problem, cfg, warm);

    // Rebuild the first shifted target exactly as solve() does.
    Eigen::MatrixXd D0 = warm.entries();
    D0(0, 1) = D0(1, 0) = 1.0;
    const RankPenalty rp = rank_penalty_matrix(D0, 3);
    REQUIRE(rp.value > cfg.rank_tol);
    const double c = 10.0 * 0.5 *
                     H.cwiseProduct(D0 - problem.G.entries()).squaredNorm() /
                     std::max(rp.value, 1e-12);
    const Eigen::MatrixXd grad_f =
        H.cwiseAbs2().cwiseProduct(D0 - problem.G.entries());
    const Eigen::MatrixXd target =
        D0 - (grad_f + c * rp.majorizer_gradient).cwiseQuotient(u * u.transpose());

    const Eigen::MatrixXd X = res.D_star.entries();
    const double scale = 1.0 + target.cwiseAbs().maxCoeff();

    // Weighted variational inequality against independently constructed
    // feasible points certifies the weighted projection.
    const Eigen::MatrixXd W = u * u.transpose();
    for (int s = 0; s < 300; ++s) {
      Eigen::MatrixXd chain = oracles::random_points(rng, n, 3, 2.0);
      Eigen::VectorXd step = chain.row(1).transpose() - chain.row(0).transpose();
      chain.row(1) = chain.row(0) + step.transpose() / step.norm();
      const Eigen::MatrixXd Y = edm_from_points(chain).entries();
      const double ip =
          (W.array() * (target - X).array() * (Y - X).array()).sum();
      CHECK(ip <= 1e-9 * scale * scale);
    }

    // The independent oracle reaches the same weighted objective.
    const Eigen::MatrixXd oracle =
        oracles::convex_subproblem_oracle(target, arms, u);
    const double obj_x = 0.5 * (W.array() * (X - target).array().square()).sum();
    const double obj_o =
        0.5 * (W.array() * (oracle - target).array().square()).sum();
    CHECK(obj_x <= obj_o + 1e-6 * (1.0 + std::abs(obj_o)));
    CHECK((X - oracle).norm() < 1e-4 * scale);
  }
}

TEST_CASE("check_eps_optimality thresholds") {
  SolveResult res;
  res.penalty_value = 0.0;
  CHECK(check_eps_optimality(res, 1e-300));
  res.penalty_value = 1e-3;
  CHECK_FALSE(check_eps_optimality(res, 1e-4));
}

TEST_CASE("problem validation rejects bad inputs") {
  const auto G = edm_from_points(Eigen::MatrixXd::Random(4, 3));
  NedmProblem problem = make_problem(G, {{0, 0, 1.0}}, 3);
  CHECK_THROWS_AS(solve(problem, SolverConfig{}), ValidationError);

  problem = make_problem(G, {{0, 1, -1.0}}, 3);
  CHECK_THROWS_AS(solve(problem, SolverConfig{}), ValidationError);

  problem = make_problem(G, {{0, 1, 1.0}, {1, 0, 2.0}}, 3);
  CHECK_THROWS_AS(solve(problem, SolverConfig{}), ValidationError);

  problem = make_problem(G, {}, 5);
  CHECK_THROWS_AS(solve(problem, SolverConfig{}), ValidationError);
}
