#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "edmpose/edm.hpp"
#include "oracles.hpp"

using namespace edmpose;

namespace {

// Rigid-motion residual between two configurations of the same points.
double procrustes_residual(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
  Embedding emb;
  emb.points = est;
  std::vector<int> idx(est.rows());
  for (int i = 0; i < static_cast<int>(est.rows()); ++i) idx[i] = i;
  const AlignmentResult res = procrustes_align(emb, idx, truth);
  return (res.aligned.points - truth).norm();
}

}  // namespace

TEST_CASE("edm_from_points matches hand values") {
  Eigen::MatrixXd pts(2, 1);
  pts << 0.0, 3.0;
  const auto D = edm_from_points(pts);
  CHECK(D(0, 1) == doctest::Approx(9.0));
  CHECK(D(1, 0) == doctest::Approx(9.0));
  CHECK(D(0, 0) == 0.0);

  const auto single = edm_from_points(Eigen::MatrixXd::Random(1, 3));
  CHECK(single.n() == 1);
  CHECK(single(0, 0) == 0.0);
}

TEST_CASE("edm round-trips through cmds_embed up to rigid motion") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd pts = oracles::random_points(rng, 10, 3);
  const auto D = edm_from_points(pts);
  const Embedding emb = cmds_embed(D, 3);
  CHECK(procrustes_residual(emb.points, pts) < 1e-8);
}

TEST_CASE("double_center hand values and zero row sums") {
  Eigen::MatrixXd D(2, 2);
  D << 0.0, 4.0, 4.0, 0.0;
  const Eigen::MatrixXd B = double_center(SquaredDistanceMatrix(D));
  CHECK(B(0, 0) == doctest::Approx(1.0));
  CHECK(B(0, 1) == doctest::Approx(-1.0));
  CHECK(B(1, 1) == doctest::Approx(1.0));

  const Eigen::MatrixXd Z =
      double_center(SquaredDistanceMatrix(Eigen::MatrixXd::Zero(4, 4)));
  CHECK(Z.cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto D6 = edm_from_points(oracles::random_points(rng, 6, 3, 2.0));
    const Eigen::MatrixXd B6 = double_center(D6);
    const double max_entry = B6.cwiseAbs().maxCoeff();
    CHECK(B6.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * 6 * std::max(1.0, max_entry));
    CHECK(oracles::min_eigenvalue(B6) >= -1e-10);
  }
}

TEST_CASE("cmds_embed two-point case and rank structure") {
  Eigen::MatrixXd D(2, 2);
  D << 0.0, 4.0, 4.0, 0.0;
  const Embedding emb = cmds_embed(SquaredDistanceMatrix(D), 2);
  CHECK((emb.points.row(0) - emb.points.row(1)).norm() == doctest::Approx(2.0));
  CHECK(emb.points.col(0).cwiseAbs().maxCoeff() == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  // Coplanar points embed exactly in r=2.
  Eigen::MatrixXd flat = oracles::random_points(rng, 4, 2);
  const Embedding emb2 = cmds_embed(edm_from_points(flat), 2);
  CHECK(procrustes_residual(emb2.points, flat) < 1e-8);

  // Five generic 3-D points: fourth eigenvalue of the Gram matrix vanishes.
  const Eigen::MatrixXd pts = oracles::random_points(rng, 5, 3);
  const auto D5 = edm_from_points(pts);
  const Eigen::VectorXd lam = oracles::eigenvalues_desc(double_center(D5));
  CHECK(std::abs(lam[3]) <= 1e-10 * lam[0]);
}

TEST_CASE("cmds_embed flags a degenerate spectrum") {
  // Regular tetrahedron: three equal positive eigenvalues, so the r=2 cut
  // falls inside a tie.
  Eigen::MatrixXd pts(4, 3);
  pts << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  const auto D = edm_from_points(pts);
  CHECK(cmds_embed(D, 2).degenerate_spectrum);
  CHECK_FALSE(cmds_embed(D, 3).degenerate_spectrum);
}

TEST_CASE("cmds_embed validates inputs") {
  const auto D = edm_from_points(Eigen::MatrixXd::Random(2, 3));
  CHECK_THROWS_AS(cmds_embed(D, 4), ValidationError);
  CHECK_THROWS_AS(cmds_embed(D, 3), ValidationError);  // n < r
}

TEST_CASE("project_cone fixes EDMs and e e^T") {
  std::mt19937_64 rng(5);
  const auto D = edm_from_points(oracles::random_points(rng, 5, 3));
  CHECK((project_cone(D.entries()) - D.entries()).cwiseAbs().maxCoeff() < 1e-12);

  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(5, 5);
  CHECK((project_cone(ones) - ones).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project_cone is idempotent and variationally optimal") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 4 + static_cast<int>(rep % 5);
    const Eigen::MatrixXd A = oracles::random_symmetric(rng, n, 2.0);
    const Eigen::MatrixXd X = project_cone(A);
    CHECK((project_cone(X) - X).norm() < 1e-10);

    for (int s = 0; s < 40; ++s) {
      const Eigen::MatrixXd Y = oracles::random_cone_member(rng, n);
      CHECK((A - X).cwiseProduct(Y - X).sum() <= 1e-9);
    }
  }
}

TEST_CASE("rank_penalty value matches the eigensolver oracle") {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd flat = oracles::random_points(rng, 3, 2);
  CHECK(rank_penalty(edm_from_points(flat), 2).value == doctest::Approx(0.0));

  const Eigen::MatrixXd pts = oracles::random_points(rng, 4, 3);
  const auto D = edm_from_points(pts);
  const Eigen::VectorXd lam = oracles::eigenvalues_desc(double_center(D));
  const RankPenalty rp = rank_penalty(D, 2);
  CHECK(rp.value > 0.0);
  CHECK(rp.value == doctest::Approx(lam[2] + lam[3]).epsilon(1e-10));
}

TEST_CASE("rank_penalty supergradient majorizes") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 200; ++rep) {
    const auto D = edm_from_points(oracles::random_points(rng, 6, 3));
    const auto Dp = edm_from_points(oracles::random_points(rng, 6, 3));
    const RankPenalty rp = rank_penalty(D, 2);
    const double q_prime = rank_penalty(Dp, 2).value;
    const double bound =
        rp.value +
        rp.majorizer_gradient.cwiseProduct(Dp.entries() - D.entries()).sum();
    CHECK(q_prime <= bound + 1e-9);
  }
}

TEST_CASE("rank_penalty is invariant under relabeling") {
  std::mt19937_64 rng(23);
  const auto D = edm_from_points(oracles::random_points(rng, 7, 3));
  std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(7, 7);
  for (int i = 0; i < 7; ++i) P(i, perm[i]) = 1.0;
  const Eigen::MatrixXd Dp = P * D.entries() * P.transpose();
  CHECK(rank_penalty(SquaredDistanceMatrix(Dp), 2).value ==
        doctest::Approx(rank_penalty(D, 2).value).epsilon(1e-10));
}

TEST_CASE("procrustes_align recovers constructed rigid motions") {
  Eigen::MatrixXd anchors(3, 2);
  anchors << 0, 0, 1, 0, 0, 1;

  Embedding identity_est;
  identity_est.points = anchors;
  const AlignmentResult same =
      procrustes_align(identity_est, {0, 1, 2}, anchors);
  CHECK((same.transform.rotation - Eigen::Matrix2d::Identity()).norm() < 1e-10);
  CHECK(same.transform.translation.norm() < 1e-10);

  Eigen::Matrix2d rot90;
  rot90 << 0, -1, 1, 0;
  Embedding moved;
  moved.points = anchors * rot90.transpose();
  moved.points.rowwise() += Eigen::RowVector2d(1.0, 1.0);
  const AlignmentResult rec = procrustes_align(moved, {0, 1, 2}, anchors);
  CHECK((rec.aligned.points - anchors).norm() < 1e-10);
  CHECK(rec.anchor_rms < 1e-10);
}

TEST_CASE("procrustes_align beats random rigid transforms on noisy scenes") {
  std::mt19937_64 rng(29);
  const Eigen::MatrixXd truth = oracles::random_points(rng, 9, 3, 3.0);
  Eigen::MatrixXd noisy =
      truth * oracles::random_orthogonal(rng, 3).transpose();
  noisy.rowwise() += Eigen::RowVector3d(2.0, -1.0, 0.5);
  noisy += 0.05 * oracles::random_points(rng, 9, 3);

  Embedding est;
  est.points = noisy;
  std::vector<int> idx = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  const AlignmentResult res = procrustes_align(est, idx, truth);
  const double best = (res.aligned.points - truth).squaredNorm();

  for (int s = 0; s < 1000; ++s) {
    const Eigen::MatrixXd Q = oracles::random_orthogonal(rng, 3);
    Eigen::MatrixXd cand = noisy * Q.transpose();
    cand.rowwise() += oracles::random_points(rng, 1, 3, 2.0).row(0);
    CHECK(best <= (cand - truth).squaredNorm() + 1e-9);
  }
}

TEST_CASE("procrustes_align residual invariant to pre-applied rigid motion") {
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd truth = oracles::random_points(rng, 6, 2, 2.0);
  Eigen::MatrixXd est = truth + 0.1 * oracles::random_points(rng, 6, 2);

  Embedding emb;
  emb.points = est;
  std::vector<int> idx = {0, 1, 2, 3, 4, 5};
  const double base = procrustes_align(emb, idx, truth).anchor_rms;

  Embedding shifted;
  shifted.points = est * oracles::random_orthogonal(rng, 2).transpose();
  shifted.points.rowwise() += Eigen::RowVector2d(-3.0, 7.0);
  CHECK(procrustes_align(shifted, idx, truth).anchor_rms ==
        doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("procrustes_align rejects degenerate anchor sets") {
  Embedding est;
  est.points = Eigen::MatrixXd::Random(5, 2);

  Eigen::MatrixXd two(2, 2);
  two << 0, 0, 1, 1;
  CHECK_THROWS_AS(procrustes_align(est, {0, 1}, two),
                  AlignmentUnderdeterminedError);

  Eigen::MatrixXd collinear(3, 2);
  collinear << 0, 0, 1, 1, 2, 2;
  CHECK_THROWS_AS(procrustes_align(est, {0, 1, 2}, collinear),
                  AlignmentUnderdeterminedError);
}

TEST_CASE("squared distance matrix validation") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.0, 1.0, 2.0, 0.0;
  CHECK_THROWS_AS(SquaredDistanceMatrix{bad}, ValidationError);

  Eigen::MatrixXd diag(2, 2);
  diag << 1.0, 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(SquaredDistanceMatrix{diag}, ValidationError);

  Eigen::MatrixXd neg(2, 2);
  neg << 0.0, -1.0, -1.0, 0.0;
  CHECK_THROWS_AS(SquaredDistanceMatrix{neg}, ValidationError);
}
