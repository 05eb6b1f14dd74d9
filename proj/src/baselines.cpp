#include "edmpose/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace edmpose {

namespace {

// phi(lambda) = y'Dy + 2f'y for y(lambda) = (AtA + lambda*D)^-1 (Atb - lambda*f)
// with D = diag(1..1, 0) and f = (0,..,0,-1/2). Strictly decreasing on the
// interval where AtA + lambda*D is positive definite.
struct Gtrs {
  Eigen::MatrixXd AtA;
  Eigen::VectorXd Atb;
  int r;

  Eigen::VectorXd y(double lambda) const {
    Eigen::MatrixXd M = AtA;
    M.topLeftCorner(r, r).diagonal().array() += lambda;
    Eigen::VectorXd rhs = Atb;
    rhs[r] += 0.5 * lambda;
    return M.ldlt().solve(rhs);
  }

  double phi(double lambda) const {
    const Eigen::VectorXd v = y(lambda);
    return v.head(r).squaredNorm() - v[r];
  }
};

}  // namespace

double srls_objective(const Eigen::VectorXd& x, const Eigen::MatrixXd& anchors,
                      const Eigen::VectorXd& ranges) {
  double obj = 0.0;
  for (Eigen::Index j = 0; j < anchors.rows(); ++j) {
    const double res =
        (x - anchors.row(j).transpose()).squaredNorm() - ranges[j] * ranges[j];
    obj += res * res;
  }
  return obj;
}

SrlsResult srls_localize(const Eigen::MatrixXd& anchors,
                         const Eigen::VectorXd& ranges) {
  const int k = static_cast<int>(anchors.rows());
  const int r = static_cast<int>(anchors.cols());
  if (k != ranges.size()) throw ValidationError("one range per anchor required");
  if (k < r + 1) {
    throw UnderdeterminedError("squared-range least squares needs r+1 anchors");
  }

  // Rows [-2 a_j^T, 1], b_j = delta_j^2 - ||a_j||^2.
  Eigen::MatrixXd A(k, r + 1);
  Eigen::VectorXd b(k);
  for (int j = 0; j < k; ++j) {
    A.row(j).head(r) = -2.0 * anchors.row(j);
    A(j, r) = 1.0;
    b[j] = ranges[j] * ranges[j] - anchors.row(j).squaredNorm();
  }

  Gtrs g{A.transpose() * A, A.transpose() * b, r};

  Eigen::LLT<Eigen::MatrixXd> llt(g.AtA);
  if (llt.info() != Eigen::Success) {
    throw UnderdeterminedError("anchors are affinely degenerate");
  }

  // Interval lower end: AtA + lambda*D is PD for lambda > -1/mu_max with
  // mu_max the largest eigenvalue of L^-1 D L^-T.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(r + 1, r + 1);
  D.topLeftCorner(r, r).setIdentity();
  const Eigen::MatrixXd L_inv =
      llt.matrixL().solve(Eigen::MatrixXd::Identity(r + 1, r + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L_inv * D * L_inv.transpose());
  const double mu_max = es.eigenvalues().maxCoeff();
  const double lambda_low = -1.0 / mu_max;

  SrlsResult out;

  double lo = lambda_low + 1e-10 * (1.0 + std::abs(lambda_low));
  for (int tries = 0; tries < 60 && g.phi(lo) <= 0.0; ++tries) {
    lo = lambda_low + 0.5 * (lo - lambda_low);
  }
  if (g.phi(lo) <= 0.0) {
    // Root sits at the interval edge; accept the edge solution.
    out.point = g.y(lo).head(r);
    out.converged = true;
    out.objective = srls_objective(out.point, anchors, ranges);
    return out;
  }

  double hi = std::max(1.0, std::abs(lambda_low));
  int expand = 0;
  while (g.phi(hi) > 0.0 && expand < 200) {
    hi *= 2.0;
    ++expand;
  }
  if (g.phi(hi) > 0.0) {
    out.point = g.y(hi).head(r);
    out.converged = false;
    out.iters = expand;
    out.objective = srls_objective(out.point, anchors, ranges);
    return out;
  }

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double val = g.phi(mid);
    if (std::abs(val) < 1e-14 || hi - lo < 1e-15 * (1.0 + std::abs(mid))) {
      out.converged = true;
      out.iters = it + 1;
      break;
    }
    (val > 0.0 ? lo : hi) = mid;
    out.iters = it + 1;
  }
  if (!out.converged) out.converged = hi - lo < 1e-9 * (1.0 + std::abs(mid));

  out.point = g.y(mid).head(r);
  out.objective = srls_objective(out.point, anchors, ranges);
  return out;
}

std::vector<Eigen::Vector3d> tpsm_localize(
    const std::vector<double>& arm_lengths_from_base, const AngleReading& reading,
    const Eigen::Vector3d& base) {
  if (reading.relative_pitch.size() != arm_lengths_from_base.size()) {
    throw ValidationError("one relative pitch per arm segment required");
  }
  const double cos_az = std::cos(reading.turntable_azimuth);
  const double sin_az = std::sin(reading.turntable_azimuth);

  std::vector<Eigen::Vector3d> joints;
  joints.reserve(arm_lengths_from_base.size());
  Eigen::Vector3d pos = base;
  double pitch = 0.0;
  for (std::size_t j = 0; j < arm_lengths_from_base.size(); ++j) {
    pitch += reading.relative_pitch[j];
    const double L = arm_lengths_from_base[j];
    pos += L * Eigen::Vector3d(std::cos(pitch) * cos_az,
                               std::cos(pitch) * sin_az, std::sin(pitch));
    joints.push_back(pos);
  }
  return joints;
}

}  // namespace edmpose
