#include "edmpose/edm.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace edmpose {

namespace {

// J M J with J = I - ee^T/n (center rows and columns).
Eigen::MatrixXd center_both(const Eigen::MatrixXd& M) {
  const Eigen::VectorXd row_mean = M.rowwise().mean();
  const Eigen::VectorXd col_mean = M.colwise().mean();
  const double grand_mean = row_mean.mean();
  Eigen::MatrixXd C = M;
  C.colwise() -= row_mean;
  C.rowwise() -= col_mean.transpose();
  C.array() += grand_mean;
  return C;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

SquaredDistanceMatrix::SquaredDistanceMatrix(Eigen::MatrixXd entries,
                                             double tol) {
  if (entries.rows() != entries.cols() || entries.rows() < 1) {
    throw ValidationError("squared distance matrix must be square and non-empty");
  }
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double bound = tol * scale;
  if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > bound) {
    throw ValidationError("squared distance matrix is not symmetric");
  }
  if (entries.diagonal().cwiseAbs().maxCoeff() > bound) {
    throw ValidationError("squared distance matrix has a nonzero diagonal");
  }
  if (entries.minCoeff() < -bound) {
    throw ValidationError("squared distance matrix has negative entries");
  }
  entries_ = 0.5 * (entries + entries.transpose());
  entries_.diagonal().setZero();
  entries_ = entries_.cwiseMax(0.0);
}

SquaredDistanceMatrix SquaredDistanceMatrix::from_points(
    const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  if (n < 1) throw ValidationError("need at least one point");
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d2 = (points.row(i) - points.row(j)).squaredNorm();
      D(i, j) = D(j, i) = d2;
    }
  }
  SquaredDistanceMatrix out;
  out.entries_ = std::move(D);
  return out;
}

Eigen::VectorXd WeightSpec::diagonal_weights(int n) const {
  if (mode == WeightMode::uniform) return Eigen::VectorXd::Ones(n);
  validate(n);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = std::max(tau, H.row(i).maxCoeff());
  return u;
}

void WeightSpec::validate(int n) const {
  if (tau <= 0.0) throw ValidationError("weight tau must be positive");
  if (mode == WeightMode::uniform) return;
  if (H.rows() != n || H.cols() != n) {
    throw ValidationError("weight matrix H has the wrong size");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
    throw ValidationError("weight matrix H must be symmetric");
  }
  if (H.minCoeff() < 0.0) {
    throw ValidationError("weight matrix H must be non-negative");
  }
}

Eigen::MatrixXd RigidTransform::apply(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out = points * rotation.transpose();
  out.rowwise() += translation.transpose();
  return out;
}

EigenSym eigen_sym_desc(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
  const Eigen::Index n = A.rows();
  EigenSym out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = es.eigenvalues()[n - 1 - k];
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
    fix_sign(out.vectors.col(k));
  }
  return out;
}

SquaredDistanceMatrix edm_from_points(const Eigen::MatrixXd& points) {
  return SquaredDistanceMatrix::from_points(points);
}

Eigen::MatrixXd double_center_matrix(const Eigen::MatrixXd& D) {
  Eigen::MatrixXd B = -0.5 * center_both(D);
  return 0.5 * (B + B.transpose());
}

Eigen::MatrixXd double_center(const SquaredDistanceMatrix& D) {
  return double_center_matrix(D.entries());
}

Embedding cmds_embed(const SquaredDistanceMatrix& D, int r) {
  if (r != 2 && r != 3) throw ValidationError("embedding dimension must be 2 or 3");
  const int n = D.n();
  if (n < r) throw ValidationError("need at least r points to embed in dimension r");

  const EigenSym es = eigen_sym_desc(double_center(D));
  Embedding out;
  out.points.resize(n, r);
  for (int k = 0; k < r; ++k) {
    const double lambda = std::max(0.0, es.values[k]);
    out.points.col(k) = es.vectors.col(k) * std::sqrt(lambda);
  }
  if (n > r) {
    const double lead = std::max(std::abs(es.values[0]), 1.0);
    out.degenerate_spectrum = es.values[r - 1] > 1e-12 * lead &&
                              std::abs(es.values[r - 1] - es.values[r]) <= 1e-12 * lead;
  }
  return out;
}

Eigen::MatrixXd project_cone_directed(const Eigen::MatrixXd& A,
                                      const Eigen::VectorXd& unit_center) {
  const Eigen::VectorXd& c = unit_center;
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  // JSJ with J = I - cc^T.
  const Eigen::VectorXd Sc = S * c;
  const double cSc = c.dot(Sc);
  Eigen::MatrixXd JSJ = S - Sc * c.transpose() - c * Sc.transpose() +
                        cSc * (c * c.transpose());
  JSJ = 0.5 * (JSJ + JSJ.transpose());

  const EigenSym es = eigen_sym_desc(JSJ);
  Eigen::MatrixXd nsd = Eigen::MatrixXd::Zero(A.rows(), A.cols());
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    if (es.values[k] < 0.0) {
      nsd.noalias() += es.values[k] * es.vectors.col(k) * es.vectors.col(k).transpose();
    }
  }
  Eigen::MatrixXd X = S - JSJ + nsd;
  return 0.5 * (X + X.transpose());
}

Eigen::MatrixXd project_cone(const Eigen::MatrixXd& A) {
  const Eigen::Index n = A.rows();
  const Eigen::VectorXd e =
      Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  return project_cone_directed(A, e);
}

RankPenalty rank_penalty_matrix(const Eigen::MatrixXd& D, int r) {
  if (r != 2 && r != 3) throw ValidationError("target rank must be 2 or 3");
  const Eigen::Index n = D.rows();
  RankPenalty out;
  if (n <= r) {
    out.value = 0.0;
    out.majorizer_gradient = Eigen::MatrixXd::Zero(n, n);
    return out;
  }
  const EigenSym es = eigen_sym_desc(double_center_matrix(D));
  out.value = std::max(0.0, es.values.tail(n - r).sum());
  out.positive_part = es.values.tail(n - r).cwiseMax(0.0).sum();

  // g = -1/2 J (I - P_r P_r^T) J: the active linear function in
  // q(D) = min over rank-(n-r) projectors Q of <Q, -1/2 JDJ>.
  const Eigen::MatrixXd Pr = es.vectors.leftCols(r);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - Pr * Pr.transpose();
  out.majorizer_gradient = -0.5 * center_both(M);
  out.majorizer_gradient =
      0.5 * (out.majorizer_gradient + out.majorizer_gradient.transpose());
  return out;
}

RankPenalty rank_penalty(const SquaredDistanceMatrix& D, int r) {
  return rank_penalty_matrix(D.entries(), r);
}

AlignmentResult procrustes_align(const Embedding& est,
                                 const std::vector<int>& anchor_indices,
                                 const Eigen::MatrixXd& anchor_coords) {
  const int r = est.dim();
  const int k = static_cast<int>(anchor_indices.size());
  if (k < r + 1) {
    std::ostringstream msg;
    msg << "alignment needs at least " << r + 1 << " anchors, got " << k;
    throw AlignmentUnderdeterminedError(msg.str());
  }
  if (anchor_coords.rows() != k || anchor_coords.cols() != r) {
    throw ValidationError("anchor coordinate matrix has the wrong shape");
  }
  std::vector<bool> seen(est.count(), false);
  for (int idx : anchor_indices) {
    if (idx < 0 || idx >= est.count() || seen[idx]) {
      throw ValidationError("anchor indices must be distinct and in range");
    }
    seen[idx] = true;
  }

  Eigen::MatrixXd E(k, r);
  for (int i = 0; i < k; ++i) E.row(i) = est.points.row(anchor_indices[i]);
  const Eigen::RowVectorXd e_mean = E.colwise().mean();
  const Eigen::RowVectorXd a_mean = anchor_coords.colwise().mean();
  const Eigen::MatrixXd Ec = E.rowwise() - e_mean;
  const Eigen::MatrixXd Ac = anchor_coords.rowwise() - a_mean;

  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ac);
    const auto& sv = svd.singularValues();
    if (sv[0] <= 0.0 || sv[r - 1] <= 1e-10 * sv[0]) {
      throw AlignmentUnderdeterminedError(
          "anchors are affinely degenerate; alignment is underdetermined");
    }
  }

  // R = V U^T from the SVD of C = Ec^T Ac maximizes tr(R C); reflections are
  // allowed, so no determinant correction.
  const Eigen::MatrixXd C = Ec.transpose() * Ac;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  RigidTransform transform;
  transform.rotation = svd.matrixV() * svd.matrixU().transpose();
  transform.translation =
      a_mean.transpose() - transform.rotation * e_mean.transpose();

  AlignmentResult out;
  out.transform = transform;
  out.aligned.points = transform.apply(est.points);
  out.aligned.degenerate_spectrum = est.degenerate_spectrum;
  double ss = 0.0;
  for (int i = 0; i < k; ++i) {
    ss += (out.aligned.points.row(anchor_indices[i]) - anchor_coords.row(i))
              .squaredNorm();
  }
  out.anchor_rms = std::sqrt(ss / k);
  return out;
}

}  // namespace edmpose
