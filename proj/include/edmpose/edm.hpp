#pragma once

#include <Eigen/Dense>
#include <vector>

#include "edmpose/errors.hpp"

namespace edmpose {

// Symmetric hollow matrix of squared inter-point distances. The constructor
// validates symmetry, hollowness and non-negativity within `tol` (scaled by
// the largest entry) and then canonicalizes the stored entries so the
// invariants hold exactly: symmetrized, zero diagonal, negatives clamped.
class SquaredDistanceMatrix {
 public:
  SquaredDistanceMatrix() = default;
  explicit SquaredDistanceMatrix(Eigen::MatrixXd entries, double tol = 1e-8);

  static SquaredDistanceMatrix from_points(const Eigen::MatrixXd& points);

  int n() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const {
    return entries_(i, j);
  }

 private:
  Eigen::MatrixXd entries_;
};

// Coordinates recovered by classical MDS; rows are points.
struct Embedding {
  Eigen::MatrixXd points;            // n x r
  bool degenerate_spectrum = false;  // lambda_r == lambda_{r+1} > 0 at the cut
  int dim() const { return static_cast<int>(points.cols()); }
  int count() const { return static_cast<int>(points.rows()); }
};

enum class WeightMode { uniform, general };

struct WeightSpec {
  WeightMode mode = WeightMode::uniform;
  Eigen::MatrixXd H;  // general mode only; symmetric, non-negative
  double tau = 1e-3;  // floor for the derived diagonal weight

  // u_i = max(tau, max_j H_ij); all ones in uniform mode.
  Eigen::VectorXd diagonal_weights(int n) const;
  void validate(int n) const;
};

// Rotation (reflection allowed) plus translation acting on row-vector points.
struct RigidTransform {
  Eigen::MatrixXd rotation;     // r x r orthogonal
  Eigen::VectorXd translation;  // r
  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
};

// Deterministic symmetric eigendecomposition: eigenvalues descending, each
// eigenvector's first non-negligible component made positive.
struct EigenSym {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
};
EigenSym eigen_sym_desc(const Eigen::MatrixXd& A);

SquaredDistanceMatrix edm_from_points(const Eigen::MatrixXd& points);

// B = -1/2 J D J with J = I - ee^T/n. Zero row sums; PSD iff D is a true EDM.
Eigen::MatrixXd double_center(const SquaredDistanceMatrix& D);
Eigen::MatrixXd double_center_matrix(const Eigen::MatrixXd& D);

Embedding cmds_embed(const SquaredDistanceMatrix& D, int r);

// Frobenius-nearest matrix X with v^T X v <= 0 for all v orthogonal to e:
// X = A - JAJ + nsd(JAJ). Idempotent.
Eigen::MatrixXd project_cone(const Eigen::MatrixXd& A);

// Same cone with an arbitrary unit centering direction replacing e/sqrt(n).
Eigen::MatrixXd project_cone_directed(const Eigen::MatrixXd& A,
                                      const Eigen::VectorXd& unit_center);

// q(D) = sum_{i>r} lambda_i(-1/2 JDJ), zero iff rank(JDJ) <= r, with a
// supergradient valid for majorization: q(D') <= q(D) + <g, D'-D>.
// positive_part clamps each tail eigenvalue at zero first; it agrees with
// value on cone members but cannot cancel to zero off the cone.
struct RankPenalty {
  double value = 0.0;
  double positive_part = 0.0;
  Eigen::MatrixXd majorizer_gradient;
};
RankPenalty rank_penalty(const SquaredDistanceMatrix& D, int r);
RankPenalty rank_penalty_matrix(const Eigen::MatrixXd& D, int r);

struct AlignmentResult {
  Embedding aligned;
  RigidTransform transform;
  double anchor_rms = 0.0;  // rms anchor mismatch after alignment
};

// Least-squares rigid alignment (orthogonal Procrustes, reflection allowed)
// of the estimated rows at `anchor_indices` onto `anchor_coords`; the fitted
// transform is applied to every row.
AlignmentResult procrustes_align(const Embedding& est,
                                 const std::vector<int>& anchor_indices,
                                 const Eigen::MatrixXd& anchor_coords);

}  // namespace edmpose
