#pragma once

#include <Eigen/Dense>
#include <vector>

#include "edmpose/errors.hpp"

namespace edmpose {

struct SrlsResult {
  Eigen::VectorXd point;
  bool converged = false;
  int iters = 0;
  double objective = 0.0;  // sum of (||x - a_j||^2 - delta_j^2)^2
};

// Squared-range least squares: global minimizer of
// sum_j (||x - a_j||^2 - delta_j^2)^2 via the generalized trust-region
// subproblem, multiplier root isolated by bisection. One target per call.
SrlsResult srls_localize(const Eigen::MatrixXd& anchors,
                         const Eigen::VectorXd& ranges);

double srls_objective(const Eigen::VectorXd& x, const Eigen::MatrixXd& anchors,
                      const Eigen::VectorXd& ranges);

// Relative pitch angles between adjacent arms, walk order from the
// turntable outward, plus the shared turntable azimuth.
struct AngleReading {
  std::vector<double> relative_pitch;  // radians, size p
  double turntable_azimuth = 0.0;      // radians
};

// Chain forward kinematics: accumulate pitch along the chain inside the
// vertical plane set by the azimuth. Returns joint positions in walk order
// (base-adjacent joint first).
std::vector<Eigen::Vector3d> tpsm_localize(
    const std::vector<double>& arm_lengths_from_base, const AngleReading& reading,
    const Eigen::Vector3d& base);

}  // namespace edmpose
