#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edmpose/solver.hpp"

namespace edmpose {

// Point numbering follows the chain: points 1..p are the joints to locate
// (point 1 is the boom tip), point p+1 is the turntable, and points
// p+1..n are the anchors with known coordinates. Internally 0-based:
// targets 0..p-1, anchors p..n-1, anchors[0] is the turntable.
struct ManipulatorScene {
  int p = 0;
  std::vector<Eigen::Vector3d> anchors;
  std::vector<Eigen::Vector3d> priors;      // estimates from time t-1
  std::vector<double> arm_lengths;          // L_j between joints j and j+1
  std::string units = "m";

  int n() const { return p + static_cast<int>(anchors.size()); }
  void validate() const;
};

// delta[(i, j)] for target i in 0..p-1 and anchor j in p..n-1.
struct RangeMeasurements {
  std::map<std::pair<int, int>, double> delta;
};

struct PoseEstimate {
  std::vector<Eigen::Vector3d> joints;       // size p, index = point - 1
  Eigen::Vector3d turntable_estimate;        // embedded image of point p+1
  std::vector<double> joint_residuals;       // rms range misfit per joint
  std::optional<double> plane_angle;         // theta, CEPP only
  bool solver_converged = false;
  bool eps_optimal = false;
  double penalty_value = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  double anchor_rms = 0.0;
  int clamped_projections = 0;               // CEPP only
  double solve_seconds = 0.0;
};

// Observation matrix: exact anchor block, squared ranges for target-anchor
// pairs, prior distances for the target block.
SquaredDistanceMatrix build_G(const ManipulatorScene& scene,
                              const RangeMeasurements& meas);

// EPP pipeline in 3-D. use_arm_constraints=false is EPP1, true is EPP2.
PoseEstimate epp_localize(const ManipulatorScene& scene,
                          const RangeMeasurements& meas,
                          bool use_arm_constraints, const SolverConfig& cfg);

// Slope angle of the vertical working plane fitted through the turntable
// origin: total least squares on the priors' XY projections, theta in
// (-pi/2, pi/2].
double fit_vertical_plane(const std::vector<Eigen::Vector3d>& priors);

// Planar image (a, b) of a 3-D point: a along the line direction
// (cos theta, sin theta), b = z.
Eigen::Vector2d to_plane(const Eigen::Vector3d& w, double theta);

// Range seen from the anchor's planar image. Throws
// InfeasibleProjectionError on a negative radicand unless `clamp` is set.
double project_distance(double delta, const Eigen::Vector3d& anchor,
                        double theta, bool clamp = false);

Eigen::Vector3d from_plane(const Eigen::Vector2d& q, double theta);

// CEPP pipeline: plane fit, coordinate transform, distance projection,
// 2-D solve with arm constraints, back-transform.
PoseEstimate cepp_localize(const ManipulatorScene& scene,
                           const RangeMeasurements& meas,
                           const SolverConfig& cfg,
                           bool clamp_infeasible = false);

// Dataset-driven variants for a fully measured matrix G (all blocks
// observed); build_G is skipped.
PoseEstimate epp_localize_matrix(const SquaredDistanceMatrix& G,
                                 const std::vector<Eigen::Vector3d>& anchors,
                                 const std::vector<double>& arm_lengths,
                                 bool use_arm_constraints,
                                 const SolverConfig& cfg);
PoseEstimate cepp_localize_matrix(const SquaredDistanceMatrix& G,
                                  const std::vector<Eigen::Vector3d>& anchors,
                                  const std::vector<double>& arm_lengths,
                                  const std::vector<Eigen::Vector3d>& priors,
                                  const SolverConfig& cfg,
                                  bool clamp_infeasible = false);

enum class PostureMethod { EPP1, EPP2, CEPP2 };

// Time-series loop: each estimate becomes the next step's priors.
std::vector<PoseEstimate> track(const ManipulatorScene& initial_scene,
                                const std::vector<RangeMeasurements>& steps,
                                PostureMethod method, const SolverConfig& cfg);

}  // namespace edmpose
