#include "edmpose/posture.hpp"

#include <cmath>
#include <sstream>

namespace edmpose {

namespace {

// Observation matrix from explicit point blocks; works in any dimension.
SquaredDistanceMatrix assemble_G(const Eigen::MatrixXd& priors,
                                 const Eigen::MatrixXd& anchors,
                                 const std::map<std::pair<int, int>, double>& delta) {
  const int p = static_cast<int>(priors.rows());
  const int k = static_cast<int>(anchors.rows());
  const int n = p + k;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < i; ++j) {
      const double d2 = (priors.row(i) - priors.row(j)).squaredNorm();
      G(i, j) = G(j, i) = d2;
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < i; ++j) {
      const double d2 = (anchors.row(i) - anchors.row(j)).squaredNorm();
      G(p + i, p + j) = G(p + j, p + i) = d2;
    }
  }
  for (int i = 0; i < p; ++i) {
    for (int j = p; j < n; ++j) {
      const auto it = delta.find({i, j});
      if (it == delta.end()) {
        std::ostringstream msg;
        msg << "missing range between target " << i + 1 << " and anchor "
            << j + 1;
        throw IncompleteMeasurementError(msg.str(), i + 1, j + 1);
      }
      if (it->second < 0.0) {
        throw ValidationError("ranges must be non-negative");
      }
      G(i, j) = G(j, i) = it->second * it->second;
    }
  }
  return SquaredDistanceMatrix(G);
}

std::vector<int> anchor_index_list(int p, int n) {
  std::vector<int> idx;
  idx.reserve(n - p);
  for (int j = p; j < n; ++j) idx.push_back(j);
  return idx;
}

// Shared tail of every pipeline: solve, embed, align, package.
PoseEstimate finish_solve(const SquaredDistanceMatrix& G,
                          const Eigen::MatrixXd& anchor_coords, int p, int rank,
                          const std::vector<ArmConstraint>& arms,
                          const SolverConfig& cfg) {
  NedmProblem problem;
  problem.G = G;
  problem.arm_constraints = arms;
  problem.target_rank = rank;

  const SolveResult res = solve(problem, cfg);
  const Embedding emb = cmds_embed(res.D_star, rank);
  const AlignmentResult aligned =
      procrustes_align(emb, anchor_index_list(p, G.n()), anchor_coords);

  PoseEstimate est;
  est.joints.resize(p);
  for (int i = 0; i < p; ++i) {
    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    w.head(rank) = aligned.aligned.points.row(i).transpose();
    est.joints[i] = w;
  }
  Eigen::Vector3d tt = Eigen::Vector3d::Zero();
  tt.head(rank) = aligned.aligned.points.row(p).transpose();
  est.turntable_estimate = tt;

  est.solver_converged = res.subproblems_converged;
  est.eps_optimal = res.eps_optimal;
  est.penalty_value = res.penalty_value;
  est.outer_iters = res.outer_iters;
  est.inner_iters = res.inner_iters;
  est.anchor_rms = aligned.anchor_rms;
  est.solve_seconds = res.wallclock_seconds;
  return est;
}

// rms of |est-to-anchor distance - measured range| per joint.
void fill_residuals(PoseEstimate& est, const Eigen::MatrixXd& anchor_pts,
                    const std::map<std::pair<int, int>, double>& delta, int p,
                    int rank) {
  est.joint_residuals.assign(p, 0.0);
  std::vector<int> counts(p, 0);
  for (const auto& [key, d] : delta) {
    const auto [i, j] = key;
    Eigen::VectorXd w(rank);
    if (rank == 3) {
      w = est.joints[i];
    } else {
      w = to_plane(est.joints[i], est.plane_angle.value()).head(2);
    }
    const double dist = (w - anchor_pts.row(j - p).transpose()).norm();
    est.joint_residuals[i] += (dist - d) * (dist - d);
    ++counts[i];
  }
  for (int i = 0; i < p; ++i) {
    if (counts[i] > 0) est.joint_residuals[i] = std::sqrt(est.joint_residuals[i] / counts[i]);
  }
}

Eigen::MatrixXd rows_from(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::MatrixXd M(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) M.row(i) = pts[i].transpose();
  return M;
}

}  // namespace

void ManipulatorScene::validate() const {
  if (p < 1) throw ValidationError("scene needs at least one joint");
  if (anchors.empty()) throw ValidationError("scene needs at least one anchor");
  if (static_cast<int>(priors.size()) != p) {
    throw ValidationError("scene needs one prior per joint");
  }
  if (static_cast<int>(arm_lengths.size()) != p) {
    throw ValidationError("scene needs one arm length per joint");
  }
  for (double L : arm_lengths) {
    if (!(L > 0.0)) throw ValidationError("arm lengths must be positive");
  }
  if (units != "m" && units != "cm") {
    throw ValidationError("units must be 'm' or 'cm'");
  }
}

SquaredDistanceMatrix build_G(const ManipulatorScene& scene,
                              const RangeMeasurements& meas) {
  scene.validate();
  return assemble_G(rows_from(scene.priors), rows_from(scene.anchors), meas.delta);
}

PoseEstimate epp_localize(const ManipulatorScene& scene,
                          const RangeMeasurements& meas,
                          bool use_arm_constraints, const SolverConfig& cfg) {
  const SquaredDistanceMatrix G = build_G(scene, meas);
  const Eigen::MatrixXd anchor_pts = rows_from(scene.anchors);
  const std::vector<ArmConstraint> arms =
      use_arm_constraints ? chain_constraints(scene.arm_lengths)
                          : std::vector<ArmConstraint>{};
  PoseEstimate est = finish_solve(G, anchor_pts, scene.p, 3, arms, cfg);
  fill_residuals(est, anchor_pts, meas.delta, scene.p, 3);
  return est;
}

double fit_vertical_plane(const std::vector<Eigen::Vector3d>& priors) {
  if (priors.size() < 2) {
    throw ValidationError("plane fit needs at least two priors");
  }
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  double extent = 0.0;
  for (const auto& w : priors) {
    const Eigen::Vector2d xy = w.head<2>();
    S += xy * xy.transpose();
    extent = std::max(extent, xy.norm());
  }
  if (extent <= 1e-9) {
    throw PlaneUndeterminedError(
        "priors project onto the turntable origin; working plane undetermined");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
  const Eigen::Vector2d dir = es.eigenvectors().col(1);  // largest eigenvalue
  double theta = std::atan2(dir.y(), dir.x());
  if (theta > M_PI / 2) theta -= M_PI;
  if (theta <= -M_PI / 2) theta += M_PI;
  return theta;
}

Eigen::Vector2d to_plane(const Eigen::Vector3d& w, double theta) {
  // sign(x)*sqrt(x^2 + (x tan)^2) + sin*(y - x tan) == x cos + y sin.
  return {w.x() * std::cos(theta) + w.y() * std::sin(theta), w.z()};
}

double project_distance(double delta, const Eigen::Vector3d& anchor,
                        double theta, bool clamp) {
  // delta^2 - x^2 - y^2 + a^2 with a = x cos + y sin reduces to
  // delta^2 - perp^2, perp the horizontal offset from the plane.
  const double perp = anchor.y() * std::cos(theta) - anchor.x() * std::sin(theta);
  const double radicand = (delta - perp) * (delta + perp);
  if (radicand < 0.0) {
    if (clamp) return 0.0;
    std::ostringstream msg;
    msg << "range " << delta << " shorter than the anchor's out-of-plane offset "
        << std::abs(perp);
    throw InfeasibleProjectionError(msg.str(), -radicand);
  }
  return std::sqrt(radicand);
}

Eigen::Vector3d from_plane(const Eigen::Vector2d& q, double theta) {
  return {q.x() * std::cos(theta), q.x() * std::sin(theta), q.y()};
}

namespace {

PoseEstimate cepp_common(const Eigen::MatrixXd& prior_block_2d,
                         const std::map<std::pair<int, int>, double>& delta_2d,
                         const std::optional<SquaredDistanceMatrix>& full_G_2d,
                         const std::vector<Eigen::Vector3d>& anchors,
                         const std::vector<double>& arm_lengths, double theta,
                         int clamped, const SolverConfig& cfg) {
  const int p = static_cast<int>(arm_lengths.size());
  Eigen::MatrixXd anchors_2d(anchors.size(), 2);
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    anchors_2d.row(j) = to_plane(anchors[j], theta).transpose();
  }

  SquaredDistanceMatrix G =
      full_G_2d ? *full_G_2d : assemble_G(prior_block_2d, anchors_2d, delta_2d);

  PoseEstimate planar = finish_solve(G, anchors_2d, p, 2,
                                     chain_constraints(arm_lengths), cfg);
  for (auto& w : planar.joints) {
    w = from_plane(Eigen::Vector2d(w.x(), w.y()), theta);
  }
  planar.turntable_estimate = from_plane(
      Eigen::Vector2d(planar.turntable_estimate.x(), planar.turntable_estimate.y()),
      theta);
  planar.plane_angle = theta;
  planar.clamped_projections = clamped;
  return planar;
}

}  // namespace

PoseEstimate cepp_localize(const ManipulatorScene& scene,
                           const RangeMeasurements& meas,
                           const SolverConfig& cfg, bool clamp_infeasible) {
  scene.validate();
  const double theta = fit_vertical_plane(scene.priors);

  Eigen::MatrixXd priors_2d(scene.p, 2);
  for (int i = 0; i < scene.p; ++i) {
    priors_2d.row(i) = to_plane(scene.priors[i], theta).transpose();
  }
  int clamped = 0;
  std::map<std::pair<int, int>, double> delta_2d;
  for (const auto& [key, d] : meas.delta) {
    const auto& anchor = scene.anchors[key.second - scene.p];
    const double projected = project_distance(d, anchor, theta, clamp_infeasible);
    if (clamp_infeasible && projected == 0.0 && d > 0.0) ++clamped;
    delta_2d[key] = projected;
  }

  PoseEstimate est = cepp_common(priors_2d, delta_2d, std::nullopt, scene.anchors,
                                 scene.arm_lengths, theta, clamped, cfg);
  Eigen::MatrixXd anchors_2d(scene.anchors.size(), 2);
  for (std::size_t j = 0; j < scene.anchors.size(); ++j) {
    anchors_2d.row(j) = to_plane(scene.anchors[j], theta).transpose();
  }
  fill_residuals(est, anchors_2d, delta_2d, scene.p, 2);
  return est;
}

PoseEstimate epp_localize_matrix(const SquaredDistanceMatrix& G,
                                 const std::vector<Eigen::Vector3d>& anchors,
                                 const std::vector<double>& arm_lengths,
                                 bool use_arm_constraints,
                                 const SolverConfig& cfg) {
  const int p = G.n() - static_cast<int>(anchors.size());
  if (p < 1 || static_cast<int>(arm_lengths.size()) != p) {
    throw ValidationError("matrix size, anchors and arm lengths disagree");
  }
  const std::vector<ArmConstraint> arms =
      use_arm_constraints ? chain_constraints(arm_lengths)
                          : std::vector<ArmConstraint>{};
  PoseEstimate est = finish_solve(G, rows_from(anchors), p, 3, arms, cfg);
  std::map<std::pair<int, int>, double> delta;
  for (int i = 0; i < p; ++i) {
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      delta[{i, p + static_cast<int>(a)}] = std::sqrt(std::max(0.0, G(i, p + a)));
    }
  }
  fill_residuals(est, rows_from(anchors), delta, p, 3);
  return est;
}

PoseEstimate cepp_localize_matrix(const SquaredDistanceMatrix& G,
                                  const std::vector<Eigen::Vector3d>& anchors,
                                  const std::vector<double>& arm_lengths,
                                  const std::vector<Eigen::Vector3d>& priors,
                                  const SolverConfig& cfg,
                                  bool clamp_infeasible) {
  const int p = G.n() - static_cast<int>(anchors.size());
  const int n = G.n();
  if (p < 1 || static_cast<int>(arm_lengths.size()) != p ||
      static_cast<int>(priors.size()) != p) {
    throw ValidationError("matrix size, anchors, priors and arm lengths disagree");
  }
  const double theta = fit_vertical_plane(priors);

  // Target-anchor ranges get projected; the measured target block passes
  // through unchanged (in-plane distances are invariant).
  int clamped = 0;
  Eigen::MatrixXd G2 = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) G2(i, j) = G(i, j);
  }
  Eigen::MatrixXd anchors_2d(anchors.size(), 2);
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    anchors_2d.row(j) = to_plane(anchors[j], theta).transpose();
  }
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      const double d2 = (anchors_2d.row(a) - anchors_2d.row(b)).squaredNorm();
      G2(p + a, p + b) = G2(p + b, p + a) = d2;
    }
  }
  for (int i = 0; i < p; ++i) {
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double d = std::sqrt(std::max(0.0, G(i, p + a)));
      const double projected = project_distance(d, anchors[a], theta, clamp_infeasible);
      if (clamp_infeasible && projected == 0.0 && d > 0.0) ++clamped;
      G2(i, p + a) = G2(p + a, i) = projected * projected;
    }
  }

  PoseEstimate est = cepp_common(Eigen::MatrixXd(), {}, SquaredDistanceMatrix(G2),
                                 anchors, arm_lengths, theta, clamped, cfg);
  std::map<std::pair<int, int>, double> delta_2d;
  for (int i = 0; i < p; ++i) {
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      delta_2d[{i, p + static_cast<int>(a)}] = std::sqrt(std::max(0.0, G2(i, p + a)));
    }
  }
  fill_residuals(est, anchors_2d, delta_2d, p, 2);
  return est;
}

std::vector<PoseEstimate> track(const ManipulatorScene& initial_scene,
                                const std::vector<RangeMeasurements>& steps,
                                PostureMethod method, const SolverConfig& cfg) {
  ManipulatorScene scene = initial_scene;
  std::vector<PoseEstimate> out;
  out.reserve(steps.size());
  for (const auto& meas : steps) {
    PoseEstimate est;
    switch (method) {
      case PostureMethod::EPP1:
        est = epp_localize(scene, meas, false, cfg);
        break;
      case PostureMethod::EPP2:
        est = epp_localize(scene, meas, true, cfg);
        break;
      case PostureMethod::CEPP2:
        est = cepp_localize(scene, meas, cfg);
        break;
    }
    scene.priors = est.joints;
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace edmpose
