#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edmpose/baselines.hpp"
#include "edmpose/posture.hpp"

namespace edmpose {

// --- seeding -----------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream per (master seed, stream tag, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index);

inline constexpr std::uint64_t kPoseStream = 0x706f7365;   // pose generation
inline constexpr std::uint64_t kNoiseStream = 0x6e6f6973;  // range noise
inline constexpr std::uint64_t kAngleStream = 0x616e676c;  // TPSM angle noise

// --- noise models ------------------------------------------------------

enum class NoiseKind { multiplicative, additive, nlos };

struct NoiseModel {
  NoiseKind kind = NoiseKind::multiplicative;
  double eta = 0.0;            // multiplicative factor, in [0, 1]
  double sigma = 0.0;          // additive std dev, length units
  double gamma = 0.0;          // NLOS exponential mean, length units
  double nlos_fraction = 0.3;  // fraction of target-anchor pairs biased
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseStats {
  int resamples = 0;  // negative draws redrawn
  int nlos_pairs = 0;
};

// True pairwise ranges keyed like RangeMeasurements.
using TrueRanges = std::map<std::pair<int, int>, double>;

RangeMeasurements apply_noise(const TrueRanges& ranges, const NoiseModel& model,
                              NoiseStats* stats = nullptr);

// --- scenes and poses --------------------------------------------------

struct SceneTemplate {
  // Segment lengths in walk order from the turntable outward; the scene's
  // L_1..L_p (tip-first point numbering) is this list reversed.
  std::vector<double> arm_lengths_from_base;
  std::vector<Eigen::Vector3d> anchors;  // anchors[0] = turntable
  std::string units = "m";
  double prior_radius = 0.5;     // priors = truth + uniform ball
  double pitch_min_deg = -20.0;  // accumulated-pitch sampling range
  double pitch_max_deg = 70.0;

  // Five-segment boom (9,7,7,9,9 m from the turntable) with four anchors,
  // one elevated; turntable at the origin.
  static SceneTemplate large_manipulator();
  // Same geometry used in concrete-pump (coplanar) experiments.
  static SceneTemplate concrete_pump();
};

enum class PoseMode { planar_random, angles };

struct PoseGenConfig {
  PoseMode mode = PoseMode::planar_random;
  std::optional<AngleReading> angles;  // required for PoseMode::angles
  std::uint64_t seed = 0;
};

struct GeneratedScene {
  ManipulatorScene scene;               // priors filled in
  std::vector<Eigen::Vector3d> truth;   // size p, index = point - 1
  AngleReading true_angles;             // walk order
};

GeneratedScene gen_pose(const SceneTemplate& tmpl, const PoseGenConfig& cfg);

// All target-anchor ranges of the generated pose.
TrueRanges true_ranges(const GeneratedScene& gs);

// --- metrics -----------------------------------------------------------

// (1/sqrt(p)) * sqrt(sum ||est_i - truth_i||^2).
double rmse(const std::vector<Eigen::Vector3d>& est,
            const std::vector<Eigen::Vector3d>& truth);

// --- experiments -------------------------------------------------------

enum class Method { EPP1, EPP2, CEPP2, SRLS, TPSM };

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct ExperimentConfig {
  SceneTemplate scene;
  std::vector<Method> methods;
  NoiseModel noise;                 // sweep values patch the primary parameter
  std::vector<double> noise_sweep;  // eta / sigma / gamma depending on kind
  int runs = 100;
  std::uint64_t seed = 0;
  std::string output_path;  // empty: caller handles output
  int threads = 0;          // 0: EDMPOSE_THREADS env var, else hardware
  SolverConfig solver;
  double tpsm_pitch_noise_deg = 5.0;
  double tpsm_azimuth_noise_deg = 0.5;
  bool clamp_infeasible = true;  // CEPP distance projection under heavy noise

  void validate() const;
};

struct MethodRunResult {
  double rmse = 0.0;
  std::vector<double> arm_abs_err;  // per segment j = 1..p
  double seconds = 0.0;
  bool ok = false;
};

struct RunRecord {
  int level_index = 0;
  int run_index = 0;
  double noise_value = 0.0;
  std::map<Method, MethodRunResult> per_method;
  int noise_resamples = 0;
};

struct ReportRow {
  Method method;
  double noise_value = 0.0;
  double mean_rmse = 0.0;
  double median_rmse = 0.0;
  std::vector<double> mean_arm_err;
  double mean_seconds = 0.0;
  int runs = 0;
  int failures = 0;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  int runs_per_level = 0;
  int segments = 0;
  std::vector<ReportRow> rows;        // ordered by (noise level, method)
  std::vector<RunRecord> records;     // raw per-run data, merge-friendly

  const ReportRow& row(Method m, double noise_value) const;

  // simulate: deterministic columns only (no timing), plus median and
  // failure counts. compare: method, noise_param, mean_rmse,
  // mean_arm_err_1..p, mean_seconds, runs, seed.
  enum class CsvStyle { simulate, compare };
  std::string to_csv(CsvStyle style) const;
};

// Order-independent merge on the raw records; aggregates are recomputed in
// sorted order, so merging half-reports reproduces the full report exactly.
MetricsReport merge_reports(const MetricsReport& a, const MetricsReport& b);

// Serial reference implementation.
MetricsReport run_experiment_serial(const ExperimentConfig& cfg);

// OpenMP over independent runs; bit-identical to the serial path.
MetricsReport run_experiment(const ExperimentConfig& cfg);

// One (level, run) cell; exposed for the parallel driver and tests.
RunRecord run_single(const ExperimentConfig& cfg, int level_index, int run_index);

int resolve_threads(int requested);

}  // namespace edmpose
