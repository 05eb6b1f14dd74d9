#pragma once

#include <iosfwd>
#include <string>

#include "edmpose/sim.hpp"

namespace edmpose {

// Scene file: `units`, repeated `anchor:`/`prior:` coordinate lines,
// `arm_lengths` (L_1..L_p), repeated `meas: i j delta` records with 1-based
// point indices. '#' starts a comment.
struct SceneFile {
  ManipulatorScene scene;
  RangeMeasurements measurements;
};

SceneFile load_scene(const std::string& path);
SceneFile parse_scene(std::istream& in, const std::string& origin);
std::string scene_to_text(const SceneFile& sf);
void save_scene(const SceneFile& sf, const std::string& path);

enum class EntrySemantics { squared, linear };

// Semi-physical concrete-pump dataset: a fully measured n x n matrix given
// as lower-triangular rows, anchor coordinates, one shared arm length.
struct SemiphysicalData {
  Eigen::MatrixXd raw;           // entries exactly as stored in the file
  EntrySemantics semantics = EntrySemantics::squared;
  std::vector<Eigen::Vector3d> anchors;
  double arm_length = 0.0;
  std::string units = "cm";
  int targets = 0;

  // Canonical squared-distance interpretation of `raw` under `semantics`.
  SquaredDistanceMatrix squared() const;
  std::vector<double> arm_lengths() const;
};

SemiphysicalData load_semiphysical(const std::string& path);
SemiphysicalData parse_semiphysical(std::istream& in, const std::string& origin);

// Bundled fixture location (overridable via the EDMPOSE_FIXTURE env var).
std::string default_fixture_path();

// Experiment config file: top-level keys (seed, runs, methods, threads,
// output) plus [scene], [noise] and [solver] sections.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(std::istream& in,
                                         const std::string& origin);

// JSON pose document: per-joint xyz, plane angle when present, diagnostics.
std::string pose_to_json(const PoseEstimate& est, const std::string& units);

}  // namespace edmpose
