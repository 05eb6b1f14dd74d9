#include "edmpose/sim.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <tuple>

namespace edmpose {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
  return splitmix64(splitmix64(master ^ stream) + index);
}

void NoiseModel::validate() const {
  switch (kind) {
    case NoiseKind::multiplicative:
      if (eta < 0.0 || eta > 1.0) throw ValidationError("eta must be in [0, 1]");
      break;
    case NoiseKind::additive:
      if (sigma < 0.0) throw ValidationError("sigma must be non-negative");
      break;
    case NoiseKind::nlos:
      if (sigma < 0.0) throw ValidationError("sigma must be non-negative");
      if (gamma <= 0.0) throw ValidationError("gamma must be positive");
      if (nlos_fraction < 0.0 || nlos_fraction > 1.0) {
        throw ValidationError("nlos_fraction must be in [0, 1]");
      }
      break;
  }
}

RangeMeasurements apply_noise(const TrueRanges& ranges, const NoiseModel& model,
                              NoiseStats* stats) {
  model.validate();
  std::mt19937_64 rng(derive_seed(model.seed, kNoiseStream, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(
      model.kind == NoiseKind::nlos ? 1.0 / model.gamma : 1.0);

  RangeMeasurements out;
  NoiseStats local;
  for (const auto& [key, d] : ranges) {
    bool nlos_pair = false;
    if (model.kind == NoiseKind::nlos) {
      nlos_pair = unif(rng) < model.nlos_fraction;
      if (nlos_pair) ++local.nlos_pairs;
    }
    double delta = -1.0;
    for (int attempt = 0; attempt < 1000 && delta < 0.0; ++attempt) {
      if (attempt > 0) ++local.resamples;
      switch (model.kind) {
        case NoiseKind::multiplicative:
          delta = d * (1.0 + gauss(rng) * model.eta);
          break;
        case NoiseKind::additive:
          delta = d + gauss(rng) * model.sigma;
          break;
        case NoiseKind::nlos:
          delta = d + gauss(rng) * model.sigma + (nlos_pair ? expo(rng) : 0.0);
          break;
      }
    }
    out.delta[key] = std::max(delta, 0.0);
  }
  if (stats) *stats = local;
  return out;
}

SceneTemplate SceneTemplate::large_manipulator() {
  SceneTemplate t;
  t.arm_lengths_from_base = {9.0, 7.0, 7.0, 9.0, 9.0};
  t.anchors = {{0.0, 0.0, 0.0},
               {0.0, 42.0, 0.0},
               {40.0, 42.0, 0.0},
               {22.1, 16.7, 24.7}};
  t.units = "m";
  t.prior_radius = 0.5;
  return t;
}

SceneTemplate SceneTemplate::concrete_pump() { return large_manipulator(); }

GeneratedScene gen_pose(const SceneTemplate& tmpl, const PoseGenConfig& cfg) {
  const int p = static_cast<int>(tmpl.arm_lengths_from_base.size());
  if (p < 1) throw ValidationError("scene template needs arm lengths");
  if (tmpl.anchors.empty()) throw ValidationError("scene template needs anchors");

  std::mt19937_64 rng(derive_seed(cfg.seed, kPoseStream, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  AngleReading angles;
  if (cfg.mode == PoseMode::angles) {
    if (!cfg.angles) throw ValidationError("angles mode requires an AngleReading");
    angles = *cfg.angles;
    if (angles.relative_pitch.size() != static_cast<std::size_t>(p)) {
      throw ValidationError("one relative pitch per segment required");
    }
  } else {
    angles.turntable_azimuth = -M_PI + 2.0 * M_PI * unif(rng);
    const double lo = tmpl.pitch_min_deg * M_PI / 180.0;
    const double hi = tmpl.pitch_max_deg * M_PI / 180.0;
    double prev = 0.0;
    angles.relative_pitch.resize(p);
    for (int j = 0; j < p; ++j) {
      const double accumulated = lo + (hi - lo) * unif(rng);
      angles.relative_pitch[j] = accumulated - prev;
      prev = accumulated;
    }
  }

  const std::vector<Eigen::Vector3d> walk =
      tpsm_localize(tmpl.arm_lengths_from_base, angles, tmpl.anchors[0]);

  GeneratedScene gs;
  gs.true_angles = angles;
  gs.scene.p = p;
  gs.scene.anchors = tmpl.anchors;
  gs.scene.units = tmpl.units;
  gs.scene.arm_lengths.resize(p);
  for (int j = 0; j < p; ++j) {
    // Walk index i reaches point p - i; segment between points j and j+1 is
    // walk segment p - j.
    gs.scene.arm_lengths[j] = tmpl.arm_lengths_from_base[p - 1 - j];
  }
  gs.truth.resize(p);
  for (int i = 0; i < p; ++i) gs.truth[p - 1 - i] = walk[i];

  gs.scene.priors.resize(p);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < p; ++i) {
    Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
    const double norm = dir.norm();
    if (norm > 0.0) dir /= norm;
    const double radius = tmpl.prior_radius * std::cbrt(unif(rng));
    gs.scene.priors[i] = gs.truth[i] + radius * dir;
  }
  return gs;
}

TrueRanges true_ranges(const GeneratedScene& gs) {
  TrueRanges out;
  const int p = gs.scene.p;
  for (int i = 0; i < p; ++i) {
    for (std::size_t a = 0; a < gs.scene.anchors.size(); ++a) {
      out[{i, p + static_cast<int>(a)}] =
          (gs.truth[i] - gs.scene.anchors[a]).norm();
    }
  }
  return out;
}

double rmse(const std::vector<Eigen::Vector3d>& est,
            const std::vector<Eigen::Vector3d>& truth) {
  if (est.size() != truth.size()) {
    throw ValidationError("rmse needs equal-length lists");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    ss += (est[i] - truth[i]).squaredNorm();
  }
  return std::sqrt(ss) / std::sqrt(static_cast<double>(est.size()));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::EPP1: return "epp1";
    case Method::EPP2: return "epp2";
    case Method::CEPP2: return "cepp2";
    case Method::SRLS: return "srls";
    case Method::TPSM: return "tpsm";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "epp1") return Method::EPP1;
  if (s == "epp2") return Method::EPP2;
  if (s == "cepp2") return Method::CEPP2;
  if (s == "srls" || s == "sr-ls") return Method::SRLS;
  if (s == "tpsm") return Method::TPSM;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw ValidationError("runs must be >= 1");
  if (methods.empty()) throw ValidationError("at least one method required");
  if (scene.arm_lengths_from_base.empty() || scene.anchors.empty()) {
    throw ValidationError("experiment scene is incomplete");
  }
  NoiseModel probe = noise;
  for (double v : noise_sweep) {
    switch (noise.kind) {
      case NoiseKind::multiplicative: probe.eta = v; break;
      case NoiseKind::additive: probe.sigma = v; break;
      case NoiseKind::nlos: probe.gamma = v; break;
    }
    probe.validate();
  }
  if (noise_sweep.empty()) noise.validate();
}

namespace {

NoiseModel level_model(const ExperimentConfig& cfg, int level_index) {
  NoiseModel m = cfg.noise;
  if (!cfg.noise_sweep.empty()) {
    const double v = cfg.noise_sweep[level_index];
    switch (m.kind) {
      case NoiseKind::multiplicative: m.eta = v; break;
      case NoiseKind::additive: m.sigma = v; break;
      case NoiseKind::nlos: m.gamma = v; break;
    }
  }
  return m;
}

double level_value(const ExperimentConfig& cfg, int level_index) {
  if (!cfg.noise_sweep.empty()) return cfg.noise_sweep[level_index];
  switch (cfg.noise.kind) {
    case NoiseKind::multiplicative: return cfg.noise.eta;
    case NoiseKind::additive: return cfg.noise.sigma;
    case NoiseKind::nlos: return cfg.noise.gamma;
  }
  return 0.0;
}

int level_count(const ExperimentConfig& cfg) {
  return cfg.noise_sweep.empty() ? 1 : static_cast<int>(cfg.noise_sweep.size());
}

// Arm errors along an estimated chain; `turntable` closes segment p.
std::vector<double> chain_arm_errors(const std::vector<Eigen::Vector3d>& joints,
                                     const Eigen::Vector3d& turntable,
                                     const std::vector<double>& arm_lengths) {
  const int p = static_cast<int>(arm_lengths.size());
  std::vector<double> err(p, 0.0);
  for (int j = 0; j < p; ++j) {
    const Eigen::Vector3d& a = joints[j];
    const Eigen::Vector3d& b = (j + 1 < p) ? joints[j + 1] : turntable;
    err[j] = std::abs((a - b).norm() - arm_lengths[j]);
  }
  return err;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

MethodRunResult eval_method(Method m, const ExperimentConfig& cfg,
                            const GeneratedScene& gs,
                            const RangeMeasurements& meas,
                            std::uint64_t angle_seed) {
  const int p = gs.scene.p;
  MethodRunResult out;
  out.arm_abs_err.assign(p, 0.0);
  try {
    switch (m) {
      case Method::EPP1:
      case Method::EPP2: {
        Timer t;
        const PoseEstimate est =
            epp_localize(gs.scene, meas, m == Method::EPP2, cfg.solver);
        out.seconds = t.seconds();
        out.rmse = rmse(est.joints, gs.truth);
        out.arm_abs_err = chain_arm_errors(est.joints, est.turntable_estimate,
                                           gs.scene.arm_lengths);
        out.ok = true;
        break;
      }
      case Method::CEPP2: {
        Timer t;
        const PoseEstimate est =
            cepp_localize(gs.scene, meas, cfg.solver, cfg.clamp_infeasible);
        out.seconds = t.seconds();
        out.rmse = rmse(est.joints, gs.truth);
        out.arm_abs_err = chain_arm_errors(est.joints, est.turntable_estimate,
                                           gs.scene.arm_lengths);
        out.ok = true;
        break;
      }
      case Method::SRLS: {
        const int k = static_cast<int>(gs.scene.anchors.size());
        Eigen::MatrixXd anchors(k, 3);
        for (int a = 0; a < k; ++a) anchors.row(a) = gs.scene.anchors[a].transpose();
        std::vector<Eigen::Vector3d> est(p);
        Timer t;
        bool all_ok = true;
        for (int i = 0; i < p; ++i) {
          Eigen::VectorXd ranges(k);
          for (int a = 0; a < k; ++a) ranges[a] = meas.delta.at({i, p + a});
          const SrlsResult r = srls_localize(anchors, ranges);
          all_ok = all_ok && r.converged;
          est[i] = r.point;
        }
        out.seconds = t.seconds();
        out.rmse = rmse(est, gs.truth);
        out.arm_abs_err =
            chain_arm_errors(est, gs.scene.anchors[0], gs.scene.arm_lengths);
        out.ok = all_ok;
        break;
      }
      case Method::TPSM: {
        std::mt19937_64 rng(angle_seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        AngleReading noisy = gs.true_angles;
        noisy.turntable_azimuth +=
            unit(rng) * cfg.tpsm_azimuth_noise_deg * M_PI / 180.0;
        for (double& a : noisy.relative_pitch) {
          a += unit(rng) * cfg.tpsm_pitch_noise_deg * M_PI / 180.0;
        }
        Timer t;
        const std::vector<Eigen::Vector3d> walk = tpsm_localize(
            cfg.scene.arm_lengths_from_base, noisy, gs.scene.anchors[0]);
        out.seconds = t.seconds();
        std::vector<Eigen::Vector3d> est(p);
        for (int i = 0; i < p; ++i) est[p - 1 - i] = walk[i];
        out.rmse = rmse(est, gs.truth);
        out.arm_abs_err =
            chain_arm_errors(est, gs.scene.anchors[0], gs.scene.arm_lengths);
        out.ok = true;
        break;
      }
    }
  } catch (const std::exception&) {
    out.ok = false;
  }
  return out;
}

void aggregate(MetricsReport& report, const ExperimentConfig& cfg) {
  std::sort(report.records.begin(), report.records.end(),
            [](const RunRecord& a, const RunRecord& b) {
              return std::tie(a.level_index, a.run_index) <
                     std::tie(b.level_index, b.run_index);
            });
  report.rows.clear();
  const int p = static_cast<int>(cfg.scene.arm_lengths_from_base.size());
  for (int level = 0; level < level_count(cfg); ++level) {
    for (Method m : cfg.methods) {
      ReportRow row;
      row.method = m;
      row.noise_value = level_value(cfg, level);
      row.mean_arm_err.assign(p, 0.0);
      std::vector<double> rmses;
      for (const auto& rec : report.records) {
        if (rec.level_index != level) continue;
        const auto it = rec.per_method.find(m);
        if (it == rec.per_method.end()) continue;
        ++row.runs;
        if (!it->second.ok) {
          ++row.failures;
          continue;
        }
        row.mean_rmse += it->second.rmse;
        row.mean_seconds += it->second.seconds;
        rmses.push_back(it->second.rmse);
        for (int j = 0; j < p; ++j) row.mean_arm_err[j] += it->second.arm_abs_err[j];
      }
      const int ok_runs = row.runs - row.failures;
      if (ok_runs > 0) {
        row.mean_rmse /= ok_runs;
        row.mean_seconds /= ok_runs;
        for (double& v : row.mean_arm_err) v /= ok_runs;
        std::sort(rmses.begin(), rmses.end());
        row.median_rmse = rmses.size() % 2 == 1
                              ? rmses[rmses.size() / 2]
                              : 0.5 * (rmses[rmses.size() / 2 - 1] +
                                       rmses[rmses.size() / 2]);
      }
      report.rows.push_back(std::move(row));
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

const ReportRow& MetricsReport::row(Method m, double noise_value) const {
  for (const auto& r : rows) {
    if (r.method == m && r.noise_value == noise_value) return r;
  }
  throw ValidationError("no report row for the requested method and noise value");
}

std::string MetricsReport::to_csv(CsvStyle style) const {
  std::ostringstream os;
  os << "method,noise_param,mean_rmse";
  if (style == CsvStyle::simulate) os << ",median_rmse";
  for (int j = 1; j <= segments; ++j) os << ",mean_arm_err_" << j;
  if (style == CsvStyle::compare) os << ",mean_seconds";
  if (style == CsvStyle::simulate) os << ",failures";
  os << ",runs,seed\n";
  for (const auto& r : rows) {
    os << method_name(r.method) << ',' << format_double(r.noise_value) << ','
       << format_double(r.mean_rmse);
    if (style == CsvStyle::simulate) os << ',' << format_double(r.median_rmse);
    for (double v : r.mean_arm_err) os << ',' << format_double(v);
    if (style == CsvStyle::compare) os << ',' << format_double(r.mean_seconds);
    if (style == CsvStyle::simulate) os << ',' << r.failures;
    os << ',' << r.runs << ',' << seed << '\n';
  }
  return os.str();
}

RunRecord run_single(const ExperimentConfig& cfg, int level_index,
                     int run_index) {
  const std::uint64_t global_id =
      static_cast<std::uint64_t>(level_index) * cfg.runs + run_index;

  PoseGenConfig pose_cfg;
  pose_cfg.mode = PoseMode::planar_random;
  pose_cfg.seed = derive_seed(cfg.seed, kPoseStream, global_id);
  const GeneratedScene gs = gen_pose(cfg.scene, pose_cfg);

  NoiseModel model = level_model(cfg, level_index);
  model.seed = derive_seed(cfg.seed, kNoiseStream, global_id);
  NoiseStats stats;
  const RangeMeasurements meas = apply_noise(true_ranges(gs), model, &stats);

  RunRecord rec;
  rec.level_index = level_index;
  rec.run_index = run_index;
  rec.noise_value = level_value(cfg, level_index);
  rec.noise_resamples = stats.resamples;
  const std::uint64_t angle_seed = derive_seed(cfg.seed, kAngleStream, global_id);
  for (Method m : cfg.methods) {
    rec.per_method[m] = eval_method(m, cfg, gs, meas, angle_seed);
  }
  return rec;
}

MetricsReport run_experiment_serial(const ExperimentConfig& cfg) {
  cfg.validate();
  MetricsReport report;
  report.seed = cfg.seed;
  report.runs_per_level = cfg.runs;
  report.segments = static_cast<int>(cfg.scene.arm_lengths_from_base.size());
  report.records.reserve(static_cast<std::size_t>(level_count(cfg)) * cfg.runs);
  for (int level = 0; level < level_count(cfg); ++level) {
    for (int run = 0; run < cfg.runs; ++run) {
      report.records.push_back(run_single(cfg, level, run));
    }
  }
  aggregate(report, cfg);
  return report;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EDMPOSE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return omp_get_max_threads();
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const int threads = resolve_threads(cfg.threads);
  if (threads <= 1) return run_experiment_serial(cfg);

  MetricsReport report;
  report.seed = cfg.seed;
  report.runs_per_level = cfg.runs;
  report.segments = static_cast<int>(cfg.scene.arm_lengths_from_base.size());
  const int levels = level_count(cfg);
  const int total = levels * cfg.runs;
  report.records.resize(total);

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int idx = 0; idx < total; ++idx) {
    report.records[idx] = run_single(cfg, idx / cfg.runs, idx % cfg.runs);
  }

  aggregate(report, cfg);
  return report;
}

MetricsReport merge_reports(const MetricsReport& a, const MetricsReport& b) {
  if (a.seed != b.seed || a.segments != b.segments) {
    throw ValidationError("cannot merge reports from different experiments");
  }
  MetricsReport out;
  out.seed = a.seed;
  out.runs_per_level = a.runs_per_level + b.runs_per_level;
  out.segments = a.segments;
  out.records = a.records;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());

  // Rebuild rows from the union of records with a synthetic config carrying
  // just what aggregation needs.
  std::sort(out.records.begin(), out.records.end(),
            [](const RunRecord& x, const RunRecord& y) {
              return std::tie(x.level_index, x.run_index) <
                     std::tie(y.level_index, y.run_index);
            });
  std::vector<Method> methods;
  std::vector<double> levels;
  for (const auto& rec : out.records) {
    for (const auto& [m, _] : rec.per_method) {
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) {
        methods.push_back(m);
      }
    }
    if (static_cast<int>(levels.size()) <= rec.level_index) {
      levels.resize(rec.level_index + 1);
    }
    levels[rec.level_index] = rec.noise_value;
  }
  std::sort(methods.begin(), methods.end());

  ExperimentConfig pseudo;
  pseudo.methods = methods;
  pseudo.noise_sweep = levels;
  pseudo.scene.arm_lengths_from_base.assign(a.segments, 1.0);
  aggregate(out, pseudo);
  return out;
}

}  // namespace edmpose
