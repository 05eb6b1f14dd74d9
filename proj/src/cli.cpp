#include "edmpose/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "edmpose/scene_io.hpp"

namespace edmpose {

namespace {

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write output file: " + path);
  out << text;
}

struct SweepFlags {
  std::string config_path;
  std::vector<double> eta;
  std::vector<double> sigma;
  double gamma = 0.0;
  double nlos_fraction = -1.0;
  std::vector<std::string> methods;
  std::string scene_template;
  double prior_radius = -1.0;
  int runs = 0;
  std::int64_t seed = -1;
  int threads = 0;
  std::string out_path;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file");
    cmd->add_option("--eta", eta, "multiplicative noise factor(s)");
    cmd->add_option("--sigma", sigma,
                    "additive noise std dev(s); scalar when --gamma is given");
    cmd->add_option("--gamma", gamma, "NLOS exponential mean (enables NLOS)");
    cmd->add_option("--nlos-fraction", nlos_fraction,
                    "fraction of target-anchor pairs with NLOS bias");
    cmd->add_option("--methods", methods,
                    "methods: epp1 epp2 cepp2 srls tpsm");
    cmd->add_option("--scene", scene_template,
                    "scene template: large-manipulator | concrete-pump");
    cmd->add_option("--prior-radius", prior_radius, "prior perturbation radius");
    cmd->add_option("--runs", runs, "Monte-Carlo runs per noise level");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--threads", threads, "worker threads (0: env/hardware)");
    cmd->add_option("--out", out_path, "output CSV path (default stdout)");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = load_experiment_config(config_path);
    } else {
      cfg.scene = SceneTemplate::large_manipulator();
      cfg.methods = {Method::EPP1, Method::EPP2};
      cfg.runs = 100;
    }
    if (!scene_template.empty()) {
      if (scene_template == "large-manipulator") {
        cfg.scene = SceneTemplate::large_manipulator();
      } else if (scene_template == "concrete-pump") {
        cfg.scene = SceneTemplate::concrete_pump();
      } else {
        throw ValidationError("unknown scene template '" + scene_template + "'");
      }
    }
    if (prior_radius >= 0.0) cfg.scene.prior_radius = prior_radius;
    if (!methods.empty()) {
      cfg.methods.clear();
      for (const auto& name : methods) {
        const auto m = method_from_name(name);
        if (!m) throw ValidationError("unknown method '" + name + "'");
        cfg.methods.push_back(*m);
      }
    }
    if (gamma > 0.0) {
      cfg.noise.kind = NoiseKind::nlos;
      cfg.noise.gamma = gamma;
      cfg.noise.sigma = sigma.size() == 1 ? sigma[0] : 0.0;
      cfg.noise_sweep = {gamma};
      if (sigma.size() > 1) {
        throw ValidationError("--gamma takes a single --sigma value");
      }
    } else if (!sigma.empty()) {
      cfg.noise.kind = NoiseKind::additive;
      cfg.noise_sweep = sigma;
    } else if (!eta.empty()) {
      cfg.noise.kind = NoiseKind::multiplicative;
      cfg.noise_sweep = eta;
    }
    if (nlos_fraction >= 0.0) cfg.noise.nlos_fraction = nlos_fraction;
    if (runs > 0) cfg.runs = runs;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads > 0) cfg.threads = threads;
    if (!out_path.empty()) cfg.output_path = out_path;
    return cfg;
  }
};

int run_sweep(const SweepFlags& flags, MetricsReport::CsvStyle style) {
  const ExperimentConfig cfg = flags.build();
  const MetricsReport report = run_experiment(cfg);
  write_output(report.to_csv(style), cfg.output_path);
  for (const auto& row : report.rows) {
    if (row.runs > 0 && row.failures == row.runs) return 2;
  }
  return 0;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int run_semiphysical(const std::string& fixture, const std::string& semantics,
                     const std::string& out_path) {
  SemiphysicalData data = load_semiphysical(
      fixture.empty() ? default_fixture_path() : fixture);
  if (semantics == "linear") {
    data.semantics = EntrySemantics::linear;
  } else if (semantics == "squared") {
    data.semantics = EntrySemantics::squared;
  } else if (!semantics.empty()) {
    throw ValidationError("semantics must be 'squared' or 'linear'");
  }

  const SquaredDistanceMatrix G = data.squared();
  const std::vector<double> arms = data.arm_lengths();
  const int p = data.targets;
  SolverConfig solver;

  struct Entry {
    std::string name;
    std::vector<Eigen::Vector3d> joints;
    Eigen::Vector3d turntable;
    std::vector<double> residuals;
    double seconds = 0.0;
    bool embedded_turntable = true;
  };
  std::vector<Entry> entries;

  {  // SR-LS per target from the anchor ranges in G
    Entry e{"srls", {}, data.anchors[0], {}, 0.0, false};
    const int k = static_cast<int>(data.anchors.size());
    Eigen::MatrixXd anchor_mat(k, 3);
    for (int a = 0; a < k; ++a) anchor_mat.row(a) = data.anchors[a].transpose();
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < p; ++i) {
      Eigen::VectorXd ranges(k);
      for (int a = 0; a < k; ++a) ranges[a] = std::sqrt(std::max(0.0, G(i, p + a)));
      const SrlsResult r = srls_localize(anchor_mat, ranges);
      e.joints.push_back(r.point);
      e.residuals.push_back(std::sqrt(r.objective / k));
    }
    e.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    entries.push_back(std::move(e));
  }

  const PoseEstimate epp1 = epp_localize_matrix(G, data.anchors, arms, false, solver);
  entries.push_back({"epp1", epp1.joints, epp1.turntable_estimate,
                     epp1.joint_residuals, epp1.solve_seconds, true});

  const PoseEstimate epp2 = epp_localize_matrix(G, data.anchors, arms, true, solver);
  entries.push_back({"epp2", epp2.joints, epp2.turntable_estimate,
                     epp2.joint_residuals, epp2.solve_seconds, true});

  // CEPP needs priors for the plane fit; the paper's dataset has none, so
  // the EPP1 estimate stands in. Infeasible projections are clamped.
  const PoseEstimate cepp2 = cepp_localize_matrix(G, data.anchors, arms,
                                                  epp1.joints, solver, true);
  entries.push_back({"cepp2", cepp2.joints, cepp2.turntable_estimate,
                     cepp2.joint_residuals, cepp2.solve_seconds, true});

  std::ostringstream os;
  os << "method";
  for (int j = 1; j <= p; ++j) os << ",arm_err_" << j;
  os << ",mean_range_rms,seconds\n";
  for (const auto& e : entries) {
    os << e.name;
    for (int j = 0; j < p; ++j) {
      const Eigen::Vector3d& a = e.joints[j];
      const Eigen::Vector3d& b = (j + 1 < p) ? e.joints[j + 1] : e.turntable;
      os << ',' << format_double(std::abs((a - b).norm() - arms[j]));
    }
    double mean_rms = 0.0;
    for (double r : e.residuals) mean_rms += r;
    if (!e.residuals.empty()) mean_rms /= static_cast<double>(e.residuals.size());
    os << ',' << format_double(mean_rms) << ',' << format_double(e.seconds) << "\n";
  }
  write_output(os.str(), out_path);
  return 0;
}

int run_localize(const std::string& scene_path, const std::string& method_name_in,
                 bool clamp, const std::string& out_path) {
  const SceneFile sf = load_scene(scene_path);
  const auto method = method_from_name(method_name_in);
  if (!method) throw ValidationError("unknown method '" + method_name_in + "'");

  SolverConfig solver;
  PoseEstimate est;
  switch (*method) {
    case Method::EPP1:
      est = epp_localize(sf.scene, sf.measurements, false, solver);
      break;
    case Method::EPP2:
      est = epp_localize(sf.scene, sf.measurements, true, solver);
      break;
    case Method::CEPP2:
      est = cepp_localize(sf.scene, sf.measurements, solver, clamp);
      break;
    case Method::SRLS: {
      const int p = sf.scene.p;
      const int k = static_cast<int>(sf.scene.anchors.size());
      Eigen::MatrixXd anchors(k, 3);
      for (int a = 0; a < k; ++a) anchors.row(a) = sf.scene.anchors[a].transpose();
      est.joints.resize(p);
      est.joint_residuals.resize(p);
      bool ok = true;
      for (int i = 0; i < p; ++i) {
        Eigen::VectorXd ranges(k);
        for (int a = 0; a < k; ++a) {
          const auto it = sf.measurements.delta.find({i, p + a});
          if (it == sf.measurements.delta.end()) {
            throw IncompleteMeasurementError("missing range", i + 1, p + a + 1);
          }
          ranges[a] = it->second;
        }
        const SrlsResult r = srls_localize(anchors, ranges);
        ok = ok && r.converged;
        est.joints[i] = r.point;
        est.joint_residuals[i] = std::sqrt(r.objective / k);
      }
      est.turntable_estimate = sf.scene.anchors[0];
      est.solver_converged = ok;
      est.eps_optimal = ok;
      break;
    }
    case Method::TPSM:
      throw ValidationError("tpsm needs angle readings, not range files");
  }

  write_output(pose_to_json(est, sf.scene.units), out_path);
  return est.solver_converged && est.eps_optimal ? 0 : 2;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"EDM-based posture positioning for multi-joint manipulators"};
  app.require_subcommand(1);

  SweepFlags sim_flags;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "run a Monte-Carlo experiment (deterministic CSV)");
  sim_flags.add_to(simulate);

  SweepFlags cmp_flags;
  CLI::App* compare = app.add_subcommand(
      "compare", "multi-method sweep with timing columns");
  cmp_flags.add_to(compare);

  std::string scene_path, loc_method = "epp2", loc_out;
  bool loc_clamp = false;
  CLI::App* localize =
      app.add_subcommand("localize", "one scene file to a pose JSON");
  localize->add_option("--scene", scene_path, "scene/measurement file")
      ->required();
  localize->add_option("--method", loc_method, "epp1 | epp2 | cepp2 | srls");
  localize->add_flag("--clamp", loc_clamp, "clamp infeasible projections");
  localize->add_option("--out", loc_out, "output JSON path (default stdout)");

  std::string fixture_path, semantics, semi_out;
  CLI::App* semiphysical = app.add_subcommand(
      "semiphysical", "run all methods on the bundled UWB dataset");
  semiphysical->add_option("--fixture", fixture_path, "fixture file path");
  semiphysical->add_option("--semantics", semantics,
                           "matrix entry reading: squared | linear");
  semiphysical->add_option("--out", semi_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      return run_sweep(sim_flags, MetricsReport::CsvStyle::simulate);
    }
    if (compare->parsed()) {
      return run_sweep(cmp_flags, MetricsReport::CsvStyle::compare);
    }
    if (localize->parsed()) {
      return run_localize(scene_path, loc_method, loc_clamp, loc_out);
    }
    if (semiphysical->parsed()) {
      return run_semiphysical(fixture_path, semantics, semi_out);
    }
  } catch (const DescentViolationError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("edmpose");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace edmpose
