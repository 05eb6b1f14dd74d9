#include "edmpose/scene_io.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace edmpose {

namespace {

struct Line {
  int number = 0;
  std::string section;  // current [section], empty at top level
  std::string key;      // empty for raw numeric lines
  std::string value;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  std::ostringstream msg;
  msg << origin << ":" << line << ": " << what;
  throw ValidationError(msg.str());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<Line> read_lines(std::istream& in, const std::string& origin) {
  std::vector<Line> out;
  std::string raw;
  std::string section;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(origin, number, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    Line line;
    line.number = number;
    line.section = section;
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      line.value = text;
    } else {
      line.key = trim(text.substr(0, colon));
      line.value = trim(text.substr(colon + 1));
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<double> parse_numbers(const Line& line, const std::string& origin,
                                  int expected = -1) {
  std::istringstream is(line.value);
  std::vector<double> vals;
  double v;
  while (is >> v) vals.push_back(v);
  std::string tail;
  if (is.clear(), is >> tail) fail(origin, line.number, "trailing junk: " + tail);
  if (expected >= 0 && static_cast<int>(vals.size()) != expected) {
    std::ostringstream msg;
    msg << "expected " << expected << " numbers, got " << vals.size();
    fail(origin, line.number, msg.str());
  }
  return vals;
}

double parse_one(const Line& line, const std::string& origin) {
  return parse_numbers(line, origin, 1)[0];
}

Eigen::Vector3d parse_vec3(const Line& line, const std::string& origin) {
  const auto v = parse_numbers(line, origin, 3);
  return {v[0], v[1], v[2]};
}

}  // namespace

SceneFile parse_scene(std::istream& in, const std::string& origin) {
  SceneFile sf;
  sf.scene.units.clear();
  bool have_arms = false;
  std::vector<std::tuple<int, int, double, int>> meas;  // i, j, delta, line

  for (const Line& line : read_lines(in, origin)) {
    if (line.key == "units") {
      sf.scene.units = line.value;
    } else if (line.key == "anchor") {
      sf.scene.anchors.push_back(parse_vec3(line, origin));
    } else if (line.key == "prior") {
      sf.scene.priors.push_back(parse_vec3(line, origin));
    } else if (line.key == "arm_lengths") {
      sf.scene.arm_lengths = parse_numbers(line, origin);
      have_arms = true;
    } else if (line.key == "meas") {
      const auto v = parse_numbers(line, origin, 3);
      meas.emplace_back(static_cast<int>(v[0]), static_cast<int>(v[1]), v[2],
                        line.number);
    } else if (line.key.empty()) {
      fail(origin, line.number, "stray values without a key");
    } else {
      fail(origin, line.number, "unknown key '" + line.key + "'");
    }
  }

  if (sf.scene.units.empty()) throw ValidationError(origin + ": missing units");
  if (!have_arms) throw ValidationError(origin + ": missing arm_lengths");
  sf.scene.p = static_cast<int>(sf.scene.priors.size());
  sf.scene.validate();

  const int p = sf.scene.p;
  const int n = sf.scene.n();
  for (const auto& [i, j, delta, number] : meas) {
    if (i < 1 || i > p || j <= p || j > n) {
      fail(origin, number, "measurement indices must satisfy 1<=i<=p, p<j<=n");
    }
    if (delta < 0.0) fail(origin, number, "ranges must be non-negative");
    sf.measurements.delta[{i - 1, j - 1}] = delta;
  }
  return sf;
}

SceneFile load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scene file: " + path);
  return parse_scene(in, path);
}

std::string scene_to_text(const SceneFile& sf) {
  std::ostringstream os;
  os.precision(17);
  os << "units: " << sf.scene.units << "\n";
  os << "arm_lengths:";
  for (double L : sf.scene.arm_lengths) os << ' ' << L;
  os << "\n";
  for (const auto& a : sf.scene.anchors) {
    os << "anchor: " << a.x() << ' ' << a.y() << ' ' << a.z() << "\n";
  }
  for (const auto& w : sf.scene.priors) {
    os << "prior: " << w.x() << ' ' << w.y() << ' ' << w.z() << "\n";
  }
  for (const auto& [key, d] : sf.measurements.delta) {
    os << "meas: " << key.first + 1 << ' ' << key.second + 1 << ' ' << d << "\n";
  }
  return os.str();
}

void save_scene(const SceneFile& sf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write scene file: " + path);
  out << scene_to_text(sf);
}

SquaredDistanceMatrix SemiphysicalData::squared() const {
  if (semantics == EntrySemantics::squared) return SquaredDistanceMatrix(raw);
  return SquaredDistanceMatrix(raw.cwiseProduct(raw));
}

std::vector<double> SemiphysicalData::arm_lengths() const {
  return std::vector<double>(targets, arm_length);
}

SemiphysicalData parse_semiphysical(std::istream& in, const std::string& origin) {
  SemiphysicalData data;
  int n = 0;
  std::vector<std::vector<double>> rows;
  bool have_n = false, have_targets = false, have_arm = false;

  for (const Line& line : read_lines(in, origin)) {
    if (line.section == "anchors") {
      if (!line.key.empty()) fail(origin, line.number, "expected raw coordinates");
      const auto v = parse_numbers(line, origin, 3);
      data.anchors.emplace_back(v[0], v[1], v[2]);
    } else if (line.section == "G") {
      if (!line.key.empty()) fail(origin, line.number, "expected raw matrix rows");
      rows.push_back(parse_numbers(line, origin));
    } else if (line.key == "units") {
      data.units = line.value;
    } else if (line.key == "entry_semantics") {
      if (line.value == "squared") {
        data.semantics = EntrySemantics::squared;
      } else if (line.value == "linear") {
        data.semantics = EntrySemantics::linear;
      } else {
        fail(origin, line.number, "entry_semantics must be 'squared' or 'linear'");
      }
    } else if (line.key == "n") {
      n = static_cast<int>(parse_one(line, origin));
      have_n = true;
    } else if (line.key == "targets") {
      data.targets = static_cast<int>(parse_one(line, origin));
      have_targets = true;
    } else if (line.key == "arm_length_cm" || line.key == "arm_length") {
      data.arm_length = parse_one(line, origin);
      have_arm = true;
    } else {
      fail(origin, line.number, "unknown key '" + line.key + "'");
    }
  }

  if (!have_n || !have_targets || !have_arm) {
    throw ValidationError(origin + ": missing n, targets or arm_length");
  }
  if (static_cast<int>(rows.size()) != n) {
    throw ValidationError(origin + ": expected " + std::to_string(n) +
                          " matrix rows");
  }
  if (data.targets < 1 || data.targets >= n ||
      static_cast<int>(data.anchors.size()) != n - data.targets) {
    throw ValidationError(origin + ": anchors and targets do not add up to n");
  }
  if (data.arm_length <= 0.0) {
    throw ValidationError(origin + ": arm length must be positive");
  }

  data.raw = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != i + 1) {
      std::ostringstream msg;
      msg << "row " << i + 1 << " of the lower-triangular matrix must have "
          << i + 1 << " entries, got " << rows[i].size();
      throw ValidationError(origin + ": " + msg.str());
    }
    for (int j = 0; j <= i; ++j) {
      if (rows[i][j] < 0.0) {
        throw ValidationError(origin + ": matrix entries must be non-negative");
      }
      data.raw(i, j) = data.raw(j, i) = rows[i][j];
    }
    if (data.raw(i, i) != 0.0) {
      throw ValidationError(origin + ": matrix diagonal must be zero");
    }
  }
  return data;
}

SemiphysicalData load_semiphysical(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open fixture file: " + path);
  return parse_semiphysical(in, path);
}

std::string default_fixture_path() {
  if (const char* env = std::getenv("EDMPOSE_FIXTURE")) return env;
#ifdef EDMPOSE_DATA_DIR
  return std::string(EDMPOSE_DATA_DIR) + "/semiphysical_pump.txt";
#else
  return "data/semiphysical_pump.txt";
#endif
}

namespace {

SceneTemplate parse_scene_section(const std::vector<Line>& lines,
                                  const std::string& origin, bool* found) {
  SceneTemplate tmpl;
  bool have_template = false, have_arms = false, have_anchor = false;
  *found = false;
  for (const Line& line : lines) {
    if (line.section != "scene") continue;
    *found = true;
    if (line.key == "template") {
      if (line.value == "large-manipulator") {
        tmpl = SceneTemplate::large_manipulator();
      } else if (line.value == "concrete-pump") {
        tmpl = SceneTemplate::concrete_pump();
      } else {
        fail(origin, line.number, "unknown scene template '" + line.value + "'");
      }
      have_template = true;
    } else if (line.key == "arm_lengths_from_base") {
      tmpl.arm_lengths_from_base = parse_numbers(line, origin);
      have_arms = true;
    } else if (line.key == "anchor") {
      if (!have_template && !have_anchor) tmpl.anchors.clear();
      tmpl.anchors.push_back(parse_vec3(line, origin));
      have_anchor = true;
    } else if (line.key == "units") {
      tmpl.units = line.value;
    } else if (line.key == "prior_radius") {
      tmpl.prior_radius = parse_one(line, origin);
    } else if (line.key == "pitch_min_deg") {
      tmpl.pitch_min_deg = parse_one(line, origin);
    } else if (line.key == "pitch_max_deg") {
      tmpl.pitch_max_deg = parse_one(line, origin);
    } else {
      fail(origin, line.number, "unknown scene key '" + line.key + "'");
    }
  }
  if (*found && !have_template && (!have_arms || !have_anchor)) {
    throw ValidationError(origin +
                          ": [scene] needs a template or explicit arm lengths "
                          "and anchors");
  }
  return tmpl;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in,
                                         const std::string& origin) {
  const std::vector<Line> lines = read_lines(in, origin);
  ExperimentConfig cfg;
  cfg.scene = SceneTemplate::large_manipulator();

  bool scene_found = false;
  const SceneTemplate tmpl = parse_scene_section(lines, origin, &scene_found);
  if (scene_found) cfg.scene = tmpl;

  for (const Line& line : lines) {
    if (line.section.empty()) {
      if (line.key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_one(line, origin));
      } else if (line.key == "runs") {
        cfg.runs = static_cast<int>(parse_one(line, origin));
      } else if (line.key == "threads") {
        cfg.threads = static_cast<int>(parse_one(line, origin));
      } else if (line.key == "output") {
        cfg.output_path = line.value;
      } else if (line.key == "methods") {
        std::istringstream ms(line.value);
        std::string name;
        while (ms >> name) {
          const auto m = method_from_name(name);
          if (!m) fail(origin, line.number, "unknown method '" + name + "'");
          cfg.methods.push_back(*m);
        }
      } else {
        fail(origin, line.number, "unknown key '" + line.key + "'");
      }
    } else if (line.section == "noise") {
      if (line.key == "kind") {
        if (line.value == "multiplicative") {
          cfg.noise.kind = NoiseKind::multiplicative;
        } else if (line.value == "additive") {
          cfg.noise.kind = NoiseKind::additive;
        } else if (line.value == "nlos") {
          cfg.noise.kind = NoiseKind::nlos;
        } else {
          fail(origin, line.number, "unknown noise kind '" + line.value + "'");
        }
      } else if (line.key == "eta") {
        cfg.noise_sweep = parse_numbers(line, origin);
        if (cfg.noise_sweep.size() == 1) cfg.noise.eta = cfg.noise_sweep[0];
      } else if (line.key == "sigma") {
        if (cfg.noise.kind == NoiseKind::nlos) {
          cfg.noise.sigma = parse_one(line, origin);
        } else {
          cfg.noise_sweep = parse_numbers(line, origin);
          if (cfg.noise_sweep.size() == 1) cfg.noise.sigma = cfg.noise_sweep[0];
        }
      } else if (line.key == "gamma") {
        cfg.noise_sweep = parse_numbers(line, origin);
        if (cfg.noise_sweep.size() == 1) cfg.noise.gamma = cfg.noise_sweep[0];
      } else if (line.key == "nlos_fraction") {
        cfg.noise.nlos_fraction = parse_one(line, origin);
      } else if (line.key == "tpsm_pitch_noise_deg") {
        cfg.tpsm_pitch_noise_deg = parse_one(line, origin);
      } else if (line.key == "tpsm_azimuth_noise_deg") {
        cfg.tpsm_azimuth_noise_deg = parse_one(line, origin);
      } else {
        fail(origin, line.number, "unknown noise key '" + line.key + "'");
      }
    } else if (line.section == "solver") {
      if (line.key == "rank_tol") {
        cfg.solver.rank_tol = parse_one(line, origin);
      } else if (line.key == "inner_tol") {
        cfg.solver.inner_tol = parse_one(line, origin);
      } else if (line.key == "outer_max_iters") {
        cfg.solver.outer_max_iters = static_cast<int>(parse_one(line, origin));
      } else if (line.key == "inner_max_iters") {
        cfg.solver.inner_max_iters = static_cast<int>(parse_one(line, origin));
      } else if (line.key == "penalty_initial") {
        cfg.solver.penalty_initial = parse_one(line, origin);
      } else if (line.key == "penalty_growth") {
        cfg.solver.penalty_growth = parse_one(line, origin);
      } else if (line.key == "penalty_max") {
        cfg.solver.penalty_max = parse_one(line, origin);
      } else if (line.key == "descent_check") {
        cfg.solver.descent_check = parse_one(line, origin) != 0.0;
      } else {
        fail(origin, line.number, "unknown solver key '" + line.key + "'");
      }
    } else if (line.section != "scene") {
      fail(origin, line.number, "unknown section [" + line.section + "]");
    }
  }

  if (cfg.methods.empty()) {
    cfg.methods = {Method::EPP1, Method::EPP2};
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  return parse_experiment_config(in, path);
}

std::string pose_to_json(const PoseEstimate& est, const std::string& units) {
  nlohmann::json doc;
  doc["units"] = units;
  if (est.plane_angle) doc["plane_angle_rad"] = *est.plane_angle;
  doc["joints"] = nlohmann::json::array();
  for (std::size_t i = 0; i < est.joints.size(); ++i) {
    nlohmann::json j;
    j["point"] = i + 1;
    j["x"] = est.joints[i].x();
    j["y"] = est.joints[i].y();
    j["z"] = est.joints[i].z();
    if (i < est.joint_residuals.size()) j["range_rms"] = est.joint_residuals[i];
    doc["joints"].push_back(j);
  }
  doc["diagnostics"] = {{"solver_converged", est.solver_converged},
                        {"eps_optimal", est.eps_optimal},
                        {"penalty_value", est.penalty_value},
                        {"outer_iters", est.outer_iters},
                        {"inner_iters", est.inner_iters},
                        {"anchor_rms", est.anchor_rms},
                        {"clamped_projections", est.clamped_projections},
                        {"solve_seconds", est.solve_seconds}};
  return doc.dump(2) + "\n";
}

}  // namespace edmpose
