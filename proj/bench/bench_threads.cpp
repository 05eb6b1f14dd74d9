// Compares the serial reference Monte-Carlo loop against the OpenMP driver
// on the same workload and verifies they emit identical reports.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "edmpose/sim.hpp"

using namespace edmpose;

namespace {

double time_once(const ExperimentConfig& cfg, std::string* csv) {
  const auto t0 = std::chrono::steady_clock::now();
  const MetricsReport report =
      cfg.threads == 1 ? run_experiment_serial(cfg) : run_experiment(cfg);
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  *csv = report.to_csv(MetricsReport::CsvStyle::simulate);
  return dt;
}

}  // namespace

int main(int argc, char** argv) {
  int runs = 64;
  if (argc > 1) runs = std::atoi(argv[1]);

  ExperimentConfig cfg;
  cfg.scene = SceneTemplate::large_manipulator();
  cfg.methods = {Method::EPP1, Method::EPP2, Method::CEPP2};
  cfg.noise.kind = NoiseKind::multiplicative;
  cfg.noise_sweep = {0.08};
  cfg.runs = runs;
  cfg.seed = 20;

  std::printf("workload: %d runs x %zu methods, multiplicative eta=0.08\n",
              cfg.runs, cfg.methods.size());

  cfg.threads = 1;
  std::string serial_csv;
  const double serial = time_once(cfg, &serial_csv);
  std::printf("%8s  %9.3fs  %7s\n", "serial", serial, "1.00x");

  std::vector<int> thread_counts = {2, 4};
  const int hw = omp_get_max_threads();
  if (hw > 4) thread_counts.push_back(hw);

  bool all_match = true;
  for (int t : thread_counts) {
    if (t <= 1) continue;
    cfg.threads = t;
    std::string csv;
    const double dt = time_once(cfg, &csv);
    const bool match = csv == serial_csv;
    all_match = all_match && match;
    std::printf("%5d thr  %9.3fs  %6.2fx  %s\n", t, dt, serial / dt,
                match ? "report identical" : "REPORT MISMATCH");
  }
  return all_match ? 0 : 1;
}
