#pragma once

#include <string>

#include "wkb/euler2d.hpp"
#include "wkb/solver.hpp"

namespace wkb {

struct RunConfig {
  std::string builtin = "euler2d";  // empty: custom constant-coefficient system
  EulerParams euler;
  HyperbolicSystem custom;

  int box_radius = 2;
  int harmonic_bound = 4;
  double res_tol = 1e-9;
  double kl_tol = 1e-3;
  double C0 = -1.0;  // < 0: calibrate from the box
  SpectralTol tol;

  SlowGrid grid{0.8, 4.0, -1.0, 24, 16, 124, 0.9};
  int lambda_max = 4;
  double epsilon = 0.12;
  std::vector<ForcingMode> forcing;

  double picard_tol = 1e-8;
  int picard_max_iter = 50;
  int max_halvings = 6;
  bool use_skew_fd = false;
  double skew_h = 1e-3;

  std::uint64_t seed = 1234;
  int threads = 0;
  std::string out_dir = "out";
  std::string format = "bin";
};

RunConfig parse_config(const std::string& path);
RunConfig default_euler_config();

HyperbolicSystem build_system(const RunConfig& cfg);

// Subcommand entry points; each returns a process exit code.
int cmd_analyze(const RunConfig& cfg);
int cmd_assumptions(const RunConfig& cfg);
int cmd_resonances(const RunConfig& cfg);
int cmd_gamma(const RunConfig& cfg);
int cmd_solve(const RunConfig& cfg);
int cmd_demo_euler(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);

int run_cli(int argc, char** argv);

// Shared helpers (also used by tests).
std::string resonances_csv(const ResonanceSet& set, double C0);
CheckReport analyze_report(const RunConfig& cfg);

struct SolveOutputs {
  CheckReport diagnostics;
  double T_used = 0.0;
  int halvings = 0;
};
SolveOutputs run_solve_pipeline(const RunConfig& cfg, bool write_files);

}  // namespace wkb
