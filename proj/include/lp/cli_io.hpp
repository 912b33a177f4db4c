#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lp/eigensolve.hpp"
#include "lp/geometry.hpp"
#include "lp/gl_energy.hpp"

namespace lp {

/// Flat run configuration. Keys (all optional unless the command needs them):
///   outer_shape, inner_shape          "disk" | "rect"
///   outer_cx, outer_cy, outer_radius  disk parameters (same for inner_*)
///   outer_xmin, outer_xmax, ...       rect parameters (same for inner_*)
///   h, kappa, phi, phi_min, phi_max, phi_step, phi0, periods
///   n_list, b_list                    arrays
///   variant                           "full" | "punctured" | "inner_neumann" | "effective" | "both"
///   energies                          bool, sweep also minimises both functionals
///   eig_tol, gl_grad_tol, gl_energy_rtol, gl_max_iter, seed, jobs, out_dir
struct RunConfig {
  std::string command;
  Shape outer = Disk{0.0, 0.0, 2.0};
  Shape inner = Disk{0.0, 0.0, 1.0};
  double h = 0.05;
  std::optional<double> kappa;
  double phi = 0.0;
  double phi_min = 0.0;
  double phi_max = 1.0;
  double phi_step = 0.05;
  double phi0 = 0.0;
  int periods = 3;
  std::vector<int> n_list{0, 2, 4, 8};
  std::vector<double> b_list;
  std::string variant = "both";
  bool energies = false;
  EigenOptions eig;
  GLParams gl;
  int jobs = 1;
  std::filesystem::path out_dir = "out";

  DomainSpec domain() const;
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> names{"potential", "eig",     "sweep",    "gl-min",
                                              "converge",  "oscillate", "degennes", "verify"};
  return names;
}

/// Validates and converts a parsed configuration. Throws ConfigInvalid whose
/// message starts with the offending key.
RunConfig parse_config(const nlohmann::json& j, const std::string& command);
RunConfig load_config(const std::filesystem::path& path, const std::string& command);

/// Writes `content` to a sibling temporary file and renames it over `path`.
/// Throws OutputUnwritable; never leaves a partial file at `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Cheap invariant suite on the configured grid: flux periodicity,
/// domination, hermiticity, gauge conjugation, GL gradient against finite
/// differences and the effective gauge-shift identity.
std::vector<CheckResult> verify_suite(const RunConfig& cfg);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSolver = 3;

/// Executes cfg.command, writing artifacts under cfg.out_dir and a short
/// summary to `log`. Returns the exit code; errors are reported on `err`.
int run(const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// Exit code for a library error: validation-type failures map to 2, the rest to 3.
int exit_code_for(const Error& e);

}  // namespace lp
