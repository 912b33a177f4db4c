#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lp/eigensolve.hpp"
#include "lp/fields.hpp"
#include "lp/gl_energy.hpp"

namespace lp {

/// Grid, unit link field and solver settings shared by every sample of a
/// study. Immutable after construction apart from the eigenvalue cache.
class Study {
 public:
  Study(const DomainSpec& spec, double h, EigenOptions eig = {}, GLParams gl = {}, int jobs = 1);

  const GridPtr& grid() const { return grid_; }
  const LinkField& unit() const { return unit_; }
  const EigenOptions& eig() const { return eig_; }
  const GLParams& gl() const { return gl_; }
  int jobs() const { return jobs_; }

  /// Lowest eigenvalue of the given operator variant at flux phi.
  EigenResult eigenpair(Variant v, double phi) const;
  /// Cached lowest punctured eigenvalue (used for kappa selection).
  double punctured_lambda(double phi) const;

  /// Grid, tolerances, seed and cached eigenvalues.
  nlohmann::json manifest() const;

 private:
  GridPtr grid_;
  LinkField unit_;
  EigenOptions eig_;
  GLParams gl_;
  int jobs_;
  mutable std::mutex cache_mutex_;
  mutable std::map<double, double> cache_;
};

/// Runs task(i) for i in [0, n) on `jobs` threads; results must be written to
/// per-index slots so the outcome is independent of scheduling. The first
/// exception is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task);

enum class Phase { Normal, Superconducting };

const char* to_string(Phase p);

struct SweepRecord {
  double phi = 0.0;
  std::optional<double> lambda_full;
  std::optional<double> lambda_punctured;
  std::optional<double> energy_full;
  std::optional<double> energy_effective;
  std::optional<double> psi_l2;
  std::optional<Phase> phase;
  bool converged = true;
  double wall_seconds = 0.0;
  std::string error;  // empty unless a solver failed on this sample
};

struct SweepOptions {
  bool full = true;
  bool punctured = true;
  /// Also minimise both functionals at kappa.
  bool energies = false;
  double kappa = 1.0;
};

/// One sample per phi = phi_min + k step, k = 0, 1, ... while phi <= phi_max
/// (plus a relative slack of 1e-9 on the endpoint). Records are sorted by phi.
/// Solver failures are recorded per sample, not thrown.
std::vector<SweepRecord> sweep_lambda(const Study& st, double phi_min, double phi_max, double step,
                                      const SweepOptions& opt);

/// Throws InconsistentState when a record violates domination, energy
/// ordering or its phase label.
void check_record(const SweepRecord& r, const Study& st);

/// "phi,lambda_full,lambda_punctured,energy_full,energy_effective,psi_l2,phase,converged"
void write_sweep_csv(const std::vector<SweepRecord>& records, std::ostream& os);

struct GapRow {
  int n = 0;
  double phi = 0.0;
  double gap_lambda = 0.0;
  std::optional<double> gap_energy;
};

/// lambda_punctured(phi0) - lambda_full(phi0 + n) for every n.
std::vector<GapRow> convergence_gap(const Study& st, double phi0, const std::vector<int>& n_list);

/// "n,phi,gap_lambda,gap_energy"
void write_gap_csv(const std::vector<GapRow>& rows, std::ostream& os);

struct EnergyGapRow {
  int n = 0;
  double energy_full = 0.0;       // E(phi0 + n)
  double energy_effective = 0.0;  // G(phi0)
  double gap = 0.0;               // G - E
  bool converged = true;
};

std::vector<EnergyGapRow> effective_vs_full_energy(const Study& st, double phi0, const std::vector<int>& n_list,
                                                   double kappa);

/// Rows of the gaps CSV merging both studies at matching n.
std::vector<GapRow> merge_gaps(const std::vector<GapRow>& lambda_rows, const std::vector<EnergyGapRow>& energy_rows,
                               double phi0);

struct DeGennesRow {
  double b = 0.0;
  double phi = 0.0;
  double lambda = 0.0;
  double ratio = 0.0;  // lambda / b
};

/// Field strength inside omega for flux phi: b = 2 pi phi / |omega|.
double field_strength(const Grid& g, double phi);
/// Largest b with b h^2 <= 0.5.
double max_admissible_field(const Grid& g);

/// Lowest eigenvalue of the Neumann problem on omega's staircase at field b,
/// divided by b. Requires 2 pi / |omega| <= b and b h^2 <= 0.5.
std::vector<DeGennesRow> degennes_ratio(const Study& st, const std::vector<double>& b_list);

enum class Regime { Oscillating, AlwaysSuperconducting, AlwaysNormal };

const char* to_string(Regime r);

struct Period {
  int n = 0;
  double phi_normal = 0.0;  // n - 1/2
  double phi_super = 0.0;   // n
  Phase at_normal = Phase::Normal;
  Phase at_super = Phase::Superconducting;
};

struct TransitionReport {
  Regime regime = Regime::Oscillating;
  double kappa = 0.0;
  double lambda0 = 0.0;
  double lambda_half = 0.0;
  std::vector<Period> periods;
  int completed() const { return static_cast<int>(periods.size()); }
};

/// Reads lambda_punctured at the half-integer and integer samples of
/// `records`, classifies the regime for kappa and validates every probe point
/// with an effective minimisation. Throws EmptyInput on no records and
/// ValidationFailed when a minimiser contradicts the eigenvalue criterion.
TransitionReport detect_transitions(const Study& st, const std::vector<SweepRecord>& records, double kappa);

/// "period,phi_normal,phi_super,kappa"
void write_transitions_csv(const TransitionReport& report, std::ostream& os);

struct ProbeReport {
  int n = 0;
  double phi = 0.0;
  /// L2(Omega_0) distance between the gauged-back full minimizer and the
  /// effective one, after fitting a global phase.
  double distance = 0.0;
  double inner_mass = 0.0;
  double current_distance = 0.0;
  double energy_full = 0.0;
  double energy_effective = 0.0;
  bool converged = true;
};

ProbeReport minimizer_convergence_probe(const Study& st, double phi0, int n, double kappa);

/// Phase-fitted distance sqrt(h^2 sum |exp(i alpha) v - u|^2), minimised over alpha.
double phase_fitted_distance(const CVec& u, const CVec& v, double h);

}  // namespace lp
