#pragma once

#include <cstdint>
#include <vector>

#include "lp/error.hpp"
#include "lp/magnetic_operator.hpp"

namespace lp {

inline constexpr std::uint64_t kDefaultSeed = 0x4C50;  // "LP"

struct EigenOptions {
  double tol = 1e-9;
  std::uint64_t seed = kDefaultSeed;
  /// Matvec cap; 0 means 50 * dimension.
  std::size_t max_matvecs = 0;
  /// Krylov basis size and number of Ritz vectors kept across restarts.
  int basis = 64;
  int keep = 24;
};

struct EigenResult {
  double lambda = 0.0;
  /// Ground state on the operator's dofs, sum |v_i|^2 h^2 = 1.
  CVec vector;
  /// ||H v - lambda v|| in the same grid L2 norm (scale invariant).
  double residual = 0.0;
  std::size_t matvecs = 0;
  bool converged = false;
};

class EigenNoConvergence : public Error {
 public:
  EigenNoConvergence(const std::string& what, EigenResult best)
      : Error(ErrorCode::NoConvergence, what), best_(std::move(best)) {}
  const EigenResult& best() const { return best_; }

 private:
  EigenResult best_;
};

/// Smallest eigenpair by thick-restart Lanczos with full reorthogonalisation.
/// Converged when ||H v - lambda v|| <= tol * max(1, lambda). Deterministic for
/// a fixed seed. Throws EigenNoConvergence at the matvec cap.
EigenResult lowest_eigenpair(const MagneticOperator& op, double tol, const EigenOptions& opts = {});
inline EigenResult lowest_eigenpair(const MagneticOperator& op, const EigenOptions& opts = {}) {
  return lowest_eigenpair(op, opts.tol, opts);
}

inline constexpr std::size_t kDenseOracleCap = 2000;

/// Full spectrum by dense Hermitian diagonalisation, ascending. TooLarge above
/// kDenseOracleCap.
std::vector<double> dense_oracle(const MagneticOperator& op);

/// <w, H w> / <w, w>
double rayleigh_quotient(const MagneticOperator& op, const CVec& w);

}  // namespace lp
