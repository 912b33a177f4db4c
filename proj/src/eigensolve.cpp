#include "lp/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace lp {

namespace {

CVec start_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5; };
  CVec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = uniform();
    const double im = uniform();
    v[i] = cplx(re, im);
  }
  return v.normalized();
}

}  // namespace

double rayleigh_quotient(const MagneticOperator& op, const CVec& w) {
  const CVec hw = apply(op, w);
  return w.dot(hw).real() / w.squaredNorm();
}

EigenResult lowest_eigenpair(const MagneticOperator& op, double tol, const EigenOptions& opts) {
  if (!(tol > 0.0 && tol <= 1e-4)) throw Error(ErrorCode::InconsistentState, "eigensolver tol must lie in (0, 1e-4]");
  const auto n = static_cast<Eigen::Index>(op.dimension());
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "empty operator");
  const double h = op.grid()->h();
  const std::size_t cap = opts.max_matvecs ? opts.max_matvecs : 50 * static_cast<std::size_t>(n);

  const Eigen::Index m = std::min<Eigen::Index>(n, std::max(opts.basis, 4));
  const Eigen::Index keep = std::clamp<Eigen::Index>(opts.keep, 1, m - 2 > 0 ? m - 2 : 1);

  Eigen::MatrixXcd basis(n, m);
  Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(m, m);
  CVec w(n), coeff;
  basis.col(0) = start_vector(static_cast<std::size_t>(n), opts.seed);

  EigenResult best;
  best.residual = std::numeric_limits<double>::infinity();
  std::size_t matvecs = 0;
  Eigen::Index applied = 0;  // columns whose image is recorded in `proj`
  double beta = 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> small;

  while (true) {
    Eigen::Index size = m;
    bool invariant = false;
    for (Eigen::Index j = applied; j < m; ++j) {
      op.apply(basis.col(j).data(), w.data());
      ++matvecs;
      // Classical Gram-Schmidt, twice.
      coeff = basis.leftCols(j + 1).adjoint() * w;
      w.noalias() -= basis.leftCols(j + 1) * coeff;
      const CVec again = basis.leftCols(j + 1).adjoint() * w;
      w.noalias() -= basis.leftCols(j + 1) * again;
      coeff += again;
      for (Eigen::Index i = 0; i < j; ++i) {
        proj(i, j) = coeff[i];
        proj(j, i) = std::conj(coeff[i]);
      }
      proj(j, j) = coeff[j].real();
      beta = w.norm();
      if (beta <= 1e-14 * std::max(1.0, std::abs(proj(j, j)))) {
        size = j + 1;
        invariant = true;
        break;
      }
      if (j + 1 < m) {
        basis.col(j + 1) = w / beta;
      }
    }
    applied = size;

    small.compute(proj.topLeftCorner(size, size));
    const auto& theta = small.eigenvalues();
    const auto& y = small.eigenvectors();
    const double estimate = invariant ? 0.0 : beta * std::abs(y(size - 1, 0));
    const double target = tol * std::max(1.0, std::abs(theta[0]));

    if (estimate <= target || matvecs >= cap) {
      CVec x = basis.leftCols(size) * y.col(0);
      x.normalize();
      CVec hx(n);
      op.apply(x.data(), hx.data());
      ++matvecs;
      const double lambda = x.dot(hx).real();
      const double res = (hx - lambda * x).norm();
      if (res < best.residual) {
        best.lambda = lambda;
        best.vector = x / h;
        best.residual = res;
      }
      best.matvecs = matvecs;
      if (res <= tol * std::max(1.0, std::abs(lambda))) {
        best.converged = true;
        return best;
      }
      if (matvecs >= cap) {
        std::ostringstream msg;
        msg << "no convergence after " << matvecs << " matvecs; best residual " << best.residual;
        throw EigenNoConvergence(msg.str(), best);
      }
      if (invariant) {
        // Exact invariant subspace but the explicit residual is above tol:
        // rounding floor reached.
        best.converged = best.residual <= 10.0 * tol * std::max(1.0, std::abs(best.lambda));
        if (best.converged) return best;
        throw EigenNoConvergence("residual stalled at rounding floor", best);
      }
    }

    // Thick restart: keep the lowest Ritz vectors plus the residual direction.
    const Eigen::Index k = std::min(keep, size - 1);
    const Eigen::MatrixXcd ritz = basis.leftCols(size) * y.leftCols(k);
    basis.leftCols(k) = ritz;
    proj.setZero();
    for (Eigen::Index i = 0; i < k; ++i) proj(i, i) = theta[i];
    basis.col(k) = w / beta;
    // Re-orthogonalise the residual direction against the rotated basis.
    for (int pass = 0; pass < 2; ++pass) {
      const CVec c = basis.leftCols(k).adjoint() * basis.col(k);
      basis.col(k) -= basis.leftCols(k) * c;
    }
    basis.col(k).normalize();
    applied = k;
  }
}

std::vector<double> dense_oracle(const MagneticOperator& op) {
  if (op.dimension() > kDenseOracleCap) {
    std::ostringstream msg;
    msg << "dimension " << op.dimension() << " exceeds dense cap " << kDenseOracleCap;
    throw Error(ErrorCode::TooLarge, msg.str());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(op.dense(), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace lp
