#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "lp/fields.hpp"

namespace lp {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;

/// Full: Neumann on the staircase boundary of Omega.
/// Punctured: Omega_0 with u = 0 on inner-boundary and omega nodes.
/// InnerNeumann: restriction to the nodes inside omega, Neumann on its staircase.
enum class Variant { Full, Punctured, InnerNeumann };

const char* to_string(Variant v);

/// Sparse Hermitian discretisation of (-i grad - Phi F)^2 in CSR form.
/// Diagonal: active neighbour links / h^2 (links to eliminated Dirichlet nodes
/// are kept, links leaving the node set are dropped). Off-diagonal for an
/// edge i -> j: -exp(i theta_{i->j}) / h^2.
class MagneticOperator {
 public:
  std::size_t dimension() const { return dofs_.size(); }
  Variant variant() const { return variant_; }
  double flux() const { return flux_; }
  const GridPtr& grid() const { return grid_; }
  /// dof index -> node index
  const std::vector<int>& dof_nodes() const { return dofs_; }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<cplx>& values() const { return vals_; }

  cplx entry(int row, int col) const;
  /// out = H in; sizes must equal dimension().
  void apply(const cplx* in, cplx* out) const;

  Eigen::SparseMatrix<cplx> sparse() const;
  Eigen::MatrixXcd dense() const;
  /// Rows of "row,col,re,im" (0-based), one per stored entry.
  void write_triplets(std::ostream& os) const;

 private:
  friend MagneticOperator assemble(const GridPtr&, const LinkField&, Variant);
  friend MagneticOperator gauge_conjugate(const MagneticOperator&, const NodePhases&);

  GridPtr grid_;
  Variant variant_ = Variant::Full;
  double flux_ = 0.0;
  std::vector<int> dofs_;
  std::vector<int> row_ptr_;
  std::vector<int> cols_;
  std::vector<cplx> vals_;
};

MagneticOperator assemble(const GridPtr& grid, const LinkField& link, Variant variant);

/// H v. Throws DimensionMismatch on size mismatch.
CVec apply(const MagneticOperator& op, const CVec& v);

/// D(U)^* H D(U) for a punctured operator; equals assemble at flux Phi - n.
MagneticOperator gauge_conjugate(const MagneticOperator& op, const NodePhases& phases);

/// max |H_ij - conj(H_ji)| over stored entries.
double hermiticity_residual(const MagneticOperator& op);

}  // namespace lp
