#include "lp/magnetic_operator.hpp"

#include <algorithm>
#include <ostream>

#include "lp/error.hpp"

namespace lp {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Punctured: return "punctured";
    case Variant::InnerNeumann: return "inner_neumann";
  }
  return "unknown";
}

cplx MagneticOperator::entry(int row, int col) const {
  const auto begin = cols_.begin() + row_ptr_[row];
  const auto end = cols_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return {0.0, 0.0};
  return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

void MagneticOperator::apply(const cplx* in, cplx* out) const {
  const std::size_t n = dofs_.size();
  for (std::size_t i = 0; i < n; ++i) {
    cplx s{0.0, 0.0};
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * in[cols_[k]];
    out[i] = s;
  }
}

Eigen::SparseMatrix<cplx> MagneticOperator::sparse() const {
  const auto n = static_cast<Eigen::Index>(dofs_.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(vals_.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) trip.emplace_back(i, cols_[k], vals_[k]);
  Eigen::SparseMatrix<cplx> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::MatrixXcd MagneticOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(dofs_.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) m(i, cols_[k]) = vals_[k];
  return m;
}

void MagneticOperator::write_triplets(std::ostream& os) const {
  os << "row,col,re,im\n";
  os.precision(17);
  for (std::size_t i = 0; i < dofs_.size(); ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      os << i << ',' << cols_[k] << ',' << vals_[k].real() << ',' << vals_[k].imag() << '\n';
}

MagneticOperator assemble(const GridPtr& grid, const LinkField& link, Variant variant) {
  if (!grid || link.grid() != grid) throw Error(ErrorCode::GridMismatch, "link field built on a different grid");
  const Grid& g = *grid;
  MagneticOperator op;
  op.grid_ = grid;
  op.variant_ = variant;
  op.flux_ = link.flux();

  std::vector<int> index(g.num_nodes(), -1);
  switch (variant) {
    case Variant::Full:
      op.dofs_.resize(g.num_nodes());
      for (std::size_t k = 0; k < g.num_nodes(); ++k) op.dofs_[k] = static_cast<int>(k);
      break;
    case Variant::Punctured: op.dofs_ = g.punctured_nodes(); break;
    case Variant::InnerNeumann: op.dofs_ = g.inner_nodes(); break;
  }
  for (std::size_t d = 0; d < op.dofs_.size(); ++d) index[op.dofs_[d]] = static_cast<int>(d);

  const double inv_h2 = 1.0 / (g.h() * g.h());
  std::vector<std::vector<std::pair<int, cplx>>> rows(op.dofs_.size());
  for (std::size_t d = 0; d < op.dofs_.size(); ++d) {
    const int node = op.dofs_[d];
    // Neumann drops links that leave the node set; Dirichlet keeps them.
    int links = 0;
    for (int e : g.incident(node)) {
      const auto& ed = g.edges()[e];
      const int other = ed.from == node ? ed.to : ed.from;
      if (variant != Variant::InnerNeumann || index[other] >= 0) ++links;
    }
    rows[d].emplace_back(static_cast<int>(d), cplx(links * inv_h2, 0.0));
  }
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges()[e];
    const int a = index[ed.from];
    const int b = index[ed.to];
    if (a < 0 || b < 0) continue;
    const cplx w = std::polar(1.0, link.phase(static_cast<int>(e)));
    rows[a].emplace_back(b, -w * inv_h2);
    rows[b].emplace_back(a, -std::conj(w) * inv_h2);
  }

  op.row_ptr_.assign(op.dofs_.size() + 1, 0);
  for (std::size_t d = 0; d < rows.size(); ++d) {
    std::sort(rows[d].begin(), rows[d].end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    op.row_ptr_[d + 1] = op.row_ptr_[d] + static_cast<int>(rows[d].size());
    for (const auto& [c, v] : rows[d]) {
      op.cols_.push_back(c);
      op.vals_.push_back(v);
    }
  }
  return op;
}

CVec apply(const MagneticOperator& op, const CVec& v) {
  if (static_cast<std::size_t>(v.size()) != op.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "vector length differs from operator dimension");
  }
  CVec out(v.size());
  op.apply(v.data(), out.data());
  return out;
}

MagneticOperator gauge_conjugate(const MagneticOperator& op, const NodePhases& phases) {
  if (op.variant() != Variant::Punctured) {
    throw Error(ErrorCode::GridMismatch, "gauge conjugation is defined on the punctured operator");
  }
  if (phases.grid != op.grid() || phases.values.size() != op.dimension()) {
    throw Error(ErrorCode::GridMismatch, "node phases built for a different grid");
  }
  MagneticOperator out = op;
  out.flux_ = op.flux() - phases.n;
  if (phases.n == 0) return out;
  for (std::size_t i = 0; i < op.dimension(); ++i) {
    const cplx ui = std::conj(phases.values[i]);
    for (int k = op.row_ptr_[i]; k < op.row_ptr_[i + 1]; ++k) {
      const int j = op.cols_[k];
      if (static_cast<std::size_t>(j) == i) continue;
      out.vals_[k] = ui * op.vals_[k] * phases.values[j];
    }
  }
  return out;
}

double hermiticity_residual(const MagneticOperator& op) {
  double worst = 0.0;
  const auto& rp = op.row_ptr();
  for (std::size_t i = 0; i < op.dimension(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      const int j = op.cols()[k];
      worst = std::max(worst, std::abs(op.values()[k] - std::conj(op.entry(j, static_cast<int>(i)))));
    }
  return worst;
}

}  // namespace lp
