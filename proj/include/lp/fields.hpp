#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <vector>

#include "lp/geometry.hpp"

namespace lp {

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(const DomainSpec& spec, double h) {
  return std::make_shared<const Grid>(build_grid(spec, h));
}

enum class Location { Nodes, Plaquettes };

struct ScalarField {
  GridPtr grid;
  Location location = Location::Plaquettes;
  std::vector<double> values;

  void write_csv(std::ostream& os) const;
};

/// Solves (4 phi_p - sum of neighbouring phi_q) / h^2 = source_p on the
/// plaquette (dual) lattice, phi = 0 on cells outside the grid. Conjugate
/// gradients; iterates towards `rel_tol` and throws SolverDiverged if the
/// relative residual stalls above 1e-10.
ScalarField solve_dirichlet_poisson(const GridPtr& grid, const ScalarField& source, double rel_tol = 1e-14);

/// Peierls phases theta_e of Phi * F on the grid edges. Phases are stored for
/// the edge orientation from lower to higher node index; reversal negates.
/// Every plaquette circulation equals 2 pi Phi a_p.
class LinkField {
 public:
  /// Unit-flux field (Phi = 1): one dual Poisson solve.
  static LinkField unit(const GridPtr& grid);

  /// Same grid and reference potential at flux phi; no new solve.
  LinkField at_flux(double phi) const;

  const GridPtr& grid() const { return grid_; }
  double flux() const { return flux_; }

  double phase(int edge) const { return theta_[static_cast<std::size_t>(edge)]; }
  /// Phase for traversal of `edge` starting at node `from`.
  double phase_from(int edge, int from) const;
  const std::vector<double>& phases() const { return theta_; }
  const std::vector<double>& unit_phases() const { return *unit_; }
  /// Stream potential of the unit-flux field on plaquettes.
  const ScalarField& unit_stream() const { return *stream_; }

  /// Counter-clockwise circulation of theta around a plaquette.
  double circulation(int plaquette) const;

  void write_csv(std::ostream& os) const;

 private:
  GridPtr grid_;
  double flux_ = 0.0;
  std::shared_ptr<const std::vector<double>> unit_;
  std::shared_ptr<const ScalarField> stream_;
  std::vector<double> theta_;
};

LinkField build_link_field(const GridPtr& grid, double phi);

/// Unit-modulus gauge factors U_n on the punctured degrees of freedom
/// (Grid::punctured_nodes order), with U_j / U_i = exp(-i n theta_{i->j}) on
/// every punctured edge, so that conj(U_i) H_ij U_j shifts the flux by -n.
struct NodePhases {
  GridPtr grid;
  int n = 0;
  std::vector<std::complex<double>> values;
};

/// Accumulates phases along a BFS spanning tree rooted at the lowest-index
/// punctured node. `link` must be built at flux n. Throws InconsistentHolonomy
/// if a non-tree edge closes a loop off 2 pi Z by more than 1e-8.
NodePhases build_gauge(const LinkField& link, int n);

}  // namespace lp
