#include "lp/fields.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>

#include "lp/error.hpp"

namespace lp {

namespace {

constexpr double kRequiredPoissonTol = 1e-10;

// Neighbouring plaquette across each of the four sides, -1 outside.
std::vector<std::array<int, 4>> dual_neighbours(const Grid& g) {
  std::vector<std::array<int, 4>> nb(g.num_plaquettes());
  for (std::size_t p = 0; p < g.num_plaquettes(); ++p) {
    const auto& pl = g.plaquettes()[p];
    for (int k = 0; k < 4; ++k) {
      const auto& e = g.edges()[pl.edges[k]];
      nb[p][k] = e.left == static_cast<int>(p) ? e.right : e.left;
    }
  }
  return nb;
}

void apply_dual_laplacian(const std::vector<std::array<int, 4>>& nb, const std::vector<double>& x,
                          std::vector<double>& y, double inv_h2) {
  for (std::size_t p = 0; p < nb.size(); ++p) {
    double s = 4.0 * x[p];
    for (int q : nb[p])
      if (q >= 0) s -= x[q];
    y[p] = s * inv_h2;
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void ScalarField::write_csv(std::ostream& os) const {
  os << "index,value\n";
  os.precision(17);
  for (std::size_t k = 0; k < values.size(); ++k) os << k << ',' << values[k] << '\n';
}

ScalarField solve_dirichlet_poisson(const GridPtr& grid, const ScalarField& source, double rel_tol) {
  const Grid& g = *grid;
  const std::size_t n = g.num_plaquettes();
  if (source.location != Location::Plaquettes || source.values.size() != n) {
    throw Error(ErrorCode::GridMismatch, "Poisson source must live on the plaquettes of this grid");
  }
  ScalarField out{grid, Location::Plaquettes, std::vector<double>(n, 0.0)};
  const auto nb = dual_neighbours(g);
  const double inv_h2 = 1.0 / (g.h() * g.h());

  std::vector<double> r = source.values;
  for (double v : r)
    if (!std::isfinite(v)) throw Error(ErrorCode::SolverDiverged, "non-finite Poisson source");
  const double bnorm = std::sqrt(dot(r, r));
  if (bnorm == 0.0) return out;

  std::vector<double>& x = out.values;
  std::vector<double> p = r, ap(n);
  double rr = dot(r, r);
  double best = 1.0;
  int since_best = 0;
  const int max_iter = static_cast<int>(10 * n + 100);
  for (int it = 0; it < max_iter; ++it) {
    apply_dual_laplacian(nb, p, ap, inv_h2);
    const double alpha = rr / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_new = dot(r, r);
    const double rel = std::sqrt(rr_new) / bnorm;
    if (rel <= rel_tol) break;
    if (rel < 0.5 * best) {
      best = rel;
      since_best = 0;
    } else if (++since_best > 200) {
      break;  // stagnated at the rounding floor
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }

  // Certify with the true residual.
  apply_dual_laplacian(nb, x, ap, inv_h2);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) res += (source.values[i] - ap[i]) * (source.values[i] - ap[i]);
  const double rel = std::sqrt(res) / bnorm;
  if (!(rel <= std::max(rel_tol, kRequiredPoissonTol))) {
    std::ostringstream msg;
    msg << "relative residual " << rel << " after CG";
    throw Error(ErrorCode::SolverDiverged, msg.str());
  }
  return out;
}

LinkField LinkField::unit(const GridPtr& grid) {
  const Grid& g = *grid;
  ScalarField source{grid, Location::Plaquettes, std::vector<double>(g.num_plaquettes())};
  const double scale = 2.0 * std::numbers::pi / (g.h() * g.h());
  for (std::size_t p = 0; p < g.num_plaquettes(); ++p) source.values[p] = scale * g.plaquettes()[p].weight;
  auto stream = std::make_shared<ScalarField>(solve_dirichlet_poisson(grid, source));

  // theta_e = s(left) - s(right): each plaquette sees 4 s_p - sum s_q = 2 pi a_p.
  auto theta = std::make_shared<std::vector<double>>(g.num_edges(), 0.0);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges()[e];
    const double sl = ed.left >= 0 ? stream->values[ed.left] : 0.0;
    const double sr = ed.right >= 0 ? stream->values[ed.right] : 0.0;
    (*theta)[e] = sl - sr;
  }

  LinkField f;
  f.grid_ = grid;
  f.flux_ = 1.0;
  f.unit_ = theta;
  f.stream_ = stream;
  f.theta_ = *theta;
  return f;
}

LinkField LinkField::at_flux(double phi) const {
  LinkField f;
  f.grid_ = grid_;
  f.flux_ = phi;
  f.unit_ = unit_;
  f.stream_ = stream_;
  f.theta_.resize(unit_->size());
  for (std::size_t e = 0; e < unit_->size(); ++e) f.theta_[e] = phi * (*unit_)[e];
  return f;
}

double LinkField::phase_from(int edge, int from) const {
  const auto& ed = grid_->edges()[static_cast<std::size_t>(edge)];
  return ed.from == from ? theta_[edge] : -theta_[edge];
}

double LinkField::circulation(int plaquette) const {
  const auto& p = grid_->plaquettes()[static_cast<std::size_t>(plaquette)];
  double c = 0.0;
  for (int k = 0; k < 4; ++k) c += p.signs[k] * theta_[p.edges[k]];
  return c;
}

void LinkField::write_csv(std::ostream& os) const {
  os << "index,value\n";
  os.precision(17);
  for (std::size_t k = 0; k < theta_.size(); ++k) os << k << ',' << theta_[k] << '\n';
}

LinkField build_link_field(const GridPtr& grid, double phi) {
  if (!(phi >= 0.0) || !std::isfinite(phi)) throw Error(ErrorCode::InconsistentState, "flux must be >= 0");
  return LinkField::unit(grid).at_flux(phi);
}

NodePhases build_gauge(const LinkField& link, int n) {
  const Grid& g = *link.grid();
  if (link.flux() != static_cast<double>(n)) {
    throw Error(ErrorCode::GridMismatch, "gauge requires a link field built at the integer flux n");
  }
  NodePhases out{link.grid(), n, {}};
  const auto& dofs = g.punctured_nodes();
  const auto& index = g.punctured_index();
  out.values.assign(dofs.size(), {1.0, 0.0});
  if (n == 0 || dofs.empty()) return out;

  std::vector<double> angle(dofs.size(), 0.0);
  std::vector<char> seen(dofs.size(), 0);
  std::vector<char> tree_edge(g.num_edges(), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  while (!frontier.empty()) {
    const int d = frontier.front();
    frontier.pop();
    const int node = dofs[d];
    for (int e : g.incident(node)) {
      const auto& ed = g.edges()[e];
      const int other = ed.from == node ? ed.to : ed.from;
      const int od = index[other];
      if (od < 0 || seen[od]) continue;
      seen[od] = 1;
      tree_edge[e] = 1;
      angle[od] = angle[d] - link.phase_from(e, node);
      frontier.push(od);
    }
  }
  for (char s : seen)
    if (!s) throw Error(ErrorCode::InconsistentHolonomy, "punctured grid graph is not connected");

  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    if (tree_edge[e]) continue;
    const auto& ed = g.edges()[e];
    const int a = index[ed.from];
    const int b = index[ed.to];
    if (a < 0 || b < 0) continue;
    const double loop = angle[b] - angle[a] + link.phase(static_cast<int>(e));
    const double mismatch = loop - two_pi * std::round(loop / two_pi);
    if (std::abs(mismatch) > 1e-8) {
      std::ostringstream msg;
      msg << "edge " << e << " closes a loop with holonomy mismatch " << mismatch;
      throw Error(ErrorCode::InconsistentHolonomy, msg.str());
    }
  }
  for (std::size_t d = 0; d < dofs.size(); ++d) out.values[d] = std::polar(1.0, angle[d]);
  return out;
}

}  // namespace lp
