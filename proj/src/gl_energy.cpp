#include "lp/gl_energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "lp/eigensolve.hpp"
#include "lp/error.hpp"

namespace lp {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr double kMinStep = 1e-20;

double a_at(const Eigen::VectorXd& a, int p) { return p >= 0 ? a[p] : 0.0; }

void check_state(const GLState& s) {
  const Grid& g = *s.grid();
  const auto dofs = s.variant == GLVariant::Full ? g.num_nodes() : g.punctured_nodes().size();
  if (static_cast<std::size_t>(s.psi.size()) != dofs) {
    throw Error(ErrorCode::InconsistentState, "psi length does not match the variant's dofs");
  }
  if (static_cast<std::size_t>(s.a.size()) != g.num_plaquettes()) {
    throw Error(ErrorCode::InconsistentState, "a length does not match the plaquette count");
  }
}

// Total phase of every edge in stored orientation.
std::vector<double> total_phases(const GLState& s, double phi) {
  const Grid& g = *s.grid();
  const auto& unit = s.unit.unit_phases();
  std::vector<double> theta(g.num_edges());
  for (std::size_t e = 0; e < theta.size(); ++e) {
    const auto& ed = g.edges()[e];
    theta[e] = phi * unit[e] + a_at(s.a, ed.left) - a_at(s.a, ed.right);
  }
  return theta;
}

// c = L a: counter-clockwise circulation of the a-induced phases.
Eigen::VectorXd circulation(const Grid& g, const Eigen::VectorXd& a) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(a.size());
  for (const auto& ed : g.edges()) {
    if (ed.left < 0 && ed.right < 0) continue;
    const double d = a_at(a, ed.left) - a_at(a, ed.right);
    if (ed.left >= 0) c[ed.left] += d;
    if (ed.right >= 0) c[ed.right] -= d;
  }
  return c;
}

Eigen::SparseMatrix<double> dual_laplacian(const Grid& g) {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t p = 0; p < g.num_plaquettes(); ++p) trip.emplace_back(p, p, 4.0);
  for (const auto& ed : g.edges()) {
    if (ed.left < 0 || ed.right < 0) continue;
    trip.emplace_back(ed.left, ed.right, -1.0);
    trip.emplace_back(ed.right, ed.left, -1.0);
  }
  const auto n = static_cast<Eigen::Index>(g.num_plaquettes());
  Eigen::SparseMatrix<double> l(n, n);
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

double weighted_norm(const Eigen::Ref<const Eigen::VectorXd>& v, double h) { return h * v.norm(); }

// Sobolev-type metric: 2 h^2 (H + kappa^2) for psi and (2/h^2)(L^2 + h^2 L) for a.
class Preconditioner {
 public:
  Preconditioner(const GLState& s, const GLParams& p) {
    const Grid& g = *s.grid();
    const double h = g.h();
    const auto op = assemble(s.grid(), s.unit.at_flux(p.phi), operator_variant(s.variant));
    Eigen::SparseMatrix<cplx> m = op.sparse();
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.coeffRef(i, i) += p.kappa * p.kappa;
    m *= 2.0 * h * h;
    psi_.compute(m);
    const Eigen::SparseMatrix<double> l = dual_laplacian(g);
    Eigen::SparseMatrix<double> ma = Eigen::SparseMatrix<double>(l * l) + h * h * l;
    ma *= 2.0 / (h * h);
    a_.compute(ma);
    if (psi_.info() != Eigen::Success || a_.info() != Eigen::Success) {
      throw Error(ErrorCode::SolverDiverged, "preconditioner factorisation failed");
    }
  }

  CVec solve_psi(const CVec& g) const { return psi_.solve(g); }
  Eigen::VectorXd solve_a(const Eigen::VectorXd& g) const { return a_.solve(g); }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<cplx>> psi_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> a_;
};

GLState start_state(const LinkField& unit, const GLParams& p, GLVariant variant, GLInit init) {
  GLState s = normal_state(unit, variant);
  switch (init) {
    case GLInit::Normal:
    case GLInit::Supplied: break;
    case GLInit::Uniform: s.psi.setConstant(cplx(1.0, 0.0)); break;
    case GLInit::LinearGroundState: {
      const auto op = assemble(unit.grid(), unit.at_flux(p.phi), operator_variant(variant));
      EigenResult ev;
      try {
        ev = lowest_eigenpair(op);
      } catch (const EigenNoConvergence& e) {
        ev = e.best();
      }
      // Minimise t^2 (lambda - kappa^2) + t^4 B over t; the eigenvector has unit L2 norm.
      const double h2 = unit.grid()->h() * unit.grid()->h();
      const double k2 = p.kappa * p.kappa;
      const double quartic = 0.5 * k2 * h2 * ev.vector.cwiseAbs2().cwiseAbs2().sum();
      const double t2 = quartic > 0.0 ? std::max(0.0, (k2 - ev.lambda) / (2.0 * quartic)) : 0.0;
      s.psi = std::sqrt(t2) * ev.vector;
      break;
    }
  }
  return s;
}

}  // namespace

const char* to_string(GLVariant v) { return v == GLVariant::Full ? "full" : "effective"; }

Variant operator_variant(GLVariant v) { return v == GLVariant::Full ? Variant::Full : Variant::Punctured; }

const char* to_string(GLInit init) {
  switch (init) {
    case GLInit::Normal: return "normal";
    case GLInit::Uniform: return "uniform";
    case GLInit::LinearGroundState: return "linear_ground_state";
    case GLInit::Supplied: return "supplied";
  }
  return "unknown";
}

void GLParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw Error(ErrorCode::InconsistentState, "kappa must be positive");
  if (!(phi >= 0.0) || !std::isfinite(phi)) throw Error(ErrorCode::InconsistentState, "phi must be non-negative");
  if (!(energy_rtol > 0.0) || !(grad_tol > 0.0) || max_iter == 0) {
    throw Error(ErrorCode::InconsistentState, "minimizer tolerances must be positive");
  }
}

const std::vector<int>& GLState::dof_nodes() const {
  static const std::vector<int> none;
  if (variant == GLVariant::Effective) return grid()->punctured_nodes();
  return none;  // identity map
}

CVec GLState::node_values() const {
  const Grid& g = *grid();
  if (variant == GLVariant::Full) return psi;
  CVec out = CVec::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  const auto& dofs = g.punctured_nodes();
  for (std::size_t d = 0; d < dofs.size(); ++d) out[dofs[d]] = psi[static_cast<Eigen::Index>(d)];
  return out;
}

GLState normal_state(const LinkField& unit, GLVariant variant) {
  const Grid& g = *unit.grid();
  GLState s{unit.at_flux(1.0), variant, {}, {}};
  const auto n = variant == GLVariant::Full ? g.num_nodes() : g.punctured_nodes().size();
  s.psi = CVec::Zero(static_cast<Eigen::Index>(n));
  s.a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_plaquettes()));
  return s;
}

EnergyParts energy_parts(const GLState& s, const GLParams& p) {
  check_state(s);
  const Grid& g = *s.grid();
  const double h = g.h();
  const double k2 = p.kappa * p.kappa;
  const CVec psi = s.node_values();
  const auto theta = total_phases(s, p.phi);

  EnergyParts parts;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges()[e];
    parts.kinetic += std::norm(psi[ed.from] - std::polar(1.0, theta[e]) * psi[ed.to]);
  }
  for (Eigen::Index i = 0; i < s.psi.size(); ++i) {
    const double m = std::norm(s.psi[i]);
    parts.potential += -k2 * m + 0.5 * k2 * m * m;
  }
  parts.potential *= h * h;
  parts.field = circulation(g, s.a).squaredNorm() / (h * h);
  return parts;
}

double energy(const GLState& s, const GLParams& p) { return energy_parts(s, p).total(); }

double GLGradient::inf_norm() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i) m = std::max({m, std::abs(psi[i].real()), std::abs(psi[i].imag())});
  if (a.size() > 0) m = std::max(m, a.cwiseAbs().maxCoeff());
  return m;
}

GLGradient gradient(const GLState& s, const GLParams& p) {
  check_state(s);
  const Grid& g = *s.grid();
  const double h = g.h();
  const double h2 = h * h;
  const double k2 = p.kappa * p.kappa;
  const CVec psi = s.node_values();
  const auto theta = total_phases(s, p.phi);
  const Eigen::VectorXd c = circulation(g, s.a);

  CVec gnode = CVec::Zero(psi.size());
  GLGradient out;
  out.a = Eigen::VectorXd::Zero(s.a.size());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges()[e];
    const cplx w = std::polar(1.0, theta[e]);
    const cplx d = psi[ed.from] - w * psi[ed.to];
    gnode[ed.from] += 2.0 * d;
    gnode[ed.to] -= 2.0 * std::conj(w) * d;
    if (ed.left < 0 && ed.right < 0) continue;
    // dE/d(theta_e): kinetic part plus the field term through c.
    const double dtheta = 2.0 * (std::conj(psi[ed.from]) * w * psi[ed.to]).imag() +
                          2.0 * (a_at(c, ed.left) - a_at(c, ed.right)) / h2;
    if (ed.left >= 0) out.a[ed.left] += dtheta;
    if (ed.right >= 0) out.a[ed.right] -= dtheta;
  }

  out.psi.resize(s.psi.size());
  const auto& dofs = s.dof_nodes();
  for (Eigen::Index i = 0; i < s.psi.size(); ++i) {
    const int node = s.variant == GLVariant::Full ? static_cast<int>(i) : dofs[static_cast<std::size_t>(i)];
    const cplx v = s.psi[i];
    out.psi[i] = gnode[node] + h2 * (-2.0 * k2 * v + 2.0 * k2 * std::norm(v) * v);
  }
  return out;
}

Eigen::VectorXd supercurrent(const GLState& s, const GLParams& p) {
  check_state(s);
  const Grid& g = *s.grid();
  const CVec psi = s.node_values();
  const auto theta = total_phases(s, p.phi);
  Eigen::VectorXd j(static_cast<Eigen::Index>(g.num_edges()));
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges()[e];
    j[static_cast<Eigen::Index>(e)] = (std::conj(psi[ed.from]) * std::polar(1.0, theta[e]) * psi[ed.to]).imag() / g.h();
  }
  return j;
}

double l2_norm(const GLState& s) { return s.grid()->h() * s.psi.norm(); }

double l2_norm(const GridPtr& grid, const Eigen::VectorXd& edge_values) { return weighted_norm(edge_values, grid->h()); }

double scaled_field_norm(const GLState& s) { return circulation(*s.grid(), s.a).norm() / s.grid()->h(); }

double inner_mass(const GLState& s) {
  const CVec psi = s.node_values();
  const double h = s.grid()->h();
  double m = 0.0;
  for (int node : s.grid()->inner_nodes()) m += std::norm(psi[node]);
  return h * h * m;
}

bool resolution_ok(const Grid& grid, double phi) {
  const double h = grid.h();
  return 2.0 * std::numbers::pi * phi * h * h / grid.domain().inner_area() <= 0.5;
}

void check_resolution(const Grid& grid, double phi) {
  if (!resolution_ok(grid, phi)) {
    std::ostringstream msg;
    msg << "flux " << phi << " is unresolved at h = " << grid.h() << " (requires 2 pi Phi h^2 / |omega| <= 0.5)";
    throw Error(ErrorCode::ResolutionGuard, msg.str());
  }
}

GLResult minimize_from(GLState x, const GLParams& p) {
  p.validate();
  check_state(x);
  check_resolution(*x.grid(), p.phi);
  const Preconditioner pre(x, p);

  GLResult r;
  double e = energy(x, p);
  double decrease = 0.0;
  GLGradient g = gradient(x, p);
  GLState trial = x;
  std::size_t it = 0;
  for (;; ++it) {
    const double ginf = g.inf_norm();
    r.diag.grad_inf = ginf;
    r.diag.last_decrease = decrease;
    const bool small_step = it == 0 || decrease <= p.energy_rtol * std::max(std::abs(e), 1.0);
    if (ginf < p.grad_tol && small_step) {
      r.diag.converged = true;
      break;
    }
    if (it >= p.max_iter) break;

    const CVec dpsi = -pre.solve_psi(g.psi);
    const Eigen::VectorXd da = -pre.solve_a(g.a);
    const double slope = g.psi.dot(dpsi).real() + g.a.dot(da);
    if (!(slope < 0.0)) {
      r.diag.converged = ginf < p.grad_tol;
      break;
    }
    double t = 1.0;
    double et = 0.0;
    bool accepted = false;
    while (t >= kMinStep) {
      trial.psi = x.psi + t * dpsi;
      trial.a = x.a + t * da;
      et = energy(trial, p);
      if (et <= e + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= kShrink;
    }
    if (!accepted) {
      // Backtracking exhausted: the energy is flat to rounding along the descent direction.
      r.diag.converged = ginf < p.grad_tol;
      break;
    }
    if (et > e) throw Error(ErrorCode::InconsistentState, "energy increased in an accepted step");
    decrease = e - et;
    std::swap(x.psi, trial.psi);
    std::swap(x.a, trial.a);
    e = et;
    g = gradient(x, p);
  }
  r.diag.iterations = it;
  r.energy = e;
  r.state = std::move(x);
  return r;
}

GLResult minimize(const LinkField& unit, const GLParams& p, GLVariant variant) {
  return minimize(unit, p, variant, {GLInit::Normal, GLInit::Uniform, GLInit::LinearGroundState});
}

GLResult minimize(const LinkField& unit, const GLParams& p, GLVariant variant, const std::vector<GLInit>& starts,
                  const GLState* supplied) {
  p.validate();
  check_resolution(*unit.grid(), p.phi);
  if (starts.empty()) throw Error(ErrorCode::EmptyInput, "no minimizer starts given");
  std::optional<GLResult> best;
  std::vector<std::pair<GLInit, double>> tried;
  for (GLInit init : starts) {
    GLState x0 = [&] {
      if (init != GLInit::Supplied) return start_state(unit, p, variant, init);
      if (!supplied) throw Error(ErrorCode::InconsistentState, "supplied start requested without a state");
      if (supplied->variant != variant) throw Error(ErrorCode::InconsistentState, "supplied state has another variant");
      return *supplied;
    }();
    GLResult r = minimize_from(std::move(x0), p);
    r.diag.start = init;
    tried.emplace_back(init, r.energy);
    // Prefer converged runs; among equals the lowest energy wins.
    const bool better = !best || (r.diag.converged && !best->diag.converged) ||
                        (r.diag.converged == best->diag.converged && r.energy < best->energy);
    if (better) best = std::move(r);
  }
  best->diag.starts = std::move(tried);
  return std::move(*best);
}

bool is_normal(const GLResult& r) {
  const double mass = l2_norm(r.state);
  return mass * mass <= 1e-6 * r.state.grid()->node_area() && r.energy >= -1e-8;
}

double stationarity_residual(const GLState& s, const GLParams& p) {
  check_state(s);
  const Grid& g = *s.grid();
  const double h = g.h();
  const Eigen::VectorXd c = circulation(g, s.a);
  const Eigen::VectorXd j = supercurrent(s, p);
  // Phi * residual = (c_l - c_r)/h^3 + j; divide by Phi when it is positive.
  const double scale = p.phi > 0.0 ? 1.0 / p.phi : 1.0;
  double sum = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edges()[e];
    if (ed.left < 0 || ed.right < 0) continue;
    const double r = scale * ((c[ed.left] - c[ed.right]) / (h * h * h) + j[static_cast<Eigen::Index>(e)]);
    sum += r * r;
  }
  return h * std::sqrt(sum);
}

double stationarity_residual(const GLResult& r, const GLParams& p) {
  if (!r.diag.converged) throw Error(ErrorCode::NotConverged, "stationarity residual needs a converged minimizer");
  return stationarity_residual(r.state, p);
}

RealProfile real_profile(const LinkField& unit, double kappa, const GLParams& tolerances) {
  const GridPtr& grid = unit.grid();
  RealProfile out;
  out.u = ScalarField{grid, Location::Nodes, std::vector<double>(grid->num_nodes(), 0.0)};
  const auto op = assemble(grid, unit.at_flux(0.0), Variant::Punctured);
  out.lambda0 = lowest_eigenpair(op).lambda;
  if (kappa * kappa <= out.lambda0) {
    out.subcritical = true;
    out.diag.converged = true;
    return out;
  }
  GLParams p = tolerances;
  p.kappa = kappa;
  p.phi = 0.0;
  GLResult r = minimize(unit, p, GLVariant::Effective, {GLInit::Uniform});
  out.diag = r.diag;
  const auto& dofs = grid->punctured_nodes();
  for (std::size_t d = 0; d < dofs.size(); ++d) out.u.values[dofs[d]] = std::abs(r.state.psi[static_cast<Eigen::Index>(d)]);
  return out;
}

void write_psi_csv(const GLState& s, std::ostream& os) {
  os << "node,re,im\n";
  os.precision(17);
  const auto& dofs = s.dof_nodes();
  for (Eigen::Index i = 0; i < s.psi.size(); ++i) {
    const int node = s.variant == GLVariant::Full ? static_cast<int>(i) : dofs[static_cast<std::size_t>(i)];
    os << node << ',' << s.psi[i].real() << ',' << s.psi[i].imag() << '\n';
  }
}

void write_a_csv(const GLState& s, std::ostream& os) {
  os << "dual,a\n";
  os.precision(17);
  for (Eigen::Index p = 0; p < s.a.size(); ++p) os << p << ',' << s.a[p] << '\n';
}

nlohmann::json metadata(const GLResult& r, const GLParams& p) {
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& [init, e] : r.diag.starts) starts.push_back({{"start", to_string(init)}, {"energy", e}});
  return {
      {"h", r.state.grid()->h()},
      {"phi", p.phi},
      {"kappa", p.kappa},
      {"variant", to_string(r.state.variant)},
      {"energy", r.energy},
      {"converged", r.diag.converged},
      {"iterations", r.diag.iterations},
      {"grad_inf", r.diag.grad_inf},
      {"start", to_string(r.diag.start)},
      {"starts", starts},
      {"energy_rtol", p.energy_rtol},
      {"grad_tol", p.grad_tol},
  };
}

}  // namespace lp
