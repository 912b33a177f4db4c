#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lp/fields.hpp"
#include "lp/magnetic_operator.hpp"

namespace lp {

/// Full: psi on every active node. Effective: psi on the punctured dofs only,
/// zero on omega and its inner boundary.
enum class GLVariant { Full, Effective };

const char* to_string(GLVariant v);
/// Operator variant whose quadratic form equals the kinetic term.
Variant operator_variant(GLVariant v);

struct GLParams {
  double kappa = 1.0;
  double phi = 0.0;
  /// Stop when |dE| <= energy_rtol * max(|E|, 1) and ||grad||_inf < grad_tol.
  double energy_rtol = 1e-10;
  double grad_tol = 1e-7;
  std::size_t max_iter = 200000;

  /// Throws InconsistentState unless kappa > 0, phi >= 0 and tolerances are positive.
  void validate() const;
};

/// Order parameter plus the stream-function deviation `a` of the induced
/// potential. `a` lives on plaquettes (dual nodes); dual nodes off the grid
/// are the zero outer boundary. Total link phase on edge e:
///   phi * theta_unit(e) + a(left(e)) - a(right(e)).
struct GLState {
  LinkField unit;  // unit-flux reference phases, shared with the operator
  GLVariant variant = GLVariant::Full;
  CVec psi;              // per operator dof
  Eigen::VectorXd a;     // per plaquette

  const GridPtr& grid() const { return unit.grid(); }
  /// dof index -> node index for the effective variant; empty (identity) for full.
  const std::vector<int>& dof_nodes() const;
  /// psi extended by zero to every active node.
  CVec node_values() const;
};

/// psi = 0, a = 0.
GLState normal_state(const LinkField& unit, GLVariant variant);

struct EnergyParts {
  double kinetic = 0.0;
  double potential = 0.0;
  double field = 0.0;
  double total() const { return kinetic + potential + field; }
};

/// Discrete functional:
///   sum_e |psi_i - exp(i theta_e) psi_j|^2
///   + h^2 sum_i (-kappa^2 |psi_i|^2 + kappa^2/2 |psi_i|^4)
///   + sum_p c_p^2 / h^2,
/// with c_p the counter-clockwise circulation of the a-induced phases. The
/// node sums run over the variant's dofs; the field term always covers Omega.
/// Throws InconsistentState on size mismatch.
EnergyParts energy_parts(const GLState& s, const GLParams& p);
double energy(const GLState& s, const GLParams& p);

/// Gradient with respect to (Re psi, Im psi, a), packed as d/dRe + i d/dIm.
struct GLGradient {
  CVec psi;
  Eigen::VectorXd a;
  double inf_norm() const;
};

GLGradient gradient(const GLState& s, const GLParams& p);

/// Per edge, in stored orientation: Im(conj(psi_from) exp(i theta_e) psi_to) / h.
Eigen::VectorXd supercurrent(const GLState& s, const GLParams& p);

/// Discrete L2 norms: sqrt(h^2 sum |.|^2).
double l2_norm(const GLState& s);
double l2_norm(const GridPtr& grid, const Eigen::VectorXd& edge_values);
/// Phi * ||curl(A - F)||_2 = sqrt(sum_p c_p^2) / h.
double scaled_field_norm(const GLState& s);
/// h^2 * sum of |psi|^2 over nodes strictly inside omega.
double inner_mass(const GLState& s);

enum class GLInit { Normal, Uniform, LinearGroundState, Supplied };

const char* to_string(GLInit init);

struct GLDiagnostics {
  bool converged = false;
  std::size_t iterations = 0;
  double grad_inf = 0.0;
  double last_decrease = 0.0;
  GLInit start = GLInit::Supplied;
  /// Final energy of every start tried, in order.
  std::vector<std::pair<GLInit, double>> starts;
};

struct GLResult {
  GLState state;
  double energy = 0.0;
  GLDiagnostics diag;
};

/// Phi-resolution check 2 pi Phi h^2 / |omega| <= 0.5.
bool resolution_ok(const Grid& grid, double phi);
/// Throws ResolutionGuard when resolution_ok fails.
void check_resolution(const Grid& grid, double phi);

/// Preconditioned gradient descent from one initial state, with Armijo
/// backtracking (c = 1e-4, shrink 0.5). At the iteration cap the best state
/// is returned with converged = false.
GLResult minimize_from(GLState init, const GLParams& p);

/// Best of the starts {normal, uniform, linear ground state}.
GLResult minimize(const LinkField& unit, const GLParams& p, GLVariant variant);
GLResult minimize(const LinkField& unit, const GLParams& p, GLVariant variant,
                  const std::vector<GLInit>& starts, const GLState* supplied = nullptr);

/// ||psi||_2^2 <= 1e-6 |Omega_h| and energy >= -1e-8.
bool is_normal(const GLResult& r);

/// Discrete L2 norm of (B_l - B_r)/h + j/Phi over edges with plaquettes on
/// both sides, B = c / (h^2 Phi) the induced field. At Phi = 0 the residual of
/// Phi times the identity is returned.
double stationarity_residual(const GLState& s, const GLParams& p);
/// As above; throws NotConverged when the minimizer did not converge.
double stationarity_residual(const GLResult& r, const GLParams& p);

struct RealProfile {
  ScalarField u;  // on nodes, zero off the punctured dofs
  bool subcritical = false;
  double lambda0 = 0.0;  // lowest punctured eigenvalue at zero flux
  GLDiagnostics diag;
};

/// Positive solution of the real effective problem at zero flux, or the zero
/// field flagged subcritical when kappa^2 <= lambda0.
RealProfile real_profile(const LinkField& unit, double kappa, const GLParams& tolerances = {});

/// "node,re,im" with node the grid node index.
void write_psi_csv(const GLState& s, std::ostream& os);
/// "dual,a" with dual the plaquette index.
void write_a_csv(const GLState& s, std::ostream& os);
nlohmann::json metadata(const GLResult& r, const GLParams& p);

}  // namespace lp
