#include "lp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "lp/error.hpp"

namespace lp {

namespace {

nlohmann::json shape_json(const Shape& s) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Disk>) {
          return {{"shape", "disk"}, {"cx", v.cx}, {"cy", v.cy}, {"radius", v.radius}};
        } else {
          return {{"shape", "rect"}, {"xmin", v.xmin}, {"xmax", v.xmax}, {"ymin", v.ymin}, {"ymax", v.ymax}};
        }
      },
      s);
}

// Solver tolerance used in the domination slack.
double eig_slack(const Study& st, double lambda) { return 10.0 * st.eig().tol * std::max(1.0, std::abs(lambda)); }

void put(std::ostream& os, const std::optional<double>& v) {
  if (v) os << *v;
}

const SweepRecord* find_record(const std::vector<SweepRecord>& records, double phi) {
  for (const auto& r : records)
    if (std::abs(r.phi - phi) <= 1e-9 * std::max(1.0, phi)) return &r;
  return nullptr;
}

GLParams gl_at(const Study& st, double kappa, double phi) {
  GLParams p = st.gl();
  p.kappa = kappa;
  p.phi = phi;
  return p;
}

}  // namespace

Study::Study(const DomainSpec& spec, double h, EigenOptions eig, GLParams gl, int jobs)
    : grid_(make_grid(spec, h)), unit_(LinkField::unit(grid_)), eig_(eig), gl_(gl), jobs_(std::max(1, jobs)) {}

EigenResult Study::eigenpair(Variant v, double phi) const {
  return lowest_eigenpair(assemble(grid_, unit_.at_flux(phi), v), eig_);
}

double Study::punctured_lambda(double phi) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(phi); it != cache_.end()) return it->second;
  }
  const double lambda = eigenpair(Variant::Punctured, phi).lambda;
  std::lock_guard lock(cache_mutex_);
  cache_.emplace(phi, lambda);
  return lambda;
}

nlohmann::json Study::manifest() const {
  const Grid& g = *grid_;
  nlohmann::json cached = nlohmann::json::array();
  {
    std::lock_guard lock(cache_mutex_);
    for (const auto& [phi, lambda] : cache_) cached.push_back({{"phi", phi}, {"lambda_punctured", lambda}});
  }
  return {
      {"grid",
       {{"h", g.h()},
        {"nodes", g.num_nodes()},
        {"edges", g.num_edges()},
        {"plaquettes", g.num_plaquettes()},
        {"punctured_dofs", g.punctured_nodes().size()},
        {"inner_nodes", g.inner_nodes().size()},
        {"outer", shape_json(g.domain().outer())},
        {"inner", shape_json(g.domain().inner())}}},
      {"eigensolver",
       {{"tol", eig_.tol}, {"seed", eig_.seed}, {"basis", eig_.basis}, {"keep", eig_.keep}}},
      {"minimizer", {{"energy_rtol", gl_.energy_rtol}, {"grad_tol", gl_.grad_tol}, {"max_iter", gl_.max_iter}}},
      {"jobs", jobs_},
      {"cached_eigenvalues", cached},
  };
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

const char* to_string(Phase p) { return p == Phase::Normal ? "normal" : "superconducting"; }

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Oscillating: return "oscillating";
    case Regime::AlwaysSuperconducting: return "superconducting for all sampled phi";
    case Regime::AlwaysNormal: return "normal for all sampled phi";
  }
  return "unknown";
}

std::vector<SweepRecord> sweep_lambda(const Study& st, double phi_min, double phi_max, double step,
                                      const SweepOptions& opt) {
  if (!(step > 0.0)) throw Error(ErrorCode::InconsistentState, "sweep step must be positive");
  if (!(phi_min >= 0.0) || phi_max < phi_min) throw Error(ErrorCode::InconsistentState, "sweep range is empty");
  check_resolution(*st.grid(), phi_max);

  std::vector<double> phis;
  for (long k = 0;; ++k) {
    const double phi = phi_min + static_cast<double>(k) * step;
    if (phi > phi_max + 1e-9 * std::max(1.0, phi_max)) break;
    phis.push_back(phi);
  }
  std::vector<SweepRecord> out(phis.size());
  parallel_for(phis.size(), st.jobs(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRecord& r = out[i];
    r.phi = phis[i];
    auto eig = [&](Variant v) -> std::optional<double> {
      try {
        return st.eigenpair(v, r.phi).lambda;
      } catch (const EigenNoConvergence& e) {
        r.converged = false;
        r.error += e.what();
        return e.best().lambda;
      } catch (const Error& e) {
        r.converged = false;
        r.error += e.what();
        return std::nullopt;
      }
    };
    if (opt.full) r.lambda_full = eig(Variant::Full);
    if (opt.punctured) r.lambda_punctured = eig(Variant::Punctured);
    if (opt.energies) {
      const GLParams p = gl_at(st, opt.kappa, r.phi);
      std::optional<GLResult> shown;
      if (opt.full) {
        GLResult e = minimize(st.unit(), p, GLVariant::Full);
        r.energy_full = e.energy;
        r.converged = r.converged && e.diag.converged;
        shown = std::move(e);
      }
      if (opt.punctured) {
        GLResult g = minimize(st.unit(), p, GLVariant::Effective);
        r.energy_effective = g.energy;
        r.converged = r.converged && g.diag.converged;
        if (!shown) shown = std::move(g);
      }
      if (shown) {
        r.psi_l2 = l2_norm(shown->state);
        r.phase = is_normal(*shown) ? Phase::Normal : Phase::Superconducting;
      }
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  for (const auto& r : out) check_record(r, st);
  return out;
}

void check_record(const SweepRecord& r, const Study& st) {
  if (!r.error.empty()) return;  // flagged partial record
  if (r.lambda_full && r.lambda_punctured && *r.lambda_full > *r.lambda_punctured + eig_slack(st, *r.lambda_punctured)) {
    std::ostringstream msg;
    msg << "lambda_full exceeds lambda_punctured at phi = " << r.phi;
    throw Error(ErrorCode::InconsistentState, msg.str());
  }
  if (r.energy_full && r.energy_effective && r.converged &&
      *r.energy_full > *r.energy_effective + 10.0 * st.gl().grad_tol) {
    std::ostringstream msg;
    msg << "full energy exceeds effective energy at phi = " << r.phi;
    throw Error(ErrorCode::InconsistentState, msg.str());
  }
  if (r.phase && r.psi_l2 && *r.phase == Phase::Normal &&
      *r.psi_l2 * *r.psi_l2 > 1e-6 * st.grid()->node_area()) {
    throw Error(ErrorCode::InconsistentState, "normal label on a state above the classification threshold");
  }
}

void write_sweep_csv(const std::vector<SweepRecord>& records, std::ostream& os) {
  os << "phi,lambda_full,lambda_punctured,energy_full,energy_effective,psi_l2,phase,converged\n";
  os.precision(17);
  for (const auto& r : records) {
    os << r.phi << ',';
    put(os, r.lambda_full);
    os << ',';
    put(os, r.lambda_punctured);
    os << ',';
    put(os, r.energy_full);
    os << ',';
    put(os, r.energy_effective);
    os << ',';
    put(os, r.psi_l2);
    os << ',' << (r.phase ? to_string(*r.phase) : "") << ',' << (r.converged ? "true" : "false") << '\n';
  }
}

std::vector<GapRow> convergence_gap(const Study& st, double phi0, const std::vector<int>& n_list) {
  if (n_list.empty()) throw Error(ErrorCode::EmptyInput, "empty n_list");
  if (!(phi0 >= 0.0 && phi0 < 1.0)) throw Error(ErrorCode::InconsistentState, "phi0 must lie in [0, 1)");
  check_resolution(*st.grid(), phi0 + *std::max_element(n_list.begin(), n_list.end()));
  const double base = st.punctured_lambda(phi0);
  std::vector<GapRow> rows(n_list.size());
  parallel_for(n_list.size(), st.jobs(), [&](std::size_t i) {
    rows[i].n = n_list[i];
    rows[i].phi = phi0 + n_list[i];
    rows[i].gap_lambda = base - st.eigenpair(Variant::Full, rows[i].phi).lambda;
  });
  return rows;
}

void write_gap_csv(const std::vector<GapRow>& rows, std::ostream& os) {
  os << "n,phi,gap_lambda,gap_energy\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.n << ',' << r.phi << ',' << r.gap_lambda << ',';
    put(os, r.gap_energy);
    os << '\n';
  }
}

std::vector<EnergyGapRow> effective_vs_full_energy(const Study& st, double phi0, const std::vector<int>& n_list,
                                                   double kappa) {
  if (n_list.empty()) throw Error(ErrorCode::EmptyInput, "empty n_list");
  check_resolution(*st.grid(), phi0 + *std::max_element(n_list.begin(), n_list.end()));
  const GLResult eff = minimize(st.unit(), gl_at(st, kappa, phi0), GLVariant::Effective);
  std::vector<EnergyGapRow> rows(n_list.size());
  parallel_for(n_list.size(), st.jobs(), [&](std::size_t i) {
    const GLResult full = minimize(st.unit(), gl_at(st, kappa, phi0 + n_list[i]), GLVariant::Full);
    rows[i] = {n_list[i], full.energy, eff.energy, eff.energy - full.energy, full.diag.converged && eff.diag.converged};
  });
  return rows;
}

std::vector<GapRow> merge_gaps(const std::vector<GapRow>& lambda_rows, const std::vector<EnergyGapRow>& energy_rows,
                               double phi0) {
  std::map<int, GapRow> merged;
  for (const auto& r : lambda_rows) merged[r.n] = r;
  for (const auto& e : energy_rows) {
    auto& row = merged[e.n];
    row.n = e.n;
    row.phi = phi0 + e.n;
    row.gap_energy = e.gap;
  }
  std::vector<GapRow> out;
  for (auto& [n, row] : merged) {
    if (!std::count_if(lambda_rows.begin(), lambda_rows.end(), [n = n](const GapRow& r) { return r.n == n; })) {
      row.gap_lambda = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(row);
  }
  return out;
}

double field_strength(const Grid& g, double phi) { return 2.0 * std::numbers::pi * phi / g.domain().inner_area(); }

double max_admissible_field(const Grid& g) { return 0.5 / (g.h() * g.h()); }

std::vector<DeGennesRow> degennes_ratio(const Study& st, const std::vector<double>& b_list) {
  if (b_list.empty()) throw Error(ErrorCode::EmptyInput, "empty b_list");
  const Grid& g = *st.grid();
  const double b_min = field_strength(g, 1.0);
  for (double b : b_list) {
    if (b < b_min * (1.0 - 1e-12)) {
      std::ostringstream msg;
      msg << "field " << b << " is below 2 pi / |omega| = " << b_min;
      throw Error(ErrorCode::ResolutionGuard, msg.str());
    }
    if (b * g.h() * g.h() > 0.5 * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "field " << b << " is unresolved at h = " << g.h() << " (requires b h^2 <= 0.5)";
      throw Error(ErrorCode::ResolutionGuard, msg.str());
    }
  }
  std::vector<DeGennesRow> rows(b_list.size());
  parallel_for(b_list.size(), st.jobs(), [&](std::size_t i) {
    const double b = b_list[i];
    const double phi = b * g.domain().inner_area() / (2.0 * std::numbers::pi);
    const double lambda = st.eigenpair(Variant::InnerNeumann, phi).lambda;
    rows[i] = {b, phi, lambda, lambda / b};
  });
  return rows;
}

TransitionReport detect_transitions(const Study& st, const std::vector<SweepRecord>& records, double kappa) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no sweep records");
  TransitionReport rep;
  rep.kappa = kappa;
  auto lambda_at = [&](double phi) -> std::optional<double> {
    const SweepRecord* r = find_record(records, phi);
    if (!r || !r->lambda_punctured) return std::nullopt;
    return *r->lambda_punctured;
  };
  rep.lambda0 = lambda_at(0.0).value_or(st.punctured_lambda(0.0));
  rep.lambda_half = lambda_at(0.5).value_or(st.punctured_lambda(0.5));
  const double k2 = kappa * kappa;
  rep.regime = k2 > rep.lambda_half ? Regime::AlwaysSuperconducting
               : k2 <= rep.lambda0  ? Regime::AlwaysNormal
                                    : Regime::Oscillating;

  for (int n = 1;; ++n) {
    const auto ln = lambda_at(n - 0.5);
    const auto ls = lambda_at(n);
    if (!ln || !ls) break;
    Period per;
    per.n = n;
    per.phi_normal = n - 0.5;
    per.phi_super = n;
    rep.periods.push_back(per);
  }

  // Expected phase from the eigenvalue criterion, validated by minimisation.
  const std::size_t m = rep.periods.size();
  std::vector<Phase> found(2 * m);
  std::vector<double> probe(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    probe[2 * i] = rep.periods[i].phi_normal;
    probe[2 * i + 1] = rep.periods[i].phi_super;
  }
  check_resolution(*st.grid(), probe.empty() ? 0.0 : probe.back());
  parallel_for(probe.size(), st.jobs(), [&](std::size_t i) {
    const GLResult r = minimize(st.unit(), gl_at(st, kappa, probe[i]), GLVariant::Effective);
    found[i] = is_normal(r) ? Phase::Normal : Phase::Superconducting;
  });

  std::ostringstream contradictions;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Phase expected = k2 < *lambda_at(probe[i]) ? Phase::Normal : Phase::Superconducting;
    if (found[i] != expected) {
      contradictions << " phi=" << probe[i] << " expected " << to_string(expected) << " found " << to_string(found[i]) << ';';
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    rep.periods[i].at_normal = found[2 * i];
    rep.periods[i].at_super = found[2 * i + 1];
    const double next = i + 1 < m ? rep.periods[i + 1].phi_normal : std::numeric_limits<double>::infinity();
    if (!(0.0 < rep.periods[i].phi_normal && rep.periods[i].phi_normal < rep.periods[i].phi_super &&
          rep.periods[i].phi_super < next)) {
      throw Error(ErrorCode::InconsistentState, "transition points do not interleave");
    }
  }
  if (!contradictions.str().empty()) {
    throw Error(ErrorCode::ValidationFailed, "minimizer contradicts the eigenvalue criterion:" + contradictions.str());
  }
  return rep;
}

void write_transitions_csv(const TransitionReport& report, std::ostream& os) {
  os << "period,phi_normal,phi_super,kappa\n";
  os.precision(17);
  for (const auto& p : report.periods) os << p.n << ',' << p.phi_normal << ',' << p.phi_super << ',' << report.kappa << '\n';
}

double phase_fitted_distance(const CVec& u, const CVec& v, double h) {
  if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "vectors differ in length");
  const double overlap = std::abs(u.dot(v));
  const double d2 = u.squaredNorm() + v.squaredNorm() - 2.0 * overlap;
  return h * std::sqrt(std::max(0.0, d2));
}

ProbeReport minimizer_convergence_probe(const Study& st, double phi0, int n, double kappa) {
  if (n < 0) throw Error(ErrorCode::InconsistentState, "n must be non-negative");
  const Grid& g = *st.grid();
  check_resolution(g, phi0 + n);
  GLResult eff;
  GLResult full;
  parallel_for(2, st.jobs(), [&](std::size_t i) {
    if (i == 0) eff = minimize(st.unit(), gl_at(st, kappa, phi0), GLVariant::Effective);
    else full = minimize(st.unit(), gl_at(st, kappa, phi0 + n), GLVariant::Full);
  });

  // Gauge the full minimizer back: u ~ conj(U_n) psi on the punctured dofs.
  const NodePhases gauge = build_gauge(st.unit().at_flux(n), n);
  const auto& dofs = g.punctured_nodes();
  CVec back(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t d = 0; d < dofs.size(); ++d) back[static_cast<Eigen::Index>(d)] = std::conj(gauge.values[d]) * full.state.psi[dofs[d]];

  ProbeReport rep;
  rep.n = n;
  rep.phi = phi0 + n;
  rep.distance = phase_fitted_distance(eff.state.psi, back, g.h());
  rep.inner_mass = inner_mass(full.state);
  const Eigen::VectorXd jf = supercurrent(full.state, gl_at(st, kappa, phi0 + n));
  const Eigen::VectorXd je = supercurrent(eff.state, gl_at(st, kappa, phi0));
  rep.current_distance = l2_norm(st.grid(), jf - je);
  rep.energy_full = full.energy;
  rep.energy_effective = eff.energy;
  rep.converged = full.diag.converged && eff.diag.converged;
  return rep;
}

}  // namespace lp
