#include "lp/cli_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "lp/error.hpp"
#include "lp/experiments.hpp"

namespace lp {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::ConfigInvalid, key + ": " + why);
}

double number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) invalid(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) invalid(key, "must be finite");
  return x;
}

double positive(const json& j, const std::string& key, double fallback) {
  const double x = number(j, key, fallback);
  if (!(x > 0.0)) invalid(key, "must be positive");
  return x;
}

double non_negative(const json& j, const std::string& key, double fallback) {
  const double x = number(j, key, fallback);
  if (!(x >= 0.0)) invalid(key, "must be non-negative");
  return x;
}

long integer(const json& j, const std::string& key, long fallback, long min) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) invalid(key, "expected an integer");
  const long x = v.get<long>();
  if (x < min) invalid(key, "must be at least " + std::to_string(min));
  return x;
}

Shape shape(const json& j, const std::string& prefix, const Shape& fallback) {
  const std::string kind_key = prefix + "_shape";
  std::string kind;
  if (j.contains(kind_key)) {
    if (!j.at(kind_key).is_string()) invalid(kind_key, "expected \"disk\" or \"rect\"");
    kind = j.at(kind_key).get<std::string>();
  } else {
    kind = std::holds_alternative<Disk>(fallback) ? "disk" : "rect";
  }
  if (kind == "disk") {
    const Disk d = std::holds_alternative<Disk>(fallback) ? std::get<Disk>(fallback) : Disk{};
    return Disk{number(j, prefix + "_cx", d.cx), number(j, prefix + "_cy", d.cy),
                positive(j, prefix + "_radius", d.radius)};
  }
  if (kind == "rect") {
    const Rect r = std::holds_alternative<Rect>(fallback) ? std::get<Rect>(fallback) : Rect{};
    Rect out{number(j, prefix + "_xmin", r.xmin), number(j, prefix + "_xmax", r.xmax),
             number(j, prefix + "_ymin", r.ymin), number(j, prefix + "_ymax", r.ymax)};
    if (!(out.xmax > out.xmin)) invalid(prefix + "_xmax", "must exceed " + prefix + "_xmin");
    if (!(out.ymax > out.ymin)) invalid(prefix + "_ymax", "must exceed " + prefix + "_ymin");
    return out;
  }
  invalid(kind_key, "unknown shape \"" + kind + "\"");
}

std::string to_text(const json& j) { return j.dump(2) + "\n"; }

template <class Writer>
std::string capture(Writer&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

// GLParams with the configured kappa and flux.
GLParams gl_params(const RunConfig& cfg, double phi) {
  GLParams p = cfg.gl;
  p.kappa = *cfg.kappa;
  p.phi = phi;
  return p;
}

void require_kappa(const RunConfig& cfg) {
  if (!cfg.kappa) invalid("kappa", "required by command " + cfg.command);
}

json run_header(const RunConfig& cfg, const Study& st) {
  json m = st.manifest();
  m["command"] = cfg.command;
  if (cfg.kappa) m["kappa"] = *cfg.kappa;
  return m;
}

double max_gradient_fd_error(const GLState& s, const GLParams& p, int dirs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const GLGradient g = gradient(s, p);
  const double eps = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < dirs; ++k) {
    CVec dpsi(s.psi.size());
    for (Eigen::Index i = 0; i < dpsi.size(); ++i) dpsi[i] = cplx(normal(rng), normal(rng));
    Eigen::VectorXd da(s.a.size());
    for (Eigen::Index i = 0; i < da.size(); ++i) da[i] = normal(rng);
    const double scale = 1.0 / std::sqrt(dpsi.squaredNorm() + da.squaredNorm());
    dpsi *= scale;
    da *= scale;
    GLState plus = s, minus = s;
    plus.psi += eps * dpsi;
    plus.a += eps * da;
    minus.psi -= eps * dpsi;
    minus.a -= eps * da;
    const double fd = (energy(plus, p) - energy(minus, p)) / (2.0 * eps);
    const double exact = g.psi.dot(dpsi).real() + g.a.dot(da);
    worst = std::max(worst, std::abs(exact - fd) / std::max(1.0, std::abs(exact)));
  }
  return worst;
}

}  // namespace

DomainSpec RunConfig::domain() const { return DomainSpec::make(outer, inner); }

RunConfig parse_config(const json& j, const std::string& command) {
  if (!j.is_object()) invalid("config", "expected a JSON object");
  RunConfig cfg;
  cfg.command = command;
  if (std::find(known_commands().begin(), known_commands().end(), command) == known_commands().end()) {
    invalid("command", "unknown command \"" + command + "\"");
  }
  cfg.outer = shape(j, "outer", cfg.outer);
  cfg.inner = shape(j, "inner", cfg.inner);
  cfg.h = positive(j, "h", cfg.h);
  if (j.contains("kappa")) cfg.kappa = positive(j, "kappa", 1.0);
  cfg.phi = non_negative(j, "phi", cfg.phi);
  cfg.phi_min = non_negative(j, "phi_min", cfg.phi_min);
  cfg.phi_max = non_negative(j, "phi_max", cfg.phi_max);
  if (cfg.phi_max < cfg.phi_min) invalid("phi_max", "must not be below phi_min");
  cfg.phi_step = positive(j, "phi_step", cfg.phi_step);
  cfg.phi0 = non_negative(j, "phi0", cfg.phi0);
  if (!(cfg.phi0 < 1.0)) invalid("phi0", "must lie in [0, 1)");
  cfg.periods = static_cast<int>(integer(j, "periods", cfg.periods, 1));
  if (j.contains("n_list")) {
    const auto& v = j.at("n_list");
    if (!v.is_array() || v.empty()) invalid("n_list", "expected a non-empty array of integers");
    cfg.n_list.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long>() < 0) {
        invalid("n_list[" + std::to_string(i) + "]", "expected a non-negative integer");
      }
      cfg.n_list.push_back(v[i].get<int>());
    }
  }
  if (j.contains("b_list")) {
    const auto& v = j.at("b_list");
    if (!v.is_array() || v.empty()) invalid("b_list", "expected a non-empty array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !(v[i].get<double>() > 0.0)) {
        invalid("b_list[" + std::to_string(i) + "]", "expected a positive number");
      }
      cfg.b_list.push_back(v[i].get<double>());
    }
  }
  if (j.contains("variant")) {
    if (!j.at("variant").is_string()) invalid("variant", "expected a string");
    cfg.variant = j.at("variant").get<std::string>();
  }
  static const std::vector<std::string> variants{"full", "punctured", "inner_neumann", "effective", "both"};
  if (std::find(variants.begin(), variants.end(), cfg.variant) == variants.end()) {
    invalid("variant", "unknown variant \"" + cfg.variant + "\"");
  }
  if (j.contains("energies")) {
    if (!j.at("energies").is_boolean()) invalid("energies", "expected true or false");
    cfg.energies = j.at("energies").get<bool>();
  }
  cfg.eig.tol = positive(j, "eig_tol", cfg.eig.tol);
  if (cfg.eig.tol > 1e-4) invalid("eig_tol", "must not exceed 1e-4");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) invalid("seed", "expected a non-negative integer");
    cfg.eig.seed = j.at("seed").get<std::uint64_t>();
  }
  cfg.gl.grad_tol = positive(j, "gl_grad_tol", cfg.gl.grad_tol);
  cfg.gl.energy_rtol = positive(j, "gl_energy_rtol", cfg.gl.energy_rtol);
  cfg.gl.max_iter = static_cast<std::size_t>(integer(j, "gl_max_iter", static_cast<long>(cfg.gl.max_iter), 1));
  cfg.jobs = static_cast<int>(integer(j, "jobs", cfg.jobs, 1));
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) invalid("out_dir", "expected a path string");
    cfg.out_dir = j.at("out_dir").get<std::string>();
  }
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> keys{
        "outer_shape", "outer_cx",  "outer_cy",  "outer_radius", "outer_xmin",  "outer_xmax",     "outer_ymin",
        "outer_ymax",  "inner_shape", "inner_cx", "inner_cy",    "inner_radius", "inner_xmin",    "inner_xmax",
        "inner_ymin",  "inner_ymax", "h",         "kappa",       "phi",          "phi_min",       "phi_max",
        "phi_step",    "phi0",       "periods",   "n_list",      "b_list",       "variant",       "energies",
        "eig_tol",     "seed",       "gl_grad_tol", "gl_energy_rtol", "gl_max_iter", "jobs",       "out_dir"};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) invalid(key, "unknown key");
  }
  try {
    (void)cfg.domain();
  } catch (const Error& e) {
    invalid("inner_shape", e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) invalid("config", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    invalid("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j, command);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::OutputUnwritable, path.parent_path().string() + ": " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::OutputUnwritable, "cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::OutputUnwritable, "write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    std::filesystem::remove(tmp, ignore);
    throw Error(ErrorCode::OutputUnwritable, path.string() + ": " + ec.message());
  }
}

std::vector<CheckResult> verify_suite(const RunConfig& cfg) {
  const Study st(cfg.domain(), cfg.h, cfg.eig, cfg.gl, cfg.jobs);
  const double kappa = cfg.kappa.value_or(2.0);
  std::vector<CheckResult> out;
  auto add = [&](std::string name, bool ok, double value, const char* what) {
    std::ostringstream d;
    d << what << " = " << std::setprecision(3) << std::scientific << value;
    out.push_back({std::move(name), ok, d.str()});
  };

  double period = 0.0;
  for (double phi : {0.13, 0.5}) {
    period = std::max(period, std::abs(st.punctured_lambda(phi + 1.0) - st.punctured_lambda(phi)));
  }
  add("flux periodicity of the punctured eigenvalue", period <= 1e-7, period, "max |lambda(phi+1) - lambda(phi)|");

  double excess = -std::numeric_limits<double>::infinity();
  for (double phi : {0.13, 0.5, 1.3}) {
    excess = std::max(excess, st.eigenpair(Variant::Full, phi).lambda - st.punctured_lambda(phi));
  }
  add("domination lambda_full <= lambda_punctured", excess <= 1e-8, excess, "max lambda_full - lambda_punctured");

  const auto op = assemble(st.grid(), st.unit().at_flux(1.3), Variant::Full);
  const double herm = hermiticity_residual(op);
  add("hermiticity", herm <= 1e-14, herm, "max |H_ij - conj(H_ji)|");

  const auto shifted = gauge_conjugate(assemble(st.grid(), st.unit().at_flux(1.3), Variant::Punctured),
                                       build_gauge(st.unit().at_flux(1.0), 1));
  const auto direct = assemble(st.grid(), st.unit().at_flux(0.3), Variant::Punctured);
  double conj_err = 0.0;
  for (std::size_t k = 0; k < direct.values().size(); ++k) {
    conj_err = std::max(conj_err, std::abs(direct.values()[k] - shifted.values()[k]));
  }
  conj_err *= st.grid()->h() * st.grid()->h();
  add("gauge conjugation U^* H(phi+1) U = H(phi)", conj_err <= 1e-10, conj_err, "max entry difference * h^2");

  std::mt19937_64 rng(cfg.eig.seed);
  std::normal_distribution<double> normal;
  double fd = 0.0;
  for (GLVariant v : {GLVariant::Full, GLVariant::Effective}) {
    GLState s = normal_state(st.unit(), v);
    for (Eigen::Index i = 0; i < s.psi.size(); ++i) s.psi[i] = cplx(normal(rng), normal(rng)) * 0.5;
    for (Eigen::Index i = 0; i < s.a.size(); ++i) s.a[i] = 0.05 * normal(rng);
    GLParams p = cfg.gl;
    p.kappa = kappa;
    p.phi = 0.7;
    fd = std::max(fd, max_gradient_fd_error(s, p, 10, cfg.eig.seed + 1));
  }
  add("GL gradient against central differences", fd <= 1e-6, fd, "max relative error");

  GLState u = normal_state(st.unit(), GLVariant::Effective);
  for (Eigen::Index i = 0; i < u.psi.size(); ++i) u.psi[i] = cplx(normal(rng), normal(rng)) * 0.5;
  for (Eigen::Index i = 0; i < u.a.size(); ++i) u.a[i] = 0.05 * normal(rng);
  GLState w = u;
  const NodePhases gauge = build_gauge(st.unit().at_flux(1.0), 1);
  for (Eigen::Index i = 0; i < w.psi.size(); ++i) w.psi[i] *= gauge.values[static_cast<std::size_t>(i)];
  GLParams p0 = cfg.gl;
  p0.kappa = kappa;
  p0.phi = 0.3;
  GLParams p1 = p0;
  p1.phi = 1.3;
  const double e0 = energy(u, p0);
  const double shift = std::abs(energy(w, p1) - e0) / std::max(1.0, std::abs(e0));
  add("effective energy gauge shift G(u, phi) = G(U u, phi + 1)", shift <= 1e-10, shift, "relative difference");
  return out;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::ResolutionGuard:
    case ErrorCode::SpacingTooCoarse:
    case ErrorCode::DegenerateDomain:
    case ErrorCode::EmptyInput: return kExitInvalid;
    default: return kExitSolver;
  }
}

int run(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    const auto& dir = cfg.out_dir;

    if (cfg.command == "verify") {
      const auto checks = verify_suite(cfg);
      json report = json::array();
      bool all = true;
      for (const auto& c : checks) {
        log << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
        report.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        all = all && c.passed;
      }
      atomic_write(dir / "verify.json", to_text(report));
      return all ? kExitOk : kExitSolver;
    }

    const Study st(cfg.domain(), cfg.h, cfg.eig, cfg.gl, cfg.jobs);
    json manifest = run_header(cfg, st);

    if (cfg.command == "potential") {
      const LinkField link = st.unit().at_flux(cfg.phi);
      atomic_write(dir / "grid.csv", capture([&](std::ostream& os) { st.grid()->write_csv(os); }));
      atomic_write(dir / "links.csv", capture([&](std::ostream& os) { link.write_csv(os); }));
      atomic_write(dir / "stream.csv", capture([&](std::ostream& os) { st.unit().unit_stream().write_csv(os); }));
      manifest["phi"] = cfg.phi;
      log << "potential: " << st.grid()->num_nodes() << " nodes, " << st.grid()->num_edges() << " edges\n";
    } else if (cfg.command == "eig") {
      check_resolution(*st.grid(), cfg.phi);
      if (cfg.variant == "inner_neumann" || cfg.variant == "effective") {
        if (cfg.variant == "effective") invalid("variant", "eig takes full, punctured, inner_neumann or both");
        const EigenResult r = st.eigenpair(Variant::InnerNeumann, cfg.phi);
        atomic_write(dir / "eig.csv", capture([&](std::ostream& os) {
                       os << "phi,lambda_inner_neumann,residual\n" << std::setprecision(17) << cfg.phi << ','
                          << r.lambda << ',' << r.residual << '\n';
                     }));
        log << "lambda_inner_neumann = " << std::setprecision(12) << r.lambda << '\n';
      } else {
        SweepOptions opt;
        opt.full = cfg.variant != "punctured";
        opt.punctured = cfg.variant != "full";
        const auto records = sweep_lambda(st, cfg.phi, cfg.phi, 1.0, opt);
        atomic_write(dir / "eig.csv", capture([&](std::ostream& os) { write_sweep_csv(records, os); }));
        if (!records.front().error.empty()) throw Error(ErrorCode::NoConvergence, records.front().error);
        if (records.front().lambda_full) log << "lambda_full = " << std::setprecision(12) << *records.front().lambda_full << '\n';
        if (records.front().lambda_punctured) {
          log << "lambda_punctured = " << std::setprecision(12) << *records.front().lambda_punctured << '\n';
        }
      }
      manifest["phi"] = cfg.phi;
    } else if (cfg.command == "sweep") {
      SweepOptions opt;
      opt.full = cfg.variant != "punctured";
      opt.punctured = cfg.variant != "full";
      opt.energies = cfg.energies;
      if (cfg.energies) {
        require_kappa(cfg);
        opt.kappa = *cfg.kappa;
      }
      const auto records = sweep_lambda(st, cfg.phi_min, cfg.phi_max, cfg.phi_step, opt);
      atomic_write(dir / "sweep.csv", capture([&](std::ostream& os) { write_sweep_csv(records, os); }));
      std::size_t failed = 0;
      for (const auto& r : records) failed += r.converged ? 0 : 1;
      manifest["samples"] = records.size();
      manifest["unconverged"] = failed;
      log << "sweep: " << records.size() << " samples, " << failed << " unconverged\n";
    } else if (cfg.command == "gl-min") {
      require_kappa(cfg);
      if (cfg.variant != "full" && cfg.variant != "effective") invalid("variant", "gl-min takes full or effective");
      const GLVariant v = cfg.variant == "full" ? GLVariant::Full : GLVariant::Effective;
      const GLParams p = gl_params(cfg, cfg.phi);
      const GLResult r = minimize(st.unit(), p, v);
      atomic_write(dir / "psi.csv", capture([&](std::ostream& os) { write_psi_csv(r.state, os); }));
      atomic_write(dir / "a.csv", capture([&](std::ostream& os) { write_a_csv(r.state, os); }));
      json meta = metadata(r, p);
      meta["phase"] = is_normal(r) ? "normal" : "superconducting";
      atomic_write(dir / "state.json", to_text(meta));
      log << "energy = " << std::setprecision(12) << r.energy << (r.diag.converged ? "" : " (not converged)") << '\n';
      if (!r.diag.converged) {
        atomic_write(dir / "manifest.json", to_text(manifest));
        throw Error(ErrorCode::NotConverged, "minimizer hit the iteration cap");
      }
    } else if (cfg.command == "converge") {
      auto rows = convergence_gap(st, cfg.phi0, cfg.n_list);
      if (cfg.kappa) rows = merge_gaps(rows, effective_vs_full_energy(st, cfg.phi0, cfg.n_list, *cfg.kappa), cfg.phi0);
      atomic_write(dir / "gaps.csv", capture([&](std::ostream& os) { write_gap_csv(rows, os); }));
      log << "converge: " << rows.size() << " rows\n";
    } else if (cfg.command == "oscillate") {
      SweepOptions opt;
      opt.full = false;
      const auto records = sweep_lambda(st, 0.0, cfg.periods, 0.5, opt);
      const double l0 = st.punctured_lambda(0.0);
      const double lh = st.punctured_lambda(0.5);
      const double kappa = cfg.kappa.value_or(std::sqrt(0.5 * (l0 + lh)));
      const TransitionReport rep = detect_transitions(st, records, kappa);
      atomic_write(dir / "sweep.csv", capture([&](std::ostream& os) { write_sweep_csv(records, os); }));
      atomic_write(dir / "transitions.csv", capture([&](std::ostream& os) { write_transitions_csv(rep, os); }));
      manifest["kappa"] = kappa;
      manifest["regime"] = to_string(rep.regime);
      log << "oscillate: regime " << to_string(rep.regime) << ", " << rep.completed() << " periods\n";
    } else if (cfg.command == "degennes") {
      std::vector<double> b = cfg.b_list;
      if (b.empty()) {
        const double bmax = max_admissible_field(*st.grid());
        b = {bmax / 4.0, bmax / 2.0, bmax};
      }
      const auto rows = degennes_ratio(st, b);
      atomic_write(dir / "degennes.csv", capture([&](std::ostream& os) {
                     os << "b,phi,lambda,ratio\n" << std::setprecision(17);
                     for (const auto& r : rows) os << r.b << ',' << r.phi << ',' << r.lambda << ',' << r.ratio << '\n';
                   }));
      log << "degennes: ratio at largest b = " << std::setprecision(6) << rows.back().ratio << '\n';
    }
    // Refresh after the run so cached eigenvalues are included.
    json full = st.manifest();
    for (auto& [k, v] : manifest.items()) {
      if (!full.contains(k)) full[k] = v;
    }
    atomic_write(dir / "manifest.json", to_text(full));
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace lp
