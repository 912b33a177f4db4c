#include <doctest.h>

#include <random>
#include <sstream>

#include "lp/error.hpp"
#include "lp/magnetic_operator.hpp"
#include "support.hpp"

using namespace lp;

namespace {

CVec random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  CVec v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = cplx(d(rng), d(rng));
  return v;
}

// <v, H v> summed edge by edge: |v_i - e^{i theta} v_j|^2 / h^2 on dof-dof
// edges, |v_i|^2 / h^2 on Dirichlet links.
double edge_form(const MagneticOperator& op, const LinkField& l, const CVec& v) {
  const Grid& g = *op.grid();
  std::vector<int> idx(g.num_nodes(), -1);
  for (std::size_t k = 0; k < op.dof_nodes().size(); ++k) idx[op.dof_nodes()[k]] = static_cast<int>(k);
  const double h2 = g.h() * g.h();
  double sum = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const int i = idx[g.edges()[e].from], j = idx[g.edges()[e].to];
    if (i >= 0 && j >= 0)
      sum += std::norm(v[i] - std::polar(1.0, l.phase(static_cast<int>(e))) * v[j]);
    else if (op.variant() == Variant::Punctured && (i >= 0 || j >= 0))
      sum += std::norm(v[std::max(i, j)]);
  }
  return sum / h2;
}

}  // namespace

TEST_CASE("quadratic form matches the edge sum for every variant") {
  const GridPtr g = test::annulus_grid(0.1);
  const LinkField l = test::annulus_unit(0.1).at_flux(0.37);
  for (Variant var : {Variant::Full, Variant::Punctured, Variant::InnerNeumann}) {
    const MagneticOperator op = assemble(g, l, var);
    CHECK(hermiticity_residual(op) <= 1e-14);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const CVec v = random_vector(op.dimension(), seed);
      const cplx form = v.dot(lp::apply(op, v));
      const double ref = edge_form(op, l, v);
      CHECK(std::abs(form.imag()) <= 1e-10 * ref);
      CHECK(form.real() == doctest::Approx(ref).epsilon(1e-12));
      CHECK(form.real() >= 0.0);
    }
  }
}

TEST_CASE("dof sets of the variants") {
  const GridPtr g = test::annulus_grid(0.1);
  const LinkField& l = test::annulus_unit(0.1);
  CHECK(assemble(g, l, Variant::Full).dimension() == g->num_nodes());
  CHECK(assemble(g, l, Variant::Punctured).dof_nodes() == g->punctured_nodes());
  CHECK(assemble(g, l, Variant::InnerNeumann).dof_nodes() == g->inner_nodes());
}

TEST_CASE("zero flux Neumann operator annihilates constants") {
  const GridPtr g = test::annulus_grid(0.1);
  const MagneticOperator op = assemble(g, test::annulus_unit(0.1).at_flux(0.0), Variant::Full);
  const CVec ones = CVec::Ones(static_cast<Eigen::Index>(op.dimension()));
  CHECK(lp::apply(op, ones).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("apply rejects wrong sizes") {
  const GridPtr g = test::annulus_grid(0.1);
  const MagneticOperator op = assemble(g, test::annulus_unit(0.1), Variant::Full);
  try {
    lp::apply(op, CVec(CVec::Ones(3)));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("sparse and dense forms agree with apply") {
  const GridPtr g = test::annulus_grid(0.1);
  const MagneticOperator op = assemble(g, test::annulus_unit(0.1).at_flux(0.8), Variant::Punctured);
  const CVec v = random_vector(op.dimension(), 9);
  const CVec hv = lp::apply(op, v);
  CHECK((op.sparse() * v - hv).norm() <= 1e-12 * hv.norm());
  CHECK((op.dense() * v - hv).norm() <= 1e-12 * hv.norm());
}

TEST_CASE("integer gauge conjugation shifts the flux") {
  const double h = 0.05;
  const GridPtr g = test::annulus_grid(h);
  const LinkField& unit = test::annulus_unit(h);
  auto max_diff = [](const MagneticOperator& a, const MagneticOperator& b) {
    const Eigen::SparseMatrix<cplx> d = a.sparse() - b.sparse();
    double m = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
      for (Eigen::SparseMatrix<cplx>::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  };
  const MagneticOperator h13 = assemble(g, unit.at_flux(1.3), Variant::Punctured);
  const MagneticOperator h03 = assemble(g, unit.at_flux(0.3), Variant::Punctured);
  const MagneticOperator shifted = gauge_conjugate(h13, build_gauge(unit.at_flux(1.0), 1));
  CHECK(shifted.flux() == doctest::Approx(0.3));
  CHECK(max_diff(shifted, h03) * h * h <= 1e-12);

  const MagneticOperator same = gauge_conjugate(h13, build_gauge(unit.at_flux(0.0), 0));
  CHECK(max_diff(same, h13) == 0.0);

  const MagneticOperator h2 = gauge_conjugate(assemble(g, unit.at_flux(2.0), Variant::Punctured),
                                              build_gauge(unit.at_flux(2.0), 2));
  double imag = 0.0;
  for (const auto& v : h2.values()) imag = std::max(imag, std::abs(v.imag()));
  CHECK(imag * h * h <= 1e-12);
}

TEST_CASE("triplet output") {
  const GridPtr g = test::annulus_grid(0.1);
  const MagneticOperator op = assemble(g, test::annulus_unit(0.1).at_flux(0.5), Variant::InnerNeumann);
  std::ostringstream os;
  op.write_triplets(os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "row,col,re,im");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    int r = 0, c = 0;
    double re = 0.0, im = 0.0;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &r, &c, &re, &im) == 4);
    CHECK(std::abs(op.entry(r, c) - cplx(re, im)) <= 1e-12 * std::abs(cplx(re, im)));
    ++rows;
  }
  CHECK(rows == op.values().size());
}
