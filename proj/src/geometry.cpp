#include "lp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "lp/error.hpp"

namespace lp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Integral of sqrt(r^2 - t^2) from 0 to x, |x| <= r.
double half_chord_integral(double x, double r) {
  x = std::clamp(x, -r, r);
  return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(x / r));
}

// Area of the centred disk of radius r intersected with {X <= x, Y <= y}.
double disk_quadrant(double x, double y, double r) {
  if (y <= -r || x <= -r) return 0.0;
  auto two_s = [r](double a, double b) { return 2.0 * (half_chord_integral(b, r) - half_chord_integral(a, r)); };
  if (y >= r) return two_s(-r, x);
  const double c = std::sqrt(r * r - y * y);
  // On |X| < c the column is cut at y: integrand y + s(X).
  auto cut = [&](double a, double b) {
    b = std::min(b, x);
    if (b <= a) return 0.0;
    return y * (b - a) + half_chord_integral(b, r) - half_chord_integral(a, r);
  };
  if (y < 0.0) return cut(-c, c);
  double area = two_s(-r, std::min(x, -c)) + cut(-c, c);
  if (x > c) area += two_s(c, x);
  return area;
}

double box_overlap(const Shape& s, double x0, double y0, double side) {
  const double x1 = x0 + side;
  const double y1 = y0 + side;
  return std::visit(
      overloaded{[&](const Disk& d) {
                   const double ax = x0 - d.cx, bx = x1 - d.cx, ay = y0 - d.cy, by = y1 - d.cy;
                   const double r = d.radius;
                   const double v = disk_quadrant(bx, by, r) - disk_quadrant(ax, by, r) -
                                    disk_quadrant(bx, ay, r) + disk_quadrant(ax, ay, r);
                   return std::clamp(v, 0.0, side * side);
                 },
                 [&](const Rect& q) {
                   const double w = std::min(x1, q.xmax) - std::max(x0, q.xmin);
                   const double t = std::min(y1, q.ymax) - std::max(y0, q.ymin);
                   return w > 0.0 && t > 0.0 ? w * t : 0.0;
                 }},
      s);
}

bool valid_shape(const Shape& s) {
  return std::visit(overloaded{[](const Disk& d) { return d.radius > 0.0 && std::isfinite(d.radius); },
                               [](const Rect& r) { return r.xmax > r.xmin && r.ymax > r.ymin; }},
                    s);
}

double boundary_separation(const Shape& outer, const Shape& inner) {
  return std::visit(
      overloaded{
          [](const Disk& o, const Disk& i) { return o.radius - (std::hypot(o.cx - i.cx, o.cy - i.cy) + i.radius); },
          [](const Rect& o, const Rect& i) {
            return std::min({i.xmin - o.xmin, o.xmax - i.xmax, i.ymin - o.ymin, o.ymax - i.ymax});
          },
          [](const Rect& o, const Disk& i) {
            return std::min({i.cx - i.radius - o.xmin, o.xmax - i.cx - i.radius, i.cy - i.radius - o.ymin,
                             o.ymax - i.cy - i.radius});
          },
          [](const Disk& o, const Rect& i) {
            double far = 0.0;
            for (double x : {i.xmin, i.xmax})
              for (double y : {i.ymin, i.ymax}) far = std::max(far, std::hypot(x - o.cx, y - o.cy));
            return o.radius - far;
          }},
      outer, inner);
}

}  // namespace

double signed_distance(const Shape& s, double x, double y) {
  return std::visit(overloaded{[&](const Disk& d) { return std::hypot(x - d.cx, y - d.cy) - d.radius; },
                               [&](const Rect& r) {
                                 const double dx = std::max(r.xmin - x, x - r.xmax);
                                 const double dy = std::max(r.ymin - y, y - r.ymax);
                                 if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
                                 return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
                               }},
                    s);
}

std::array<double, 2> distance_gradient(const Shape& s, double x, double y) {
  return std::visit(overloaded{[&](const Disk& d) -> std::array<double, 2> {
                                 const double rx = x - d.cx;
                                 const double ry = y - d.cy;
                                 const double r = std::hypot(rx, ry);
                                 if (r == 0.0) return {1.0, 0.0};
                                 return {rx / r, ry / r};
                               },
                               [&](const Rect& r) -> std::array<double, 2> {
                                 const double dxl = r.xmin - x, dxr = x - r.xmax;
                                 const double dyl = r.ymin - y, dyr = y - r.ymax;
                                 const double dx = std::max(dxl, dxr);
                                 const double dy = std::max(dyl, dyr);
                                 const double sx = dxl > dxr ? -1.0 : 1.0;
                                 const double sy = dyl > dyr ? -1.0 : 1.0;
                                 if (dx <= 0.0 && dy <= 0.0) {
                                   if (dx >= dy) return {sx, 0.0};
                                   return {0.0, sy};
                                 }
                                 const double px = std::max(dx, 0.0) * sx;
                                 const double py = std::max(dy, 0.0) * sy;
                                 const double len = std::hypot(px, py);
                                 return {px / len, py / len};
                               }},
                    s);
}

double area(const Shape& s) {
  return std::visit(overloaded{[](const Disk& d) { return std::numbers::pi * d.radius * d.radius; },
                               [](const Rect& r) { return (r.xmax - r.xmin) * (r.ymax - r.ymin); }},
                    s);
}

std::array<double, 2> center(const Shape& s) {
  return std::visit(overloaded{[](const Disk& d) -> std::array<double, 2> { return {d.cx, d.cy}; },
                               [](const Rect& r) -> std::array<double, 2> {
                                 return {0.5 * (r.xmin + r.xmax), 0.5 * (r.ymin + r.ymax)};
                               }},
                    s);
}

std::array<double, 2> half_extent(const Shape& s) {
  return std::visit(overloaded{[](const Disk& d) -> std::array<double, 2> { return {d.radius, d.radius}; },
                               [](const Rect& r) -> std::array<double, 2> {
                                 return {0.5 * (r.xmax - r.xmin), 0.5 * (r.ymax - r.ymin)};
                               }},
                    s);
}

DomainSpec DomainSpec::make(const Shape& outer, const Shape& inner) {
  if (!valid_shape(outer) || !valid_shape(inner)) {
    throw Error(ErrorCode::DegenerateDomain, "shape has non-positive extent");
  }
  DomainSpec spec;
  spec.outer_ = outer;
  spec.inner_ = inner;
  spec.inner_area_ = area(inner);
  spec.separation_ = boundary_separation(outer, inner);
  if (!(spec.separation_ > 0.0)) {
    throw Error(ErrorCode::DegenerateDomain, "closure of omega is not contained in Omega");
  }
  return spec;
}

int Grid::node_at(int ix, int iy) const {
  if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return -1;
  return lattice_[static_cast<std::size_t>(iy) * nx_ + ix];
}

void Grid::write_csv(std::ostream& os) const {
  os << "node,x,y,class\n";
  os.precision(17);
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& n = nodes_[k];
    os << k << ',' << n.x << ',' << n.y << ',' << to_string(n.cls) << '\n';
  }
}

double overlap_weight(double x0, double y0, double h, const DomainSpec& spec) {
  return box_overlap(spec.inner(), x0, y0, h) / spec.inner_area();
}

Grid build_grid(const DomainSpec& spec, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::SpacingTooCoarse, "spacing must be positive");
  }
  if (!(h < 0.25 * spec.separation())) {
    std::ostringstream msg;
    msg << "h=" << h << " must be below separation/4=" << 0.25 * spec.separation();
    throw Error(ErrorCode::SpacingTooCoarse, msg.str());
  }

  Grid g(spec, h);
  const auto c = center(spec.outer());
  const auto half = half_extent(spec.outer());
  const int nhx = static_cast<int>(std::floor(half[0] / h + 1e-9));
  const int nhy = static_cast<int>(std::floor(half[1] / h + 1e-9));
  g.nx_ = 2 * nhx + 1;
  g.ny_ = 2 * nhy + 1;
  auto xcoord = [&](int ix) { return c[0] + static_cast<double>(ix - nhx) * h; };
  auto ycoord = [&](int iy) { return c[1] + static_cast<double>(iy - nhy) * h; };
  g.x0_ = xcoord(0);
  g.y0_ = ycoord(0);

  const double on_boundary = 1e-10 * h;
  std::vector<char> active(static_cast<std::size_t>(g.nx_) * g.ny_, 0);
  auto at = [&](int ix, int iy) -> char& { return active[static_cast<std::size_t>(iy) * g.nx_ + ix]; };
  for (int iy = 0; iy < g.ny_; ++iy)
    for (int ix = 0; ix < g.nx_; ++ix) at(ix, iy) = signed_distance(spec.outer(), xcoord(ix), ycoord(iy)) <= on_boundary;

  auto is_active = [&](int ix, int iy) {
    return ix >= 0 && iy >= 0 && ix < g.nx_ && iy < g.ny_ && at(ix, iy);
  };
  // Drop nodes with no active neighbour; they carry no gradient term.
  for (int iy = 0; iy < g.ny_; ++iy)
    for (int ix = 0; ix < g.nx_; ++ix)
      if (at(ix, iy) && !is_active(ix - 1, iy) && !is_active(ix + 1, iy) && !is_active(ix, iy - 1) &&
          !is_active(ix, iy + 1))
        at(ix, iy) = 0;

  g.lattice_.assign(active.size(), -1);
  for (int iy = 0; iy < g.ny_; ++iy)
    for (int ix = 0; ix < g.nx_; ++ix)
      if (at(ix, iy)) {
        g.lattice_[static_cast<std::size_t>(iy) * g.nx_ + ix] = static_cast<int>(g.nodes_.size());
        g.nodes_.push_back(Node{ix, iy, xcoord(ix), ycoord(iy), NodeClass::InteriorOuter});
      }

  // Plaquettes, indexed by lower-left cell.
  std::vector<int> cell(static_cast<std::size_t>(g.nx_) * g.ny_, -1);
  for (int iy = 0; iy + 1 < g.ny_; ++iy)
    for (int ix = 0; ix + 1 < g.nx_; ++ix)
      if (at(ix, iy) && at(ix + 1, iy) && at(ix, iy + 1) && at(ix + 1, iy + 1)) {
        cell[static_cast<std::size_t>(iy) * g.nx_ + ix] = static_cast<int>(g.plaquettes_.size());
        Plaquette p;
        p.ix = ix;
        p.iy = iy;
        p.cx = xcoord(ix) + 0.5 * h;
        p.cy = ycoord(iy) + 0.5 * h;
        g.plaquettes_.push_back(p);
      }
  auto cell_at = [&](int ix, int iy) {
    if (ix < 0 || iy < 0 || ix >= g.nx_ || iy >= g.ny_) return -1;
    return cell[static_cast<std::size_t>(iy) * g.nx_ + ix];
  };

  const std::size_t nn = g.nodes_.size();
  std::vector<int> east(nn, -1), north(nn, -1);
  for (std::size_t k = 0; k < nn; ++k) {
    const auto& n = g.nodes_[k];
    if (int j = g.node_at(n.ix + 1, n.iy); j >= 0) {
      east[k] = static_cast<int>(g.edges_.size());
      g.edges_.push_back(Edge{static_cast<int>(k), j, true, cell_at(n.ix, n.iy), cell_at(n.ix, n.iy - 1)});
    }
    if (int j = g.node_at(n.ix, n.iy + 1); j >= 0) {
      north[k] = static_cast<int>(g.edges_.size());
      g.edges_.push_back(Edge{static_cast<int>(k), j, false, cell_at(n.ix - 1, n.iy), cell_at(n.ix, n.iy)});
    }
  }

  g.degree_.assign(nn, 0);
  g.incident_.assign(nn, {});
  for (std::size_t e = 0; e < g.edges_.size(); ++e) {
    const auto& ed = g.edges_[e];
    ++g.degree_[ed.from];
    ++g.degree_[ed.to];
    g.incident_[ed.from].push_back(static_cast<int>(e));
    g.incident_[ed.to].push_back(static_cast<int>(e));
  }

  const double half_diag = h * std::numbers::sqrt2 * 0.5;
  double raw_total = 0.0;
  for (auto& p : g.plaquettes_) {
    const int sw = g.node_at(p.ix, p.iy);
    const int se = g.node_at(p.ix + 1, p.iy);
    const int nw = g.node_at(p.ix, p.iy + 1);
    p.edges = {east[sw], north[se], east[nw], north[sw]};
    p.signs = {+1, +1, -1, -1};
    if (signed_distance(spec.inner(), p.cx, p.cy) < half_diag) {
      p.weight = overlap_weight(p.cx - 0.5 * h, p.cy - 0.5 * h, h, spec);
    }
    raw_total += p.weight;
  }
  g.quadrature_area_ = raw_total * spec.inner_area();
  if (!(raw_total > 0.0)) throw Error(ErrorCode::DegenerateDomain, "omega covers no plaquette");

  // Renormalise, then nudge the largest weight until the sequential sum is 1.
  std::size_t largest = 0;
  for (std::size_t k = 0; k < g.plaquettes_.size(); ++k) {
    g.plaquettes_[k].weight /= raw_total;
    if (g.plaquettes_[k].weight > g.plaquettes_[largest].weight) largest = k;
  }
  for (int pass = 0; pass < 8; ++pass) {
    double sum = 0.0;
    for (const auto& p : g.plaquettes_) sum += p.weight;
    if (sum == 1.0) break;
    g.plaquettes_[largest].weight += 1.0 - sum;
  }

  // Classification.
  for (auto& n : g.nodes_)
    if (signed_distance(spec.inner(), n.x, n.y) < 0.0) n.cls = NodeClass::InteriorInner;
  std::vector<char> near_omega(nn, 0);
  for (const auto& p : g.plaquettes_) {
    if (p.weight <= 0.0) continue;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) near_omega[g.node_at(p.ix + dx, p.iy + dy)] = 1;
  }
  for (std::size_t k = 0; k < nn; ++k) {
    auto& n = g.nodes_[k];
    if (n.cls == NodeClass::InteriorInner) continue;
    bool touches_inner = false;
    for (int e : g.incident_[k]) {
      const auto& ed = g.edges_[e];
      const int other = ed.from == static_cast<int>(k) ? ed.to : ed.from;
      if (g.nodes_[other].cls == NodeClass::InteriorInner) touches_inner = true;
    }
    if (near_omega[k] || touches_inner) {
      n.cls = NodeClass::InnerBoundary;
    } else if (g.degree_[k] < 4) {
      n.cls = NodeClass::OuterBoundary;
    }
  }

  g.punctured_index_.assign(nn, -1);
  for (std::size_t k = 0; k < nn; ++k) {
    const auto cls = g.nodes_[k].cls;
    if (cls == NodeClass::InteriorOuter || cls == NodeClass::OuterBoundary) {
      g.punctured_index_[k] = static_cast<int>(g.punctured_.size());
      g.punctured_.push_back(static_cast<int>(k));
    } else if (cls == NodeClass::InteriorInner) {
      g.inner_.push_back(static_cast<int>(k));
    }
  }
  return g;
}

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::InteriorOuter: return "interior_outer";
    case NodeClass::InteriorInner: return "interior_inner";
    case NodeClass::OuterBoundary: return "outer_boundary";
    case NodeClass::InnerBoundary: return "inner_boundary";
  }
  return "unknown";
}

}  // namespace lp
