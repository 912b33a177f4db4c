#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <variant>
#include <vector>

namespace lp {

struct Disk {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
};

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Rect {
  double xmin = -1.0;
  double xmax = 1.0;
  double ymin = -1.0;
  double ymax = 1.0;
};

using Shape = std::variant<Disk, Rect>;

/// Signed Euclidean distance to the boundary; negative inside. 1-Lipschitz.
double signed_distance(const Shape& s, double x, double y);
/// Unit outward normal of the level sets of signed_distance at (x, y).
std::array<double, 2> distance_gradient(const Shape& s, double x, double y);
double area(const Shape& s);
std::array<double, 2> center(const Shape& s);
/// Half-widths of the bounding box.
std::array<double, 2> half_extent(const Shape& s);

/// Outer domain Omega and the field region omega. Construct with make().
class DomainSpec {
 public:
  static DomainSpec make(const Shape& outer, const Shape& inner);

  const Shape& outer() const { return outer_; }
  const Shape& inner() const { return inner_; }
  double inner_area() const { return inner_area_; }
  /// dist(boundary of omega, boundary of Omega)
  double separation() const { return separation_; }

 private:
  DomainSpec() = default;
  Shape outer_;
  Shape inner_;
  double inner_area_ = 0.0;
  double separation_ = 0.0;
};

enum class NodeClass : std::uint8_t {
  InteriorOuter,   // interior of the punctured domain Omega_0
  InteriorInner,   // strictly inside omega
  OuterBoundary,   // staircase boundary of Omega (fewer than 4 active neighbours)
  InnerBoundary,   // Omega_0 side, within one cell of the boundary of omega; carries u = 0
};

struct Node {
  int ix = 0;
  int iy = 0;
  double x = 0.0;
  double y = 0.0;
  NodeClass cls = NodeClass::InteriorOuter;
};

/// Edge between 4-adjacent active nodes, oriented from the lower to the higher
/// node index. `left`/`right` are the plaquettes on either side (-1 if none).
struct Edge {
  int from = 0;
  int to = 0;
  bool horizontal = true;
  int left = -1;
  int right = -1;
};

/// Unit cell whose four corners are active.
struct Plaquette {
  int ix = 0;  // lower-left lattice coordinates
  int iy = 0;
  double cx = 0.0;
  double cy = 0.0;
  /// Counter-clockwise boundary: edge index and orientation sign (+1 if the
  /// stored edge direction agrees with the traversal).
  std::array<int, 4> edges{};
  std::array<int, 4> signs{};
  /// area(cell intersect omega) / |omega|, renormalised so the sum is exactly 1.
  double weight = 0.0;
};

class Grid {
 public:
  double h() const { return h_; }
  const DomainSpec& domain() const { return domain_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Plaquette>& plaquettes() const { return plaquettes_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_plaquettes() const { return plaquettes_.size(); }

  /// Number of active 4-neighbours of a node.
  int degree(int node) const { return degree_[node]; }
  /// Incident edge indices of a node.
  const std::vector<int>& incident(int node) const { return incident_[node]; }

  /// Node index at lattice position, or -1 if inactive / out of range.
  int node_at(int ix, int iy) const;

  /// Degrees of freedom of the punctured problem (InteriorOuter and
  /// OuterBoundary nodes), in increasing node order.
  const std::vector<int>& punctured_nodes() const { return punctured_; }
  /// Node index -> punctured dof index, or -1 when eliminated.
  const std::vector<int>& punctured_index() const { return punctured_index_; }
  /// Nodes strictly inside omega, in increasing node order.
  const std::vector<int>& inner_nodes() const { return inner_; }

  /// Sum of overlap areas before renormalisation (quadrature value of |omega|).
  double quadrature_inner_area() const { return quadrature_area_; }
  /// Staircase area |Omega_h| = active nodes * h^2.
  double node_area() const { return static_cast<double>(nodes_.size()) * h_ * h_; }

  void write_csv(std::ostream& os) const;

 private:
  friend Grid build_grid(const DomainSpec& spec, double h);

  Grid(const DomainSpec& spec, double h) : domain_(spec), h_(h) {}

  DomainSpec domain_;
  double h_;
  int nx_ = 0;
  int ny_ = 0;
  double x0_ = 0.0;
  double y0_ = 0.0;
  std::vector<int> lattice_;  // nx_*ny_, node index or -1
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<Plaquette> plaquettes_;
  std::vector<int> degree_;
  std::vector<std::vector<int>> incident_;
  std::vector<int> punctured_;
  std::vector<int> punctured_index_;
  std::vector<int> inner_;
  double quadrature_area_ = 0.0;
};

/// Builds the staircase grid. Requires h < separation/4.
Grid build_grid(const DomainSpec& spec, double h);

/// area(cell intersect omega) / |omega| for the axis-aligned cell with lower-left
/// corner (x0, y0) and side h, in closed form.
double overlap_weight(double x0, double y0, double h, const DomainSpec& spec);

const char* to_string(NodeClass c);

}  // namespace lp
