#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace plateid {

using Vec3 = Eigen::Vector3d;

/// Node indices of one 6-node wedge: bottom triangle, then the top triangle
/// stacked above it, both counter-clockwise seen from +z.
using WedgeNodes = std::array<std::size_t, 6>;

struct BoundarySet {
  std::string name;
  std::vector<std::size_t> nodes;  // sorted, unique
};

/// Single-element-thick plate mesh of right triangular prisms.
///
/// Immutable after construction. The constructor validates the element
/// invariants (distinct valid indices, vertically aligned faces with a common
/// thickness, positive in-plane area) and builds the node-sharing element
/// neighbour graph.
class WedgeMesh {
 public:
  WedgeMesh() = default;
  WedgeMesh(std::vector<Vec3> nodes, std::vector<WedgeNodes> elements,
            std::vector<BoundarySet> boundaries);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  std::size_t num_boundaries() const { return boundaries_.size(); }

  const Vec3& node(std::size_t a) const { return nodes_[a]; }
  const std::vector<Vec3>& nodes() const { return nodes_; }
  const WedgeNodes& element(std::size_t e) const { return elements_[e]; }
  const std::vector<WedgeNodes>& elements() const { return elements_; }
  const std::vector<BoundarySet>& boundaries() const { return boundaries_; }
  const BoundarySet& boundary(std::size_t k) const { return boundaries_[k]; }

  /// Elements sharing at least one node with `e` (sorted, `e` excluded).
  const std::vector<std::size_t>& neighbors(std::size_t e) const { return neighbors_[e]; }
  /// Elements containing node `a` (sorted).
  const std::vector<std::size_t>& elements_of_node(std::size_t a) const {
    return node_elements_[a];
  }

  double thickness() const { return thickness_; }
  double element_area(std::size_t e) const { return areas_[e]; }
  double element_volume(std::size_t e) const { return areas_[e] * thickness_; }
  /// In-plane centroid of the element.
  Eigen::Vector2d centroid(std::size_t e) const;

  /// True when the node lies on at least one boundary set.
  bool on_boundary(std::size_t a) const { return on_boundary_[a] != 0; }

  /// Content hash; displacement fields carry it to tie them to a mesh.
  std::uint64_t id() const { return id_; }

 private:
  std::vector<Vec3> nodes_;
  std::vector<WedgeNodes> elements_;
  std::vector<BoundarySet> boundaries_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::vector<std::size_t>> node_elements_;
  std::vector<double> areas_;
  std::vector<char> on_boundary_;
  double thickness_ = 0.0;
  std::uint64_t id_ = 0;
};

/// Element -> segment id in 1..num_segments.
struct SegmentMap {
  std::vector<int> element_segment;
  int num_segments = 0;

  SegmentMap() = default;
  /// Validates contiguity of ids (every id in 1..n used at least once).
  explicit SegmentMap(std::vector<int> labels);

  int operator[](std::size_t e) const { return element_segment[e]; }
  std::size_t size() const { return element_segment.size(); }
  bool operator==(const SegmentMap&) const = default;
};

struct DisplacementField {
  std::vector<Vec3> values;  // mm, one per node
  std::uint64_t mesh_id = 0;

  DisplacementField() = default;
  DisplacementField(std::vector<Vec3> v, std::uint64_t id) : values(std::move(v)), mesh_id(id) {}

  static DisplacementField zero(const WedgeMesh& mesh);
  std::size_t size() const { return values.size(); }
  const Vec3& operator[](std::size_t a) const { return values[a]; }
  Vec3& operator[](std::size_t a) { return values[a]; }
};

/// Throws InvalidArgument unless `field` has one finite 3-vector per node of
/// `mesh` and carries its id.
void check_field(const WedgeMesh& mesh, const DisplacementField& field);

/// Structured square plate: n_divisions^2 cells, each split into two wedges
/// with the diagonal alternating cell by cell. Boundary sets, in order:
/// x0 (x = 0), xL (x = L), y0 (y = 0), yL (y = L); corner nodes belong to both
/// adjacent sets. Bottom face at z = 0, top face at z = thickness.
WedgeMesh generate_plate_mesh(double side_length, double thickness, int n_divisions);

namespace pattern {
/// Cross-shaped inclusion (segment 2) centred in the plate.
struct Cross {
  double arm_half_width = 0.125;   // fraction of side length
  double arm_half_length = 0.375;  // fraction of side length
};
/// Three wedge-shaped regions whose interfaces meet at the midpoint of the
/// y = 0 edge, split at 45 and 135 degrees: segment 1 right, 2 middle, 3 left.
struct Split3 {};
/// Matrix (segment 1) with an ellipse (2), a diamond (3) and a rotated
/// rectangle (4).
struct MultiInclusion {};
struct Homogeneous {};
/// Explicit element -> segment listing (one integer per line).
struct FromFile {
  std::filesystem::path path;
};
}  // namespace pattern

using Pattern = std::variant<pattern::Cross, pattern::Split3, pattern::MultiInclusion,
                             pattern::Homogeneous, pattern::FromFile>;

/// Parses "cross", "split3", "multi_inclusion", "homogeneous" or
/// "file:<path>".
Pattern parse_pattern(const std::string& text);
std::string pattern_name(const Pattern& p);

/// Segment id of an in-plane point for an analytic pattern on a square plate
/// of the given side length. Not defined for FromFile.
int classify_point(const Pattern& p, const Eigen::Vector2d& x, double side_length);

/// Classifies every element by its in-plane centroid (or reads the listing
/// for FromFile).
SegmentMap generate_pattern(const WedgeMesh& mesh, const Pattern& p);

/// Barycentric transfer of a nodal field onto another plate mesh of the same
/// thickness. Each target node is located in a source triangle of the
/// matching face; nodes outside the source footprint by at most
/// `snap_tolerance` (absolute, mm; negative selects 1e-6 of the source
/// bounding-box diagonal) are projected onto the nearest triangle.
DisplacementField interpolate_to_mesh(const WedgeMesh& source, const DisplacementField& field,
                                      const WedgeMesh& target, double snap_tolerance = -1.0);

/// Segment map on `target` obtained by locating each target element centroid
/// in `source` and copying that element's segment.
SegmentMap transfer_segments(const WedgeMesh& source, const SegmentMap& segments,
                             const WedgeMesh& target);

}  // namespace plateid
