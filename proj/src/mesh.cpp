#include "plateid/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "plateid/error.hpp"
#include "plateid/io.hpp"

namespace plateid {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

double signed_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

WedgeMesh::WedgeMesh(std::vector<Vec3> nodes, std::vector<WedgeNodes> elements,
                     std::vector<BoundarySet> boundaries)
    : nodes_(std::move(nodes)), elements_(std::move(elements)), boundaries_(std::move(boundaries)) {
  const std::size_t nn = nodes_.size();
  if (nn == 0 || elements_.empty()) throw InvalidArgument("mesh has no nodes or no elements");

  double scale = 0.0;
  for (const auto& x : nodes_) {
    if (!x.allFinite()) throw InvalidArgument("mesh node coordinate is not finite");
    scale = std::max(scale, x.cwiseAbs().maxCoeff());
  }
  const double tol = 1e-9 * std::max(scale, 1.0);

  areas_.resize(elements_.size());
  node_elements_.assign(nn, {});
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& el = elements_[e];
    for (int i = 0; i < 6; ++i) {
      if (el[i] >= nn) {
        throw InvalidArgument("element " + std::to_string(e) + " references node " +
                              std::to_string(el[i]) + " out of range");
      }
      for (int j = 0; j < i; ++j) {
        if (el[i] == el[j]) {
          throw InvalidArgument("element " + std::to_string(e) + " repeats node " +
                                std::to_string(el[i]));
        }
      }
    }
    for (int i = 0; i < 3; ++i) {
      const Vec3& b = nodes_[el[i]];
      const Vec3& t = nodes_[el[i + 3]];
      if (std::abs(b.x() - t.x()) > tol || std::abs(b.y() - t.y()) > tol) {
        throw InvalidArgument("element " + std::to_string(e) +
                              " top and bottom faces are not vertically aligned");
      }
      const double h = t.z() - b.z();
      if (e == 0 && i == 0) {
        if (h <= 0.0) throw InvalidArgument("element 0 has non-positive thickness");
        thickness_ = h;
      } else if (std::abs(h - thickness_) > tol) {
        throw InvalidArgument("element " + std::to_string(e) + " thickness differs from the plate");
      }
    }
    const double area = signed_area(nodes_[el[0]], nodes_[el[1]], nodes_[el[2]]);
    if (!(area > 0.0)) {
      throw InvalidArgument("element " + std::to_string(e) + " has non-positive in-plane area");
    }
    areas_[e] = area;
    for (auto a : el) node_elements_[a].push_back(e);
  }

  neighbors_.assign(elements_.size(), {});
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    auto& nb = neighbors_[e];
    for (auto a : elements_[e]) {
      for (auto f : node_elements_[a]) {
        if (f != e) nb.push_back(f);
      }
    }
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  on_boundary_.assign(nn, 0);
  for (auto& set : boundaries_) {
    std::sort(set.nodes.begin(), set.nodes.end());
    set.nodes.erase(std::unique(set.nodes.begin(), set.nodes.end()), set.nodes.end());
    for (auto a : set.nodes) {
      if (a >= nn) throw InvalidArgument("boundary " + set.name + " references invalid node");
      if (++on_boundary_[a] > 2) {
        throw InvalidArgument("node " + std::to_string(a) + " belongs to more than two boundaries");
      }
    }
  }

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& x : nodes_) h = fnv1a(h, x.data(), 3 * sizeof(double));
  for (const auto& el : elements_) h = fnv1a(h, el.data(), sizeof(WedgeNodes));
  id_ = h;
}

Eigen::Vector2d WedgeMesh::centroid(std::size_t e) const {
  const auto& el = elements_[e];
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i) c += nodes_[el[i]].head<2>();
  return c / 3.0;
}

SegmentMap::SegmentMap(std::vector<int> labels) : element_segment(std::move(labels)) {
  if (element_segment.empty()) throw InvalidArgument("empty segment map");
  int n = 0;
  for (int s : element_segment) {
    if (s < 1) throw InvalidArgument("segment ids must start at 1");
    n = std::max(n, s);
  }
  std::vector<char> used(n + 1, 0);
  for (int s : element_segment) used[s] = 1;
  for (int s = 1; s <= n; ++s) {
    if (!used[s]) {
      throw InvalidArgument("segment ids are not contiguous: id " + std::to_string(s) +
                            " is unused");
    }
  }
  num_segments = n;
}

DisplacementField DisplacementField::zero(const WedgeMesh& mesh) {
  return DisplacementField(std::vector<Vec3>(mesh.num_nodes(), Vec3::Zero()), mesh.id());
}

void check_field(const WedgeMesh& mesh, const DisplacementField& field) {
  if (field.size() != mesh.num_nodes()) {
    throw InvalidArgument("displacement field has " + std::to_string(field.size()) +
                          " entries, mesh has " + std::to_string(mesh.num_nodes()) + " nodes");
  }
  if (field.mesh_id != mesh.id()) throw InvalidArgument("displacement field belongs to another mesh");
  for (const auto& u : field.values) {
    if (!u.allFinite()) throw InvalidArgument("displacement field has non-finite entries");
  }
}

WedgeMesh generate_plate_mesh(double side_length, double thickness, int n_divisions) {
  if (!(side_length > 0.0) || !(thickness > 0.0)) {
    throw InvalidArgument("plate dimensions must be positive");
  }
  if (n_divisions < 2) throw InvalidArgument("n_divisions must be at least 2");

  const std::size_t n = static_cast<std::size_t>(n_divisions);
  const std::size_t per_face = (n + 1) * (n + 1);
  const double h = side_length / static_cast<double>(n);

  std::vector<Vec3> nodes(2 * per_face);
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      // Exact edge coordinates so boundary classification is unambiguous.
      const double x = (i == n) ? side_length : h * static_cast<double>(i);
      const double y = (j == n) ? side_length : h * static_cast<double>(j);
      nodes[j * (n + 1) + i] = Vec3(x, y, 0.0);
      nodes[per_face + j * (n + 1) + i] = Vec3(x, y, thickness);
    }
  }

  auto id = [&](std::size_t i, std::size_t j) { return j * (n + 1) + i; };
  auto wedge = [&](std::size_t a, std::size_t b, std::size_t c) {
    return WedgeNodes{a, b, c, a + per_face, b + per_face, c + per_face};
  };

  std::vector<WedgeNodes> elements;
  elements.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        elements.push_back(wedge(p00, p10, p11));
        elements.push_back(wedge(p00, p11, p01));
      } else {
        elements.push_back(wedge(p00, p10, p01));
        elements.push_back(wedge(p10, p11, p01));
      }
    }
  }

  std::vector<BoundarySet> sets{{"x0", {}}, {"xL", {}}, {"y0", {}}, {"yL", {}}};
  for (std::size_t face = 0; face < 2; ++face) {
    const std::size_t off = face * per_face;
    for (std::size_t k = 0; k <= n; ++k) {
      sets[0].nodes.push_back(off + id(0, k));
      sets[1].nodes.push_back(off + id(n, k));
      sets[2].nodes.push_back(off + id(k, 0));
      sets[3].nodes.push_back(off + id(k, n));
    }
  }
  return WedgeMesh(std::move(nodes), std::move(elements), std::move(sets));
}

// ---------------------------------------------------------------------------
// Patterns

Pattern parse_pattern(const std::string& text) {
  if (text == "cross") return pattern::Cross{};
  if (text == "split3") return pattern::Split3{};
  if (text == "multi_inclusion") return pattern::MultiInclusion{};
  if (text == "homogeneous") return pattern::Homogeneous{};
  if (text.rfind("file:", 0) == 0 && text.size() > 5) return pattern::FromFile{text.substr(5)};
  throw ConfigError("unknown pattern '" + text +
                    "' (expected cross, split3, multi_inclusion, homogeneous or file:<path>)");
}

std::string pattern_name(const Pattern& p) {
  struct Visitor {
    std::string operator()(const pattern::Cross&) const { return "cross"; }
    std::string operator()(const pattern::Split3&) const { return "split3"; }
    std::string operator()(const pattern::MultiInclusion&) const { return "multi_inclusion"; }
    std::string operator()(const pattern::Homogeneous&) const { return "homogeneous"; }
    std::string operator()(const pattern::FromFile& f) const { return "file:" + f.path.string(); }
  };
  return std::visit(Visitor{}, p);
}

namespace {

bool in_rotated_box(const Eigen::Vector2d& x, const Eigen::Vector2d& c, double hx, double hy,
                    double angle) {
  const Eigen::Vector2d d = x - c;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double u = ca * d.x() + sa * d.y();
  const double v = -sa * d.x() + ca * d.y();
  return std::abs(u) <= hx && std::abs(v) <= hy;
}

bool in_rotated_ellipse(const Eigen::Vector2d& x, const Eigen::Vector2d& c, double a, double b,
                        double angle) {
  const Eigen::Vector2d d = x - c;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double u = ca * d.x() + sa * d.y();
  const double v = -sa * d.x() + ca * d.y();
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

}  // namespace

int classify_point(const Pattern& p, const Eigen::Vector2d& x, double L) {
  constexpr double pi = std::numbers::pi;
  if (const auto* c = std::get_if<pattern::Cross>(&p)) {
    const double w = c->arm_half_width * L, l = c->arm_half_length * L;
    if (!(w > 0.0 && l > w && l < 0.5 * L)) {
      throw InvalidArgument("cross geometry does not fit inside the plate");
    }
    const double dx = std::abs(x.x() - 0.5 * L), dy = std::abs(x.y() - 0.5 * L);
    const bool inside = (dx <= w && dy <= l) || (dy <= w && dx <= l);
    return inside ? 2 : 1;
  }
  if (std::holds_alternative<pattern::Split3>(p)) {
    const double phi = std::atan2(x.y(), x.x() - 0.5 * L);
    // Both rays follow element diagonals when n_divisions is a multiple of 4.
    if (phi < pi / 4.0) return 1;
    if (phi < 3.0 * pi / 4.0) return 2;
    return 3;
  }
  if (std::holds_alternative<pattern::MultiInclusion>(p)) {
    const Eigen::Vector2d y = x / L;
    if (in_rotated_ellipse(y, {0.30, 0.70}, 0.15, 0.09, pi / 6.0)) return 2;
    if (std::abs(y.x() - 0.70) + std::abs(y.y() - 0.68) <= 0.13) return 3;
    if (in_rotated_box(y, {0.50, 0.25}, 0.22, 0.07, pi / 12.0)) return 4;
    return 1;
  }
  if (std::holds_alternative<pattern::Homogeneous>(p)) return 1;
  throw InvalidArgument("classify_point is not defined for file-based patterns");
}

SegmentMap generate_pattern(const WedgeMesh& mesh, const Pattern& p) {
  if (const auto* f = std::get_if<pattern::FromFile>(&p)) {
    SegmentMap map = read_segment_map(f->path);
    if (map.size() != mesh.num_elements()) {
      throw FormatError("segment file " + f->path.string() + " has " + std::to_string(map.size()) +
                        " rows, mesh has " + std::to_string(mesh.num_elements()) + " elements");
    }
    return map;
  }
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (const auto& x : mesh.nodes()) {
    lo = std::min({lo, x.x(), x.y()});
    hi = std::max({hi, x.x(), x.y()});
  }
  const double L = hi - lo;
  std::vector<int> labels(mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const Eigen::Vector2d c = mesh.centroid(e) - Eigen::Vector2d(lo, lo);
    labels[e] = classify_point(p, c, L);
  }
  try {
    return SegmentMap(std::move(labels));
  } catch (const InvalidArgument& err) {
    throw InvalidArgument("pattern " + pattern_name(p) + " does not resolve on this mesh: " +
                          err.what());
  }
}

// ---------------------------------------------------------------------------
// Point location and interpolation

namespace {

struct Hit {
  std::size_t element;
  Eigen::Vector3d bary;
};

/// Uniform bucket grid over the bottom triangles of a wedge mesh.
class TriangleLocator {
 public:
  explicit TriangleLocator(const WedgeMesh& mesh) : mesh_(mesh) {
    lo_ = Eigen::Vector2d::Constant(std::numeric_limits<double>::max());
    Eigen::Vector2d hi = Eigen::Vector2d::Constant(std::numeric_limits<double>::lowest());
    for (const auto& x : mesh.nodes()) {
      lo_ = lo_.cwiseMin(x.head<2>());
      hi = hi.cwiseMax(x.head<2>());
    }
    diag_ = (hi - lo_).norm();
    cells_ = std::max<std::size_t>(1, static_cast<std::size_t>(
                                          std::sqrt(static_cast<double>(mesh.num_elements()))));
    size_ = (hi - lo_) / static_cast<double>(cells_);
    size_ = size_.cwiseMax(Eigen::Vector2d::Constant(1e-300));
    buckets_.assign(cells_ * cells_, {});
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      Eigen::Vector2d a = Eigen::Vector2d::Constant(std::numeric_limits<double>::max());
      Eigen::Vector2d b = Eigen::Vector2d::Constant(std::numeric_limits<double>::lowest());
      for (int i = 0; i < 3; ++i) {
        a = a.cwiseMin(corner(e, i));
        b = b.cwiseMax(corner(e, i));
      }
      const auto [i0, j0] = cell_of(a);
      const auto [i1, j1] = cell_of(b);
      for (std::size_t j = j0; j <= j1; ++j)
        for (std::size_t i = i0; i <= i1; ++i) buckets_[j * cells_ + i].push_back(e);
    }
  }

  double diagonal() const { return diag_; }

  std::optional<Hit> locate(const Eigen::Vector2d& p, double snap) const {
    const auto [ci, cj] = cell_of(p);
    for (auto e : buckets_[cj * cells_ + ci]) {
      const Eigen::Vector3d w = barycentric(e, p);
      if (w.minCoeff() >= -1e-12) return Hit{e, w};
    }
    // Outside the footprint (or on a bucket seam): nearest triangle.
    double best = std::numeric_limits<double>::max();
    Hit hit{0, Eigen::Vector3d::Zero()};
    for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
      const Eigen::Vector3d w = barycentric(e, p);
      if (w.minCoeff() >= -1e-12) return Hit{e, w};
      const auto [dist, wc] = closest(e, p);
      if (dist < best) {
        best = dist;
        hit = Hit{e, wc};
      }
    }
    if (best <= snap) return hit;
    return std::nullopt;
  }

 private:
  Eigen::Vector2d corner(std::size_t e, int i) const {
    return mesh_.node(mesh_.element(e)[i]).head<2>();
  }

  std::pair<std::size_t, std::size_t> cell_of(const Eigen::Vector2d& p) const {
    auto clampi = [&](double v) {
      if (!(v > 0.0)) return std::size_t{0};
      return std::min(cells_ - 1, static_cast<std::size_t>(v));
    };
    return {clampi((p.x() - lo_.x()) / size_.x()), clampi((p.y() - lo_.y()) / size_.y())};
  }

  Eigen::Vector3d barycentric(std::size_t e, const Eigen::Vector2d& p) const {
    const Eigen::Vector2d a = corner(e, 0), b = corner(e, 1), c = corner(e, 2);
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    const double l1 = ((b.x() - p.x()) * (c.y() - p.y()) - (c.x() - p.x()) * (b.y() - p.y())) / det;
    const double l2 = ((c.x() - p.x()) * (a.y() - p.y()) - (a.x() - p.x()) * (c.y() - p.y())) / det;
    return {l1, l2, 1.0 - l1 - l2};
  }

  std::pair<double, Eigen::Vector3d> closest(std::size_t e, const Eigen::Vector2d& p) const {
    const Eigen::Vector2d v[3] = {corner(e, 0), corner(e, 1), corner(e, 2)};
    double best = std::numeric_limits<double>::max();
    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      const Eigen::Vector2d d = v[j] - v[i];
      const double t = std::clamp((p - v[i]).dot(d) / d.squaredNorm(), 0.0, 1.0);
      const double dist = (v[i] + t * d - p).norm();
      if (dist < best) {
        best = dist;
        w.setZero();
        w[i] = 1.0 - t;
        w[j] = t;
      }
    }
    return {best, w};
  }

  const WedgeMesh& mesh_;
  Eigen::Vector2d lo_, size_;
  double diag_ = 0.0;
  std::size_t cells_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace

DisplacementField interpolate_to_mesh(const WedgeMesh& source, const DisplacementField& field,
                                      const WedgeMesh& target, double snap_tolerance) {
  check_field(source, field);
  if (std::abs(source.thickness() - target.thickness()) > 1e-9 * source.thickness()) {
    throw InterpolationError("source and target meshes have different plate thickness");
  }
  if (source.id() == target.id()) return DisplacementField(field.values, target.id());

  const TriangleLocator locator(source);
  const double snap = snap_tolerance < 0.0 ? 1e-6 * locator.diagonal() : snap_tolerance;
  const double z_bottom = source.node(source.element(0)[0]).z();
  const double z_top = z_bottom + source.thickness();
  const double ztol = 1e-6 * source.thickness();

  std::vector<Vec3> out(target.num_nodes());
  for (std::size_t a = 0; a < target.num_nodes(); ++a) {
    const Vec3& x = target.node(a);
    int face;
    if (std::abs(x.z() - z_bottom) <= ztol) {
      face = 0;
    } else if (std::abs(x.z() - z_top) <= ztol) {
      face = 3;
    } else {
      throw InterpolationError("target node " + std::to_string(a) +
                               " lies on neither face of the source plate");
    }
    const auto hit = locator.locate(x.head<2>(), snap);
    if (!hit) {
      throw InterpolationError("target node " + std::to_string(a) +
                               " lies outside the source mesh beyond the snap tolerance");
    }
    const auto& el = source.element(hit->element);
    Vec3 u = Vec3::Zero();
    for (int i = 0; i < 3; ++i) u += hit->bary[i] * field[el[face + i]];
    out[a] = u;
  }
  return DisplacementField(std::move(out), target.id());
}

SegmentMap transfer_segments(const WedgeMesh& source, const SegmentMap& segments,
                             const WedgeMesh& target) {
  if (segments.size() != source.num_elements()) {
    throw InvalidArgument("segment map does not match the source mesh");
  }
  const TriangleLocator locator(source);
  const double snap = 1e-6 * locator.diagonal();
  std::vector<int> labels(target.num_elements());
  for (std::size_t e = 0; e < target.num_elements(); ++e) {
    const auto hit = locator.locate(target.centroid(e), snap);
    if (!hit) {
      throw InterpolationError("target element " + std::to_string(e) +
                               " centroid lies outside the source mesh");
    }
    labels[e] = segments[hit->element];
  }
  // Some segments may vanish on a coarser target; relabel contiguously.
  std::vector<int> remap(segments.num_segments + 1, 0);
  for (int s : labels) remap[s] = 1;
  int next = 0;
  for (int s = 1; s <= segments.num_segments; ++s)
    if (remap[s] != 0) remap[s] = ++next;
  for (int& s : labels) s = remap[s];
  return SegmentMap(std::move(labels));
}

}  // namespace plateid
